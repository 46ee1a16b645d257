import json

import pytest
from pydantic import ValidationError

from app.core.config import OutputFormat, PipelineConfig, load_pipeline_config
from app.models.reconstruction import IntegrationVariant


def test_defaults_without_a_document():
    config = load_pipeline_config(None)

    assert config == PipelineConfig()
    assert config.window_fraction == 0.1
    assert config.min_lobe_power_ratio == 50.0
    assert config.wsi_strategy == 3
    assert config.output_format is OutputFormat.QPH


def test_partial_document_keeps_other_defaults(tmp_path):
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({"integration": {"variant": "plain"}, "wsi_strategy": 1}))

    config = load_pipeline_config(path)

    assert config.integration.variant is IntegrationVariant.PLAIN
    assert config.wsi_strategy == 1
    assert config.setup == PipelineConfig().setup


def test_dc_disk_must_fit_inside_window():
    with pytest.raises(ValidationError):
        PipelineConfig(window_fraction=0.05, dc_exclusion_fraction=0.08)


def test_unknown_strategy_rejected(tmp_path):
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps({"wsi_strategy": 4}))

    with pytest.raises(ValidationError):
        load_pipeline_config(path)

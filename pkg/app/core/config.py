from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.models.optics import OpticalSetup
from app.models.reconstruction import IntegrationConfig


class Settings(BaseSettings):
    # Application Settings
    APP_NAME: str = "qphase"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Process defaults, overridden by --threads / --seed
    DEFAULT_THREADS: int = 1
    DEFAULT_SEED: int = 0

    model_config = SettingsConfigDict(case_sensitive=True)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # All state flows through flags and the config document
        return (init_settings,)


class OutputFormat(str, Enum):
    QPH = "qph"
    PNG16 = "png16"
    CSV = "csv"


class PipelineConfig(BaseModel):
    """
    Single JSON configuration document with full defaulting.
    """

    setup: OpticalSetup = Field(default_factory=OpticalSetup)
    integration: IntegrationConfig = Field(default_factory=IntegrationConfig)

    # Lobe search
    window_fraction: float = Field(0.1, gt=0, le=0.25)
    dc_exclusion_fraction: float = Field(0.08, gt=0)
    sector_half_width_deg: float = Field(15.0, ge=0, lt=45)
    axis_exclusion_deg: float = Field(15.0, ge=0, lt=45)
    min_lobe_power_ratio: float = Field(50.0, gt=1)
    apodize: bool = False

    # Evaluation
    mask_erosion_px: int = Field(2, ge=0)
    metric_units: Literal["um", "rad"] = "um"
    background_align: bool = True

    # Whole-slide reconstruction
    wsi_strategy: Literal[1, 2, 3] = 3

    output_format: OutputFormat = OutputFormat.QPH

    @model_validator(mode="after")
    def _validate_fractions(self) -> "PipelineConfig":
        if not self.dc_exclusion_fraction < self.window_fraction:
            raise ValueError("dc_exclusion_fraction must be smaller than window_fraction")
        return self


def load_pipeline_config(path: Optional[Path] = None) -> PipelineConfig:
    """
    Load a pipeline config document.

    Args:
        path: JSON file; None returns the defaults

    Returns:
        Validated PipelineConfig
    """
    if path is None:
        return PipelineConfig()
    return PipelineConfig.model_validate_json(Path(path).read_text())


# Create global settings instance
settings = Settings()

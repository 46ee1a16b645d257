"""
Human-readable report rendering with Jinja2.
Turns corpus and patch-line statistics into plain-text tables.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound

from app.core.config import settings
from app.core.exceptions import InternalError
from app.core.logging import get_logger
from app.models.metrics import CorpusReport, DiscontinuityReport

logger = get_logger(__name__)


class ReportType(str, Enum):
    """Supported report templates"""

    CORPUS = "corpus"
    DISCONTINUITY = "discontinuity"


# Template file mapping
TEMPLATE_MAP = {
    ReportType.CORPUS: "corpus_report.txt.j2",
    ReportType.DISCONTINUITY: "discontinuity_report.txt.j2",
}

UNIT_LABELS = {"um": "µm", "rad": "rad"}


class ReportService:
    """Renders text reports from templates"""

    def __init__(self, template_dir: Optional[str] = None):
        """
        Initialize the report service.

        Args:
            template_dir: Path to templates directory. Defaults to app/templates.
        """
        if template_dir is None:
            template_dir = str(Path(__file__).parent.parent / "templates")

        self.template_dir = Path(template_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["metric"] = self._format_metric
        logger.debug(f"Report service initialized with directory: {self.template_dir}")

    def _format_metric(self, value: Any, width: int = 12) -> str:
        """Fixed-width number; missing values render as a dash."""
        try:
            number = float(value)
        except (TypeError, ValueError):
            return str(value).rjust(width)
        if math.isnan(number):
            return "-".rjust(width)
        return f"{number:.5f}".rjust(width)

    def render(self, report_type: ReportType, context: Dict[str, Any]) -> str:
        """
        Render a report template.

        Args:
            report_type: Which report to render
            context: Template variables

        Returns:
            Rendered text
        """
        template_name = TEMPLATE_MAP[report_type]
        final_context = {"app_name": settings.APP_NAME, "app_version": settings.APP_VERSION, **context}
        try:
            template = self.env.get_template(template_name)
        except TemplateNotFound as e:
            raise InternalError(f"report template '{template_name}' is missing") from e
        return template.render(**final_context)


# Global report service instance
_report_service: Optional[ReportService] = None


def get_report_service() -> ReportService:
    """
    Get or create the global report service instance.

    Returns:
        ReportService instance
    """
    global _report_service
    if _report_service is None:
        _report_service = ReportService()
    return _report_service


def render_corpus_report(report: CorpusReport) -> str:
    """Per-case table followed by the Mean/Max/Min/Var/Median block."""
    has_mdi = bool(report.cases["l1_mdi"].notna().any())
    return get_report_service().render(
        ReportType.CORPUS,
        {
            "unit": UNIT_LABELS[report.unit],
            "has_mdi": has_mdi,
            "cases": report.cases.to_dict(orient="records"),
            "summary": [
                {"name": name, **row} for name, row in report.summary.to_dict(orient="index").items()
            ],
        },
    )


def render_discontinuity_report(report: DiscontinuityReport, label: str = "") -> str:
    return get_report_service().render(
        ReportType.DISCONTINUITY,
        {"label": label, "report": report, "ratio": report.ratio},
    )

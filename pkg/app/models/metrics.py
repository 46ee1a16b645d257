"""
Evaluation models: masks, error reports and patch-line statistics.
"""

from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.fields import RealImage


class CellMask(BaseModel):
    """Binary cell mask; True marks pixels inside the cell"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mask: np.ndarray

    @field_validator("mask", mode="before")
    @classmethod
    def _validate_mask(cls, value) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 2:
            raise ValueError("mask must be 2D")
        array = np.ascontiguousarray(array > 0)
        array.setflags(write=False)
        return array

    @property
    def pixel_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.mask.shape[0]), int(self.mask.shape[1])


class ErrorReport(BaseModel):
    """Masked comparison of a candidate against a reference"""

    l1: float = Field(..., ge=0)
    eps_mu: float
    n_pixels: int = Field(..., ge=1)
    unit: Literal["um", "rad"] = "um"
    height_range: tuple[float, float] = (0.0, 0.0)


class LineStatistic(BaseModel):
    """Phase step measured across one line"""

    axis: Literal["row", "col"]
    coordinate: int
    mean_step: float
    max_step: float
    mean_jump: float
    max_jump: float


class DiscontinuityReport(BaseModel):
    """Patch-line statistics against the interior baseline"""

    lines: list[LineStatistic]
    baseline_mean_step: float
    baseline_mean_jump: float
    floor_rad: float

    @property
    def line_mean_jump(self) -> float:
        if not self.lines:
            return 0.0
        return float(np.mean([line.mean_jump for line in self.lines]))

    @property
    def ratio(self) -> float:
        """Patch-line over interior jump, both lifted by the noise floor."""
        return (self.line_mean_jump + self.floor_rad) / (
            self.baseline_mean_jump + self.floor_rad
        )


class CorpusCase(BaseModel):
    """One reference/candidate comparison for a corpus report"""

    model_config = ConfigDict(frozen=True)

    case_id: str
    reference: RealImage
    candidate: RealImage
    mask: CellMask
    candidate_mdi: Optional[RealImage] = None


class CorpusReport(BaseModel):
    """Per-case metric table and its summary statistics"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cases: pd.DataFrame
    summary: pd.DataFrame
    unit: Literal["um", "rad"] = "um"

    def combined(self) -> pd.DataFrame:
        """Case rows followed by the Mean/Max/Min/Var/Median rows, as written to CSV."""
        summary = self.summary.reset_index(names="case_id")
        return pd.concat([self.cases, summary], ignore_index=True)[list(self.cases.columns)]

"""
Models passed between demodulation, calibration and integration.
"""

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.fields import RealImage, SpectralWindow

# Tolerance for the mean-free invariant of phase maps
MEAN_TOLERANCE = 1e-9


class GradientPair(BaseModel):
    """Wrapped phase differences for the x and y shear directions, in radians"""

    model_config = ConfigDict(frozen=True)

    gx: RealImage
    gy: RealImage

    @model_validator(mode="after")
    def _validate_pair(self) -> "GradientPair":
        if self.gx.shape != self.gy.shape:
            raise ValueError(f"gx {self.gx.shape} and gy {self.gy.shape} differ")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape

    def is_wrapped(self) -> bool:
        """True when every sample lies in [-pi, pi)."""
        return all(
            bool(np.all((g.data >= -math.pi) & (g.data < math.pi)))
            for g in (self.gx, self.gy)
        )


class LobeLocation(BaseModel):
    """Windows around the x and y gradient lobes of a centered spectrum"""

    model_config = ConfigDict(frozen=True)

    x_lobe: SpectralWindow
    y_lobe: SpectralWindow
    search_region_spec: str = ""


class CutoutRect(BaseModel):
    """Half-open pixel rectangle [row0, row1) x [col0, col1)"""

    model_config = ConfigDict(frozen=True)

    row0: int = Field(..., ge=0)
    row1: int
    col0: int = Field(..., ge=0)
    col1: int

    @model_validator(mode="after")
    def _validate_rect(self) -> "CutoutRect":
        if self.row1 <= self.row0 or self.col1 <= self.col0:
            raise ValueError("cutout rectangle must be non-empty")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.row1 - self.row0, self.col1 - self.col0

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.row0, self.row1), slice(self.col0, self.col1)


class CalibrationFrame(BaseModel):
    """Object-free reference gradients"""

    model_config = ConfigDict(frozen=True)

    gx_ref: RealImage
    gy_ref: RealImage
    source_dims: tuple[int, int]
    lobes: Optional[LobeLocation] = None

    @model_validator(mode="after")
    def _validate_frame(self) -> "CalibrationFrame":
        if self.gx_ref.shape != self.gy_ref.shape:
            raise ValueError("calibration gx_ref and gy_ref differ in size")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx_ref.shape

    def as_gradients(self) -> GradientPair:
        return GradientPair(gx=self.gx_ref, gy=self.gy_ref)


class IntegrationVariant(str, Enum):
    """Phase integration flavours"""

    PLAIN = "plain"
    MDI = "mdi"
    SHIFTED = "shifted"


class IntegrationConfig(BaseModel):
    """Selects and parameterizes the least-squares integrator"""

    model_config = ConfigDict(frozen=True)

    variant: IntegrationVariant = IntegrationVariant.MDI
    shift_delta: float = Field(0.5, ge=0, lt=1, description="Frequency offset in bins")
    iterations: int = Field(1, ge=1)
    combine_mdi: bool = Field(
        False, description="Run the shifted variant on the mirrored extension"
    )

    @model_validator(mode="after")
    def _validate_shift(self) -> "IntegrationConfig":
        if self.variant == IntegrationVariant.SHIFTED and not 0 < self.shift_delta < 1:
            raise ValueError("shift_delta must lie in (0, 1) for the shifted variant")
        return self


class FrequencyGrid(BaseModel):
    """Normalized frequency coordinates of a centered spectrum"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    fx: np.ndarray
    fy: np.ndarray
    shift_delta: float = Field(0.0, ge=0, lt=1)

    @field_validator("fx", "fy", mode="before")
    @classmethod
    def _validate_axis(cls, value) -> np.ndarray:
        array = np.asarray(value, dtype=np.float64)
        if array.ndim != 1 or array.size < 1:
            raise ValueError("frequency axes must be non-empty 1D arrays")
        array.setflags(write=False)
        return array

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.fy.size), int(self.fx.size)


class PhaseMap(BaseModel):
    """Unwrapped, mean-free phase in radians"""

    model_config = ConfigDict(frozen=True)

    phase: RealImage
    provenance: Optional[IntegrationConfig] = None

    @model_validator(mode="after")
    def _validate_mean(self) -> "PhaseMap":
        if abs(float(np.mean(self.phase.data, dtype=np.float64))) > MEAN_TOLERANCE:
            raise ValueError("phase map must be mean-free")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.phase.shape

    @property
    def data(self) -> np.ndarray:
        return self.phase.data


class ReconstructionResult(BaseModel):
    """Everything the single-hologram pipeline produces"""

    model_config = ConfigDict(frozen=True)

    phase: PhaseMap
    amplitude: RealImage
    lobes: Optional[LobeLocation] = None
    gradients: Optional[GradientPair] = Field(
        None, description="Calibrated differences, dropped by low-memory runs"
    )

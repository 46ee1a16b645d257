"""
Core 2D array containers.

Arrays are stored row-major as numpy arrays and frozen after validation.
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


class RealImage(BaseModel):
    """
    2D real samples: hologram intensity, phase map, mask or calibration frame.

    float32 and float64 data keep their precision; integer input is promoted
    to float64.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(..., description="Row-major real samples")

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value: Any) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 2:
            raise ValueError(f"expected a 2D array, got {array.ndim}D")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError(f"dimensions must be at least 1x1, got {array.shape}")
        if np.iscomplexobj(array):
            raise ValueError("RealImage cannot hold complex samples")
        if array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float64)
        if not np.all(np.isfinite(array)):
            raise ValueError("samples must be finite")
        return _freeze(array)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols


class ComplexField(BaseModel):
    """2D complex samples: spectra, demodulated lobes and object waves."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray = Field(..., description="Row-major complex samples")

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value: Any) -> np.ndarray:
        array = np.asarray(value)
        if array.ndim != 2:
            raise ValueError(f"expected a 2D array, got {array.ndim}D")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError(f"dimensions must be at least 1x1, got {array.shape}")
        if array.dtype not in (np.complex64, np.complex128):
            array = array.astype(np.complex128)
        return _freeze(array)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols


class SpectralWindow(BaseModel):
    """Square window of side 2R+1 in a DC-centered spectrum."""

    model_config = ConfigDict(frozen=True)

    center_row: int
    center_col: int
    half_size: int = Field(..., description="Window half size R in pixels")

    def as_list(self) -> list[int]:
        """Sidecar form [r, c, R]."""
        return [self.center_row, self.center_col, self.half_size]

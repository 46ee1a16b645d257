"""
Optical setup and phantom definitions for the forward model.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.fields import RealImage

# Wavelength of the instrument in micrometres
DEFAULT_WAVELENGTH_UM = 0.528

# Default carrier in cycles/pixel, places the x lobe mid-quadrant
DEFAULT_CARRIER = 0.25


class OpticalSetup(BaseModel):
    """Three-beam lateral shear geometry"""

    model_config = ConfigDict(frozen=True)

    wavelength_um: float = Field(DEFAULT_WAVELENGTH_UM, gt=0, description="Wavelength in µm")
    shear_x_px: int = Field(4, description="Lateral shear of the x beam in pixels")
    shear_y_px: int = Field(4, description="Lateral shear of the y beam in pixels")
    carrier_kx: float = Field(DEFAULT_CARRIER, description="x carrier in cycles/pixel")
    carrier_ky: Optional[float] = Field(
        None, description="y carrier in cycles/pixel; None means equal to carrier_kx"
    )
    noise_sigma: float = Field(0.0, ge=0, description="Additive Gaussian detector noise")

    @field_validator("shear_x_px", "shear_y_px")
    @classmethod
    def _validate_shear(cls, value: int) -> int:
        if abs(value) < 1:
            raise ValueError("shear magnitude must be at least 1 pixel")
        return value

    @field_validator("carrier_kx", "carrier_ky")
    @classmethod
    def _validate_carrier(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0 < abs(value) < 0.5:
            raise ValueError("carrier must lie in (0, 0.5) cycles/pixel")
        return value

    def carriers(self) -> tuple[float, float]:
        """Resolve (kx, ky); ky falls back to kx."""
        ky = self.carrier_ky
        if ky is None:
            ky = self.carrier_kx
        return self.carrier_kx, ky

    @property
    def isotropic(self) -> bool:
        return self.shear_x_px == self.shear_y_px


class CellSpec(BaseModel):
    """One cell of a phantom spec document"""

    center: tuple[float, float] = Field(..., description="(row, col) in pixels")
    radius: float = Field(..., gt=0, description="Bump radius in pixels")
    peak_height_um: float = Field(..., ge=0, description="Peak optical height in µm")
    amplitude_dip: float = Field(
        0.0, ge=0, le=1, description="Fractional amplitude loss at the cell center"
    )


class PhantomSpec(BaseModel):
    """JSON phantom document consumed by the synth command"""

    rows: int = Field(..., ge=1)
    cols: int = Field(..., ge=1)
    cells: list[CellSpec] = Field(default_factory=list)
    tilt_x: float = Field(0.0, description="Background phase tilt along x in rad/px")
    tilt_y: float = Field(0.0, description="Background phase tilt along y in rad/px")
    max_height_um: float = Field(0.65, gt=0)


class Phantom(BaseModel):
    """Ground-truth amplitude and phase"""

    model_config = ConfigDict(frozen=True)

    amplitude: RealImage
    phase: RealImage

    @model_validator(mode="after")
    def _validate_pair(self) -> "Phantom":
        if self.amplitude.shape != self.phase.shape:
            raise ValueError(
                f"amplitude {self.amplitude.shape} and phase {self.phase.shape} differ"
            )
        data = self.amplitude.data
        if data.min() < 0 or data.max() > 1:
            raise ValueError("amplitude samples must lie in [0, 1]")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.phase.shape

"""
Adaptive lobe search and gradient demodulation.

The x lobe is searched in the right half-plane (fx > 0) and the y lobe in
the upper half-plane (fy > 0) of the centered spectrum. Both regions drop a
disk around DC, the sectors around the difference-lobe diagonals
±(1, -1) and a band around the perpendicular axis, where the other
gradient lobe sits. Angles are measured in normalized frequency.
"""

import math
from typing import Optional

import numpy as np
import scipy.fft

from app.core.exceptions import LobeNotFoundError, SizeError
from app.core.logging import get_logger
from app.models.fields import ComplexField, RealImage, SpectralWindow
from app.models.reconstruction import GradientPair, LobeLocation
from app.services.fourier import (
    demodulate_window,
    fft2c,
    inverse_band,
    spectrum_center,
    window_band,
)

logger = get_logger(__name__)

# Smallest spectrum the lobe search accepts
MIN_SEARCH_SIZE = 32


def wrap_phase(values: np.ndarray) -> np.ndarray:
    """Wrap radians into [-pi, pi)."""
    wrapped = np.mod(values + math.pi, 2 * math.pi) - math.pi
    # np.mod can round up to exactly 2*pi for tiny negative inputs
    return np.where(wrapped >= math.pi, wrapped - 2 * math.pi, wrapped)


def window_half_size(rows: int, cols: int, window_fraction: float = 0.1) -> int:
    """Lobe window half size R = floor(fraction · min(N, M))."""
    return max(int(math.floor(window_fraction * min(rows, cols))), 1)


def _angles(rows: int, cols: int) -> np.ndarray:
    """Float32 polar angle (degrees) of every bin in normalized frequency."""
    cr, cc = spectrum_center((rows, cols))
    fy = ((np.arange(rows) - cr) / rows).astype(np.float32)[:, None]
    fx = ((np.arange(cols) - cc) / cols).astype(np.float32)[None, :]
    angle = np.arctan2(fy, fx)
    np.degrees(angle, out=angle)
    return angle


def _angular_distance(angle: np.ndarray, direction: float) -> np.ndarray:
    distance = angle - direction
    distance += 180.0
    np.mod(distance, 360.0, out=distance)
    distance -= 180.0
    np.abs(distance, out=distance)
    return distance


def _band(
    angle: np.ndarray, directions: tuple[float, float], half_width: float, inclusive: bool
) -> np.ndarray:
    mask = np.zeros(angle.shape, dtype=bool)
    for direction in directions:
        distance = _angular_distance(angle, direction)
        mask |= distance <= half_width if inclusive else distance < half_width
        del distance
    return mask


def _sector_masks(
    rows: int, cols: int, sector_half_width_deg: float, axis_exclusion_deg: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    angle = _angles(rows, cols)
    diagonal = _band(angle, (-45.0, 135.0), sector_half_width_deg, inclusive=True)
    near_y_axis = _band(angle, (90.0, -90.0), axis_exclusion_deg, inclusive=False)
    near_x_axis = _band(angle, (0.0, 180.0), axis_exclusion_deg, inclusive=False)
    return diagonal, near_y_axis, near_x_axis


def search_regions(
    shape: tuple[int, int],
    dc_exclusion_fraction: float = 0.08,
    sector_half_width_deg: float = 15.0,
    axis_exclusion_deg: float = 15.0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Boolean search masks for the x and y lobes.

    Returns:
        (x_region, y_region), each the size of the spectrum
    """
    rows, cols = shape
    cr, cc = spectrum_center(shape)
    diagonal, near_y_axis, near_x_axis = _sector_masks(
        rows, cols, sector_half_width_deg, axis_exclusion_deg
    )
    dr = (np.arange(rows) - cr).astype(np.float32)[:, None]
    dc = (np.arange(cols) - cc).astype(np.float32)[None, :]
    radius = dc_exclusion_fraction * min(rows, cols)
    keep = dr**2 + dc**2 > radius**2
    keep &= ~diagonal
    del diagonal

    x_region = keep & ~near_y_axis
    x_region &= dc > 0
    y_region = keep & ~near_x_axis
    y_region &= dr > 0
    return x_region, y_region


def _peak(power: np.ndarray, region: np.ndarray, name: str, min_ratio: float) -> tuple[int, int]:
    if not region.any():
        raise SizeError(f"{name} search region is empty for a {power.shape} spectrum")
    masked = np.where(region, power, -1.0)
    # argmax returns the first maximum: smallest row, then smallest column
    flat = int(np.argmax(masked))
    del masked
    row, col = divmod(flat, power.shape[1])
    peak = power[row, col]
    median = float(np.median(power[region]))
    if not peak > min_ratio * median:
        raise LobeNotFoundError(
            f"{name} peak power {peak:.3g} is below {min_ratio:g}x the region median {median:.3g}"
        )
    return row, col


def find_lobes(
    spectrum: ComplexField,
    window_fraction: float = 0.1,
    dc_exclusion_fraction: float = 0.08,
    sector_half_width_deg: float = 15.0,
    axis_exclusion_deg: float = 15.0,
    min_power_ratio: float = 50.0,
) -> LobeLocation:
    """
    Locate the x and y gradient lobes by maximum power.

    Args:
        spectrum: Centered hologram spectrum
        window_fraction: R = floor(window_fraction · min(N, M))
        dc_exclusion_fraction: DC disk radius as a fraction of min(N, M)
        sector_half_width_deg: Half width of the excluded diagonal sectors
        axis_exclusion_deg: Half width of the band around the other lobe's axis
        min_power_ratio: Required peak to median power ratio per region

    Returns:
        LobeLocation with both windows
    """
    rows, cols = spectrum.shape
    if rows < MIN_SEARCH_SIZE or cols < MIN_SEARCH_SIZE:
        raise SizeError(
            f"spectrum {rows}x{cols} smaller than {MIN_SEARCH_SIZE}x{MIN_SEARCH_SIZE}"
        )
    x_region, y_region = search_regions(
        (rows, cols), dc_exclusion_fraction, sector_half_width_deg, axis_exclusion_deg
    )
    power = np.abs(spectrum.data)
    np.square(power, out=power)
    half = window_half_size(rows, cols, window_fraction)
    xr, xc = _peak(power, x_region, "x lobe", min_power_ratio)
    yr, yc = _peak(power, y_region, "y lobe", min_power_ratio)

    description = (
        f"fx>0 / fy>0 half-planes minus DC disk {dc_exclusion_fraction:g}·min(N,M), "
        f"diagonal sectors ±{sector_half_width_deg:g}°, axis bands ±{axis_exclusion_deg:g}°"
    )
    lobes = LobeLocation(
        x_lobe=SpectralWindow(center_row=xr, center_col=xc, half_size=half),
        y_lobe=SpectralWindow(center_row=yr, center_col=yc, half_size=half),
        search_region_spec=description,
    )
    cr, cc = spectrum_center((rows, cols))
    logger.debug(
        f"Lobes at x=({xr - cr}, {xc - cc}) y=({yr - cr}, {yc - cc}) bins, R={half}"
    )
    return lobes


def carrier_frequency(window: SpectralWindow, shape: tuple[int, int]) -> tuple[float, float]:
    """Lobe center as (fy, fx) in cycles/pixel."""
    cr, cc = spectrum_center(shape)
    return (window.center_row - cr) / shape[0], (window.center_col - cc) / shape[1]


def _wrapped_angle(field: np.ndarray) -> np.ndarray:
    return wrap_phase(np.angle(field))


def cutout_phase(
    shape: tuple[int, int],
    window: SpectralWindow,
    origin: tuple[int, int],
    reference: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Separable phase that maps a cutout's demodulated lobe onto its source frame.

    A hologram cut out at origin (row0, col0) sees the carrier advanced by
    2pi·f·origin, and its lobe sits on the cutout's own bin f' rather than
    the source frame's carrier f, leaving a ramp 2pi·(f - f')·x.

    Args:
        shape: Cutout size
        window: Lobe window found in the cutout spectrum
        origin: Top-left pixel of the cutout in its source frame
        reference: Source-frame carrier (f_r, f_c); the cutout bin when None

    Returns:
        (row_phase, col_phase) in radians, to be subtracted
    """
    local = carrier_frequency(window, shape)
    f_r, f_c = reference if reference is not None else local
    row_phase = 2 * math.pi * ((f_r - local[0]) * np.arange(shape[0]) + f_r * origin[0])
    col_phase = 2 * math.pi * ((f_c - local[1]) * np.arange(shape[1]) + f_c * origin[1])
    return row_phase, col_phase


def demodulate_gradients(
    hologram: RealImage,
    lobes: LobeLocation,
    apodize: bool = False,
    spectrum: Optional[np.ndarray] = None,
    origin: Optional[tuple[int, int]] = None,
    reference: Optional[LobeLocation] = None,
    reference_shape: Optional[tuple[int, int]] = None,
) -> GradientPair:
    """
    Wrapped phase differences from the two gradient lobes.

    Each lobe is windowed, moved to DC and transformed back; the pointwise
    argument is the phase difference between a sheared beam and the object.
    For a cutout the result is corrected with cutout_phase so it matches the
    differences of the full frame.

    Args:
        hologram: Hologram intensity
        lobes: Windows of the x and y lobes
        apodize: Hann taper over each window
        spectrum: Centered spectrum of the hologram when already computed
        origin: Top-left pixel of a cutout in its source frame
        reference: Lobes found on the source frame
        reference_shape: Size of the source frame the reference lobes belong to

    Returns:
        GradientPair of the hologram's precision
    """
    if spectrum is None:
        spectrum = fft2c(hologram.data)
    fields = []
    for name in ("x_lobe", "y_lobe"):
        window = getattr(lobes, name)
        phase = None
        if origin is not None:
            carrier = None
            if reference is not None and reference_shape is not None:
                carrier = carrier_frequency(getattr(reference, name), reference_shape)
            phase = cutout_phase(spectrum.shape, window, origin, carrier)
        data = demodulate_window(spectrum, window, _wrapped_angle, apodize, phase)
        fields.append(RealImage(data=data))
    return GradientPair(gx=fields[0], gy=fields[1])


def extract_amplitude(
    hologram: RealImage,
    lobes: LobeLocation,
    apodize: bool = False,
    spectrum: Optional[np.ndarray] = None,
) -> RealImage:
    """
    Magnitude of the central lobe, the summed intensity of the three beams.

    Without a precomputed spectrum only an uncentered transform is taken,
    and it is released before the inverse transform runs.
    """
    cr, cc = spectrum_center(hologram.shape)
    center = SpectralWindow(center_row=cr, center_col=cc, half_size=lobes.x_lobe.half_size)
    if spectrum is not None:
        return RealImage(data=demodulate_window(spectrum, center, np.abs, apodize))
    band, row_index = window_band(
        scipy.fft.fft2(hologram.data, norm="ortho"), center, apodize, centered=False
    )
    return RealImage(data=inverse_band(band, row_index, hologram.shape[0], np.abs))

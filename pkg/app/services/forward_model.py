"""
Three-beam lateral shear forward model.

Builds synthetic holograms I = |E_O + E_x + E_y|^2 from known phantoms. The
sheared beams carry the carriers and replicate edge samples instead of
wrapping around.
"""

import math
from typing import Optional, Sequence

import numpy as np

from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.fields import ComplexField, RealImage
from app.models.optics import CellSpec, OpticalSetup, Phantom, PhantomSpec
from app.models.patching import PatchLayout

logger = get_logger(__name__)


def height_to_phase(height_um: float, wavelength_um: float) -> float:
    """Optical height in µm to phase in radians."""
    return height_um * 2 * math.pi / wavelength_um


def make_object_wave(phantom: Phantom) -> ComplexField:
    """Object wave A_O·exp(j·phi_O)."""
    if phantom.amplitude.shape != phantom.phase.shape:
        raise ParameterError("phantom amplitude and phase differ in size")
    wave = phantom.amplitude.data * np.exp(1j * phantom.phase.data)
    return ComplexField(data=wave)


def shift_edge(wave: np.ndarray, shift: int, axis: int) -> np.ndarray:
    """Samples at index - shift along axis, clamped to the edge."""
    n = wave.shape[axis]
    index = np.clip(np.arange(n) - shift, 0, n - 1)
    return np.take(wave, index, axis=axis)


def shear_differences(
    phase: np.ndarray, shear_x_px: int, shear_y_px: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    The phase differences the sheared beams encode.

    Returns:
        (phi(x - sx) - phi(x), phi(y - sy) - phi(y)) with edge-clamped samples
    """
    return (
        shift_edge(phase, shear_x_px, axis=1) - phase,
        shift_edge(phase, shear_y_px, axis=0) - phase,
    )


def synthesize_hologram(
    phantom: Phantom,
    setup: OpticalSetup,
    rng: Optional[np.random.Generator] = None,
) -> RealImage:
    """
    Render the interference pattern of the object and its two sheared copies.

    Args:
        phantom: Ground-truth amplitude and phase
        setup: Shears, carriers and optional detector noise
        rng: Noise source, only used when setup.noise_sigma > 0

    Returns:
        Nonnegative hologram intensity
    """
    rows, cols = phantom.shape
    kx, ky = setup.carriers()
    for name, k in (("carrier_kx", kx), ("carrier_ky", ky)):
        if not 0 < abs(k) < 0.5:
            raise ParameterError(f"{name}={k} outside (0, 0.5) cycles/pixel")
    # both sheared copies must fit along either axis
    limit = 2 * max(abs(setup.shear_x_px), abs(setup.shear_y_px))
    if rows < limit or cols < limit:
        raise ParameterError(
            f"phantom {rows}x{cols} too small for shears "
            f"({setup.shear_x_px}, {setup.shear_y_px})"
        )

    e_o = make_object_wave(phantom).data
    y, x = np.mgrid[0:rows, 0:cols]
    e_x = shift_edge(e_o, setup.shear_x_px, axis=1) * np.exp(2j * math.pi * kx * x)
    e_y = shift_edge(e_o, setup.shear_y_px, axis=0) * np.exp(2j * math.pi * ky * y)
    intensity = np.abs(e_o + e_x + e_y) ** 2

    if setup.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        intensity = np.clip(
            intensity + rng.normal(0.0, setup.noise_sigma, intensity.shape), 0.0, None
        )

    return RealImage(data=intensity)


def _raised_cosine(
    rows: int, cols: int, center: Sequence[float], radius: float
) -> np.ndarray:
    y, x = np.mgrid[0:rows, 0:cols]
    r = np.hypot(y - center[0], x - center[1])
    return np.where(r < radius, 0.5 * (1 + np.cos(np.pi * r / radius)), 0.0)


def make_cell_phantom(
    rows: int,
    cols: int,
    cells: Sequence[CellSpec],
    wavelength_um: float = 0.528,
    tilt_x: float = 0.0,
    tilt_y: float = 0.0,
    max_height_um: float = 0.65,
) -> Phantom:
    """
    Superpose smooth raised-cosine phase bumps, one per cell.

    Args:
        rows, cols: Phantom size in pixels
        cells: Cell centers, radii and peak optical heights
        wavelength_um: Converts heights to phase
        tilt_x, tilt_y: Background phase tilt in rad/px
        max_height_um: Upper bound on any cell's peak height

    Returns:
        Phantom with unit amplitude except where cells dip it
    """
    phase = np.zeros((rows, cols))
    amplitude = np.ones((rows, cols))
    for index, cell in enumerate(cells):
        r, c = cell.center
        if not (0 <= r < rows and 0 <= c < cols):
            raise ParameterError(f"cell {index} center {cell.center} outside {rows}x{cols}")
        if cell.peak_height_um > max_height_um:
            raise ParameterError(
                f"cell {index} height {cell.peak_height_um} µm exceeds {max_height_um} µm"
            )
        profile = _raised_cosine(rows, cols, cell.center, cell.radius)
        phase += height_to_phase(cell.peak_height_um, wavelength_um) * profile
        amplitude *= 1.0 - cell.amplitude_dip * profile

    if tilt_x or tilt_y:
        y, x = np.mgrid[0:rows, 0:cols]
        phase += tilt_x * x + tilt_y * y

    logger.debug(f"Phantom {rows}x{cols} with {len(cells)} cells")
    return Phantom(amplitude=RealImage(data=amplitude), phase=RealImage(data=phase))


def phantom_from_spec(spec: PhantomSpec, wavelength_um: float) -> Phantom:
    """Build the phantom described by a JSON spec document."""
    return make_cell_phantom(
        spec.rows,
        spec.cols,
        spec.cells,
        wavelength_um=wavelength_um,
        tilt_x=spec.tilt_x,
        tilt_y=spec.tilt_y,
        max_height_um=spec.max_height_um,
    )


def cell_mask(rows: int, cols: int, cells: Sequence[CellSpec]) -> np.ndarray:
    """Union of the cell disks."""
    y, x = np.mgrid[0:rows, 0:cols]
    mask = np.zeros((rows, cols), dtype=bool)
    for cell in cells:
        mask |= np.hypot(y - cell.center[0], x - cell.center[1]) < cell.radius
    return mask


def synthesize_tiles(
    phantom: Phantom,
    setup: OpticalSetup,
    layout: PatchLayout,
    tile_tilts: Optional[Sequence[Sequence[tuple[float, float]]]] = None,
) -> list[list[RealImage]]:
    """
    Render the single shots a slide scan would record over one phantom.

    Each tile is the crop of a full-frame hologram whose object carries the
    tile's own static wavefront tilt (rad/px along x and y), the per-shot
    perturbation that makes patch lines visible.
    """
    if phantom.shape != layout.mosaic_shape:
        raise ParameterError(
            f"phantom {phantom.shape} does not cover mosaic {layout.mosaic_shape}"
        )
    rows, cols = phantom.shape
    y, x = np.mgrid[0:rows, 0:cols]
    tiles: list[list[RealImage]] = []
    for i in range(layout.grid_rows):
        row: list[RealImage] = []
        for j in range(layout.grid_cols):
            tx, ty = tile_tilts[i][j] if tile_tilts is not None else (0.0, 0.0)
            if tx or ty:
                tilted = Phantom(
                    amplitude=phantom.amplitude,
                    phase=RealImage(data=phantom.phase.data + tx * x + ty * y),
                )
            else:
                tilted = phantom
            frame = synthesize_hologram(tilted, setup)
            rs, cs = layout.tile_slices(i, j)
            row.append(RealImage(data=frame.data[rs, cs]))
        tiles.append(row)
    return tiles

"""
Spectral least-squares phase integration.

W = F^-1{ (conj(S_x)·F{gx} + conj(S_y)·F{gy}) / (|S_x|^2 + |S_y|^2) }

S = j·tau is the transfer function of the measured difference: tau = 2pi f
for derivative fields, tau = 2·sin(pi f s)/s for differences over s pixels
centered on the sample. Bins where every transfer function vanishes carry
no information and are set to zero.

The plain grid puts DC at zero frequency. A shifted grid offsets every
frequency by delta bins; the transforms are then evaluated at the shifted
frequencies by modulating the inputs with a ramp and the result is
demodulated with the conjugate ramp. Mirrored derivative integration (MDI)
solves on the even extension of W, which is a cosine transform of W and a
sine transform of each field along its own axis.

Each field is transformed, weighted and accumulated on its own, so a solve
holds one spectrum at a time next to the result.
"""

import math
from functools import partial
from typing import Callable, Optional

import numpy as np
import scipy.fft
from scipy import ndimage

from app.core.exceptions import InternalError, ParameterError
from app.core.logging import get_logger
from app.models.fields import RealImage
from app.models.optics import OpticalSetup
from app.models.reconstruction import (
    FrequencyGrid,
    GradientPair,
    IntegrationConfig,
    IntegrationVariant,
    PhaseMap,
)
from app.services.forward_model import shear_differences
from app.services.fourier import spectrum_center

logger = get_logger(__name__)

GridBuilder = Callable[[int, int], FrequencyGrid]
Shear = Optional[tuple[float, float]]
Pair = tuple[np.ndarray, np.ndarray]

# Spectral weights are applied at most this many rows at a time, and in
# at least ROW_SPLITS blocks
ROW_BLOCK = 256
ROW_SPLITS = 32

# Denominators below this fraction of the largest one count as vanishing
NULL_TOLERANCE = 1e-12


def build_frequency_grid(rows: int, cols: int, shift_delta: float = 0.0) -> FrequencyGrid:
    """Normalized frequencies (k - n//2 + delta) / n per axis."""
    cr, cc = spectrum_center((rows, cols))
    fx = (np.arange(cols) - cc + shift_delta) / cols
    fy = (np.arange(rows) - cr + shift_delta) / rows
    return FrequencyGrid(fx=fx, fy=fy, shift_delta=shift_delta)


def difference_symbol(freq: np.ndarray, shear_px: Optional[float] = None) -> np.ndarray:
    """
    Real factor tau of the transfer function j·tau of a difference operator.

    Args:
        freq: Normalized frequencies in cycles/pixel
        shear_px: Difference distance; None for a true derivative

    Returns:
        2pi·f, or 2·sin(pi·f·s)/s for a centered difference over s pixels
    """
    if shear_px is None:
        return 2 * math.pi * freq
    return 2 * np.sin(math.pi * freq * shear_px) / shear_px


def _real_dtype(values: np.ndarray) -> type:
    return np.float32 if values.dtype == np.float32 else np.float64


def _ramps(grid: FrequencyGrid, sign: float, dtype) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = grid.shape
    angle = sign * 2 * math.pi * grid.shift_delta
    row = np.exp(1j * angle * np.arange(rows) / rows).astype(dtype)[:, None]
    col = np.exp(1j * angle * np.arange(cols) / cols).astype(dtype)[None, :]
    return row, col


def _forward(values: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Uncentered spectrum of values at the grid's frequencies."""
    buffer = values.astype(np.result_type(values.dtype, np.complex64))
    if grid.shift_delta > 0:
        row, col = _ramps(grid, -1.0, buffer.dtype)
        buffer *= row
        buffer *= col
    return scipy.fft.fft2(buffer, norm="ortho", overwrite_x=True)


def _inverse_real(spectrum: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    field = scipy.fft.ifft2(spectrum, norm="ortho", overwrite_x=True)
    if grid.shift_delta > 0:
        row, col = _ramps(grid, 1.0, field.dtype)
        field *= row
        field *= col
    return field.real


def _apply_gain(
    coefficients: np.ndarray,
    axis: int,
    tx: np.ndarray,
    ty: np.ndarray,
    keep_x: np.ndarray,
    keep_y: np.ndarray,
) -> None:
    """coefficients *= -tau / (tx^2 + ty^2) in place, zero where that vanishes."""
    peak = float(np.max(tx**2)) + float(np.max(ty**2))
    rows = coefficients.shape[0]
    step = max(1, min(ROW_BLOCK, -(-rows // ROW_SPLITS)))
    for start in range(0, rows, step):
        block = slice(start, start + step)
        denominator = tx**2 + ty[block] ** 2
        null = denominator <= NULL_TOLERANCE * peak
        tau = tx if axis == 1 else ty[block]
        gain = -tau / np.where(null, 1.0, denominator)
        gain[null] = 0.0
        gain *= keep_x[None, :]
        gain *= keep_y[block, None]
        coefficients[block] *= gain


def _check_denominator(grid: FrequencyGrid, shear: Shear) -> None:
    # shear nulls at f = k/s are expected; derivative symbols vanish only at DC
    if shear is not None:
        return
    vanishing = int(np.count_nonzero(grid.fx == 0)) * int(np.count_nonzero(grid.fy == 0))
    expected = 0 if grid.shift_delta > 0 else 1
    if vanishing != expected:
        raise InternalError(f"{vanishing} vanishing denominator bins")


def _split(shear: Shear) -> tuple[Optional[float], Optional[float]]:
    return shear if shear is not None else (None, None)


def _solve_periodic(gx: np.ndarray, gy: np.ndarray, grid: FrequencyGrid, shear: Shear) -> np.ndarray:
    sx, sy = _split(shear)
    fx = scipy.fft.ifftshift(grid.fx)
    fy = scipy.fft.ifftshift(grid.fy)
    tx = difference_symbol(fx, sx)[None, :]
    ty = difference_symbol(fy, sy)[:, None]
    keep_x = np.ones(fx.size, dtype=bool)
    keep_y = np.ones(fy.size, dtype=bool)
    if grid.shift_delta == 0:
        # Nyquist bins have no conjugate partner; dropping them keeps W real and mirror-exact
        keep_x, keep_y = fx != -0.5, fy != -0.5

    w = np.zeros(grid.shape, dtype=_real_dtype(gx))
    for values, axis in ((gx, 1), (gy, 0)):
        spectrum = _forward(values, grid)
        _apply_gain(spectrum, axis, tx, ty, keep_x, keep_y)
        spectrum *= 1j
        w += _inverse_real(spectrum, grid)
        del spectrum
    return w


def _periodic_gradient(w: np.ndarray, grid: FrequencyGrid) -> Pair:
    spectrum = _forward(w, grid)
    fx = scipy.fft.ifftshift(grid.fx)[None, :]
    fy = scipy.fft.ifftshift(grid.fy)[:, None]
    dx = _inverse_real(spectrum * (2j * math.pi * fx), grid)
    dy = _inverse_real(spectrum * (2j * math.pi * fy), grid)
    return dx, dy


def _mirrored_symbols(shape: tuple[int, int], shear: Shear) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = shape
    sx, sy = _split(shear)
    tx = difference_symbol(np.arange(cols) / (2 * cols), sx)[None, :]
    ty = difference_symbol(np.arange(rows) / (2 * rows), sy)[:, None]
    return tx, ty


def _along(axis: int, index: slice) -> tuple[slice, slice]:
    return (slice(None), index) if axis == 1 else (index, slice(None))


def _mirrored_coefficients(values: np.ndarray, axis: int) -> np.ndarray:
    """Sine transform along axis, cosine across it; index k holds frequency k."""
    sine = scipy.fft.dst(values, type=2, axis=axis)
    sine = scipy.fft.dct(sine, type=2, axis=1 - axis, overwrite_x=True)
    aligned = np.zeros_like(sine)
    aligned[_along(axis, slice(1, None))] = sine[_along(axis, slice(None, -1))]
    return aligned


def _solve_mirrored(gx: np.ndarray, gy: np.ndarray, shear: Shear) -> np.ndarray:
    tx, ty = _mirrored_symbols(gx.shape, shear)
    keep_x = np.ones(tx.size, dtype=bool)
    keep_y = np.ones(ty.size, dtype=bool)

    w = np.zeros(gx.shape, dtype=_real_dtype(gx))
    for values, axis in ((gx, 1), (gy, 0)):
        coefficients = _mirrored_coefficients(values, axis)
        _apply_gain(coefficients, axis, tx, ty, keep_x, keep_y)
        w += scipy.fft.idctn(coefficients, type=2, overwrite_x=True)
        del coefficients
    return w


def _mirrored_gradient(w: np.ndarray) -> Pair:
    tx, ty = _mirrored_symbols(w.shape, None)
    cosine = scipy.fft.dctn(w, type=2)
    fields = []
    for tau, axis in ((tx, 1), (ty, 0)):
        sine = np.zeros_like(cosine)
        sine[_along(axis, slice(None, -1))] = (-tau * cosine)[_along(axis, slice(1, None))]
        sine = scipy.fft.idct(sine, type=2, axis=1 - axis, overwrite_x=True)
        fields.append(scipy.fft.idst(sine, type=2, axis=axis, overwrite_x=True))
    return fields[0], fields[1]


def _sheared_model(w: np.ndarray, shear: tuple[float, float]) -> Pair:
    """Centered differences of w as orient_gradients presents measured ones."""
    dx, dy = shear_differences(w, int(shear[0]), int(shear[1]))
    fields = []
    for diff, s, axis in ((dx, shear[0], 1), (dy, shear[1], 0)):
        centered = register_shear(diff, int(s), axis)
        centered /= -s
        fields.append(centered)
    return fields[0], fields[1]


def _iterate(
    solve: Callable[[np.ndarray, np.ndarray], np.ndarray],
    residual: Callable[[np.ndarray], Pair],
    gx: np.ndarray,
    gy: np.ndarray,
    iterations: int,
) -> np.ndarray:
    w = solve(gx, gy)
    for _ in range(iterations - 1):
        dx, dy = residual(w)
        w += solve(gx - dx, gy - dy)
    return w


def _check_inputs(grads: GradientPair, iterations: int) -> None:
    for name, g in (("gx", grads.gx), ("gy", grads.gy)):
        if not np.all(np.isfinite(g.data)):
            raise ParameterError(f"{name} contains non-finite samples")
    if iterations < 1:
        raise ParameterError("iterations must be positive")


def _mean_free(w: np.ndarray) -> np.ndarray:
    out = np.asarray(w, dtype=np.float64)
    out -= out.mean()
    return out


def integrate_ils(
    grads: GradientPair,
    grid: FrequencyGrid,
    iterations: int = 1,
    provenance: Optional[IntegrationConfig] = None,
    shear: Shear = None,
) -> PhaseMap:
    """
    Least-squares phase from a gradient pair on the given frequency grid.

    Args:
        grads: Derivative or centered difference fields along x (columns) and y (rows)
        grid: Frequency coordinates, possibly shifted
        iterations: Re-solves applied to the residual gradients
        shear: (sx, sy) when the fields are centered differences over that many pixels

    Returns:
        Mean-free PhaseMap
    """
    _check_inputs(grads, iterations)
    if grid.shape != grads.shape:
        raise ParameterError(f"frequency grid {grid.shape} does not match gradients {grads.shape}")
    _check_denominator(grid, shear)

    if shear is not None:
        residual = partial(_sheared_model, shear=shear)
    else:
        residual = partial(_periodic_gradient, grid=grid)
    solve = partial(_solve_periodic, grid=grid, shear=shear)
    w = _iterate(solve, residual, grads.gx.data, grads.gy.data, iterations)
    provenance = provenance or IntegrationConfig(
        variant=IntegrationVariant.SHIFTED if grid.shift_delta > 0 else IntegrationVariant.PLAIN,
        shift_delta=grid.shift_delta if grid.shift_delta > 0 else 0.5,
        iterations=iterations,
    )
    return PhaseMap(phase=RealImage(data=_mean_free(w)), provenance=provenance)


def mirror_extend(grads: GradientPair) -> GradientPair:
    """
    Extend gradients to 2N x 2M so they belong to the even extension of W.

    gx is odd in x and even in y, gy even in x and odd in y.
    """
    gx, gy = grads.gx.data, grads.gy.data
    ext_x = np.block([[gx, -gx[:, ::-1]], [gx[::-1, :], -gx[::-1, ::-1]]])
    ext_y = np.block([[gy, gy[:, ::-1]], [-gy[::-1, :], -gy[::-1, ::-1]]])
    return GradientPair(gx=RealImage(data=ext_x), gy=RealImage(data=ext_y))


def integrate_mdi(
    grads: GradientPair,
    grid_builder: GridBuilder = build_frequency_grid,
    iterations: int = 1,
    provenance: Optional[IntegrationConfig] = None,
    shear: Shear = None,
) -> PhaseMap:
    """
    Integrate on the mirrored 2N x 2M extension and keep the original quadrant.

    The unshifted extension is solved with cosine and sine transforms of the
    original size. A shifted grid builder forces the explicit extension.
    """
    _check_inputs(grads, iterations)
    rows, cols = grads.shape
    grid = grid_builder(2 * rows, 2 * cols)
    if shear is not None:
        residual = partial(_sheared_model, shear=shear)
    else:
        residual = _mirrored_gradient

    if grid.shift_delta > 0:
        _check_denominator(grid, shear)
        extended = mirror_extend(grads)
        if shear is None:
            residual = partial(_periodic_gradient, grid=grid)
        solve = partial(_solve_periodic, grid=grid, shear=shear)
        w = _iterate(solve, residual, extended.gx.data, extended.gy.data, iterations)[:rows, :cols]
    else:
        solve = partial(_solve_mirrored, shear=shear)
        w = _iterate(solve, residual, grads.gx.data, grads.gy.data, iterations)
    provenance = provenance or IntegrationConfig(variant=IntegrationVariant.MDI, iterations=iterations)
    return PhaseMap(phase=RealImage(data=_mean_free(w)), provenance=provenance)


def integrate_shifted(
    grads: GradientPair,
    shift_delta: float = 0.5,
    iterations: int = 1,
    provenance: Optional[IntegrationConfig] = None,
    shear: Shear = None,
) -> PhaseMap:
    """Integrate with every frequency offset by shift_delta bins."""
    if not 0 < shift_delta < 1:
        raise ParameterError(f"shift_delta must lie in (0, 1), got {shift_delta}")
    rows, cols = grads.shape
    provenance = provenance or IntegrationConfig(
        variant=IntegrationVariant.SHIFTED, shift_delta=shift_delta, iterations=iterations
    )
    return integrate_ils(
        grads, build_frequency_grid(rows, cols, shift_delta), iterations, provenance, shear
    )


def integrate(grads: GradientPair, cfg: IntegrationConfig, shear: Shear = None) -> PhaseMap:
    """Dispatch to the integrator selected by the config."""
    logger.debug(f"Integrating {grads.shape} with {cfg.variant.value}")
    if cfg.variant == IntegrationVariant.PLAIN:
        rows, cols = grads.shape
        return integrate_ils(grads, build_frequency_grid(rows, cols), cfg.iterations, cfg, shear)
    if cfg.variant == IntegrationVariant.MDI:
        return integrate_mdi(grads, build_frequency_grid, cfg.iterations, cfg, shear)
    if cfg.combine_mdi:
        builder = partial(build_frequency_grid, shift_delta=cfg.shift_delta)
        return integrate_mdi(grads, builder, cfg.iterations, cfg, shear)
    return integrate_shifted(grads, cfg.shift_delta, cfg.iterations, cfg, shear)


def register_shear(values: np.ndarray, shear_px: int, axis: int) -> np.ndarray:
    """
    Move a difference over shear_px pixels by half the shear along axis.

    A difference over s pixels is centered s/2 behind the sample it is
    stored at. Even shears move whole samples and replicate the edge, odd
    shears go through a cubic spline.

    Returns:
        New array of the input's dtype
    """
    n = values.shape[axis]
    if shear_px % 2 == 0:
        index = np.clip(np.arange(n) + shear_px // 2, 0, n - 1)
        return np.take(values, index, axis=axis)
    shift = [0.0, 0.0]
    shift[axis] = -shear_px / 2.0
    coefficients = ndimage.spline_filter(values, order=3, mode="nearest", output=values.dtype)
    return ndimage.shift(
        coefficients, shift, order=3, mode="nearest", prefilter=False, output=values.dtype
    )


def orient_gradients(grads: GradientPair, setup: OpticalSetup) -> GradientPair:
    """
    Turn demodulated differences phi(x - s) - phi(x) into centered differences.

    Each field is negated and registered by half its shear along its own
    axis, giving phi(x + s/2) - phi(x - s/2) at x. With unequal shears each
    field is also divided by its own shear, and scale_to_phase is then
    called with unit shear.
    """
    fields = []
    for g, shear, axis in ((grads.gx, setup.shear_x_px, 1), (grads.gy, setup.shear_y_px, 0)):
        centered = register_shear(g.data, shear, axis)
        np.negative(centered, out=centered)
        if not setup.isotropic:
            centered /= shear
        fields.append(RealImage(data=centered))
    return GradientPair(gx=fields[0], gy=fields[1])


def shear_of(setup: OpticalSetup) -> tuple[float, float]:
    return float(setup.shear_x_px), float(setup.shear_y_px)


def scale_to_phase(raw: PhaseMap, shear_px: int) -> PhaseMap:
    """Divide an integrated difference field by the shear."""
    if shear_px == 0:
        raise ParameterError("shear must be non-zero")
    if shear_px == 1:
        return raw
    return PhaseMap(phase=RealImage(data=raw.data / shear_px), provenance=raw.provenance)


def phase_from_differences(
    grads: GradientPair, setup: OpticalSetup, cfg: IntegrationConfig
) -> PhaseMap:
    """Orient, integrate and scale a calibrated difference pair."""
    centered = orient_gradients(grads, setup)
    raw = integrate(centered, cfg, shear=shear_of(setup))
    del centered
    return scale_to_phase(raw, setup.shear_x_px if setup.isotropic else 1)

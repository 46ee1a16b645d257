"""
Centered, unitary 2D Fourier transforms and spectral window helpers.

Spectra are stored with DC at (rows // 2, cols // 2). Both directions use
the orthonormal scaling, so Parseval holds without extra factors. Thread
count is taken from the active ``scipy.fft.set_workers`` context.
"""

from typing import Callable, Optional, Union

import numpy as np
import scipy.fft

from app.core.exceptions import ParameterError, SizeError
from app.models.fields import ComplexField, RealImage, SpectralWindow

# Largest sample count a single transform accepts
MAX_SAMPLES = 2**34

# Column blocks of the sparse inverse transform in demodulate_window
COLUMN_SPLITS = 8


def _check_size(shape: tuple[int, ...]) -> None:
    if int(np.prod(shape, dtype=np.int64)) > MAX_SAMPLES:
        raise SizeError(f"transform of {shape} exceeds {MAX_SAMPLES} samples")


def fft2c(array: np.ndarray) -> np.ndarray:
    """Centered unitary forward transform of a 2D array."""
    _check_size(array.shape)
    return scipy.fft.fftshift(scipy.fft.fft2(array, norm="ortho"))


def ifft2c(array: np.ndarray) -> np.ndarray:
    """Inverse of fft2c."""
    _check_size(array.shape)
    return scipy.fft.ifft2(scipy.fft.ifftshift(array), norm="ortho")


def spectrum_center(shape: tuple[int, int]) -> tuple[int, int]:
    """Index of the DC sample in a centered spectrum."""
    return shape[0] // 2, shape[1] // 2


def fft2_forward(img: Union[RealImage, ComplexField]) -> ComplexField:
    """Centered unitary 2D DFT of an image or field."""
    return ComplexField(data=fft2c(img.data))


def fft2_inverse(field: ComplexField) -> ComplexField:
    """Exact inverse of fft2_forward."""
    return ComplexField(data=ifft2c(field.data))


def _window_bounds(
    shape: tuple[int, int], win: SpectralWindow
) -> tuple[int, int, int, int]:
    """Window rows/cols intersected with the field bounds, half-open."""
    if win.half_size <= 0:
        raise ParameterError(f"window half size must be positive, got {win.half_size}")
    rows, cols = shape
    r0 = max(win.center_row - win.half_size, 0)
    r1 = min(win.center_row + win.half_size + 1, rows)
    c0 = max(win.center_col - win.half_size, 0)
    c1 = min(win.center_col + win.half_size + 1, cols)
    return r0, r1, c0, c1


def extract_window(field: ComplexField, win: SpectralWindow) -> ComplexField:
    """
    Copy a (2R+1)x(2R+1) window out of a field.

    Samples of the window that fall outside the field are zero.
    """
    r0, r1, c0, c1 = _window_bounds(field.shape, win)
    size = 2 * win.half_size + 1
    out = np.zeros((size, size), dtype=field.data.dtype)
    top = r0 - (win.center_row - win.half_size)
    left = c0 - (win.center_col - win.half_size)
    if r1 > r0 and c1 > c0:
        out[top : top + (r1 - r0), left : left + (c1 - c0)] = field.data[r0:r1, c0:c1]
    return ComplexField(data=out)

def _recentered_block(
    spectrum: np.ndarray, win: SpectralWindow, taper: bool, centered: bool = True
) -> Optional[tuple[np.ndarray, tuple[int, int]]]:
    """
    Windowed samples and the top-left bin they occupy once moved to DC.

    An uncentered spectrum (DC at index 0) is read through wrapped indices.
    Returns None when nothing of the window lands inside the field.
    """
    rows, cols = spectrum.shape
    cr, cc = spectrum_center((rows, cols))
    r0, r1, c0, c1 = _window_bounds((rows, cols), win)
    dr, dc = cr - win.center_row, cc - win.center_col

    # Destination rectangle, clipped to the field
    d_r0, d_r1 = max(r0 + dr, 0), min(r1 + dr, rows)
    d_c0, d_c1 = max(c0 + dc, 0), min(c1 + dc, cols)
    if d_r1 <= d_r0 or d_c1 <= d_c0:
        return None

    if centered:
        block = spectrum[d_r0 - dr : d_r1 - dr, d_c0 - dc : d_c1 - dc]
    else:
        src_rows = (np.arange(d_r0 - dr, d_r1 - dr) - cr) % rows
        src_cols = (np.arange(d_c0 - dc, d_c1 - dc) - cc) % cols
        block = spectrum[np.ix_(src_rows, src_cols)]
    if taper:
        size = 2 * win.half_size + 1
        profile = np.hanning(size + 2)[1:-1]
        row_taper = profile[d_r0 - dr - (win.center_row - win.half_size) :][: block.shape[0]]
        col_taper = profile[d_c0 - dc - (win.center_col - win.half_size) :][: block.shape[1]]
        block = block * np.outer(row_taper, col_taper).astype(block.real.dtype)
    return block, (d_r0, d_c0)


def recenter_array(
    spectrum: np.ndarray, win: SpectralWindow, taper: bool = False
) -> np.ndarray:
    """
    Translate the windowed content of a centered spectrum to DC.

    Everything outside the window is dropped. With taper=True a separable
    Hann profile is applied over the window first.
    """
    out = np.zeros_like(spectrum)
    placed = _recentered_block(spectrum, win, taper)
    if placed is not None:
        block, (d_r0, d_c0) = placed
        out[d_r0 : d_r0 + block.shape[0], d_c0 : d_c0 + block.shape[1]] = block
    return out


def recenter_lobe(field: ComplexField, win: SpectralWindow) -> ComplexField:
    """Move a windowed lobe to the spectrum center, zeroing all other samples."""
    return ComplexField(data=recenter_array(field.data, win))


def window_band(
    spectrum: np.ndarray,
    win: SpectralWindow,
    taper: bool = False,
    centered: bool = True,
    col_phase: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    First half of the inverse transform of a window moved to DC.

    Only the rows holding the window are transformed along x.

    Args:
        spectrum: Centered spectrum, or uncentered (DC at index 0) when centered=False
        win: Window to move to DC
        taper: Apply a Hann profile over the window
        col_phase: Radians subtracted from every column of the result

    Returns:
        (band, row_index): x-transformed rows and their uncentered row indices
    """
    rows, cols = spectrum.shape
    _check_size((rows, cols))
    placed = _recentered_block(spectrum, win, taper, centered)
    if placed is None:
        return np.zeros((1, cols), dtype=spectrum.dtype), np.zeros(1, dtype=np.intp)

    block, (d_r0, d_c0) = placed
    cr, cc = spectrum_center((rows, cols))
    row_index = (np.arange(d_r0, d_r0 + block.shape[0]) - cr) % rows
    col_index = (np.arange(d_c0, d_c0 + block.shape[1]) - cc) % cols
    band = np.zeros((block.shape[0], cols), dtype=spectrum.dtype)
    band[:, col_index] = block
    band = scipy.fft.ifft(band, axis=1, norm="ortho", overwrite_x=True)
    if col_phase is not None:
        band *= np.exp(-1j * col_phase).astype(band.dtype)[None, :]
    return band, row_index


def inverse_band(
    band: np.ndarray,
    row_index: np.ndarray,
    rows: int,
    reduce: Callable[[np.ndarray], np.ndarray],
    row_phase: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Finish the inverse transform of window_band in column blocks.

    Each of the COLUMN_SPLITS blocks is transformed along y and reduced to
    real values before the next one starts. row_phase radians are
    subtracted from every row first.

    Returns:
        Real array of the band's precision
    """
    cols = band.shape[1]
    out = np.empty((rows, cols), dtype=np.finfo(band.dtype).dtype)
    row_factor = None
    if row_phase is not None:
        row_factor = np.exp(-1j * row_phase).astype(band.dtype)[:, None]
    step = max(1, -(-cols // COLUMN_SPLITS))
    for start in range(0, cols, step):
        stop = min(start + step, cols)
        column = np.zeros((rows, stop - start), dtype=band.dtype)
        column[row_index] = band[:, start:stop]
        column = scipy.fft.ifft(column, axis=0, norm="ortho", overwrite_x=True)
        if row_factor is not None:
            column *= row_factor
        out[:, start:stop] = reduce(column)
    return out


def demodulate_window(
    spectrum: np.ndarray,
    win: SpectralWindow,
    reduce: Callable[[np.ndarray], np.ndarray],
    taper: bool = False,
    phase: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """
    reduce(ifft2c(recenter_array(spectrum, win, taper))) without building the full field.

    phase = (row_phase, col_phase) is a separable phase in radians removed
    from the field before it is reduced.
    """
    row_phase, col_phase = phase if phase is not None else (None, None)
    band, row_index = window_band(spectrum, win, taper, col_phase=col_phase)
    return inverse_band(band, row_index, spectrum.shape[0], reduce, row_phase)

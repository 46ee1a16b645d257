"""
Optical height, masked error metrics, patch-line statistics and corpus reports.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Sequence, Union

import numpy as np
import pandas as pd
from scipy import ndimage

from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.fields import RealImage
from app.models.metrics import (
    CellMask,
    CorpusCase,
    CorpusReport,
    DiscontinuityReport,
    ErrorReport,
    LineStatistic,
)
from app.models.optics import DEFAULT_WAVELENGTH_UM
from app.models.patching import PatchLayout
from app.models.reconstruction import PhaseMap

logger = get_logger(__name__)

Image = Union[PhaseMap, RealImage]
Axis = Literal["row", "col"]

SUMMARY_ROWS = ("Mean", "Max", "Min", "Var", "Median")
REPORT_COLUMNS = [
    "case_id",
    "n_pixels",
    "l1",
    "eps_mu",
    "l1_mdi",
    "eps_mu_mdi",
    "height_min",
    "height_max",
]


def optical_height(phase: Image, wavelength_um: float = DEFAULT_WAVELENGTH_UM) -> RealImage:
    """h = phi · lambda / (2 pi), in micrometres."""
    if not wavelength_um > 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength_um}")
    return RealImage(data=phase.data * (wavelength_um / (2 * math.pi)))


def _masked_pair(p0: RealImage, pc: RealImage, mask: CellMask) -> tuple[np.ndarray, np.ndarray]:
    if p0.shape != pc.shape or p0.shape != mask.shape:
        raise ParameterError(
            f"reference {p0.shape}, candidate {pc.shape} and mask {mask.shape} must match"
        )
    if mask.pixel_count == 0:
        raise ParameterError("mask is empty")
    return p0.data[mask.mask].astype(np.float64), pc.data[mask.mask].astype(np.float64)


def masked_l1(p0: RealImage, pc: RealImage, mask: CellMask) -> float:
    """Mean absolute pointwise error over the mask."""
    a, b = _masked_pair(p0, pc, mask)
    return float(np.mean(np.abs(a - b)))


def masked_eps_mu(p0: RealImage, pc: RealImage, mask: CellMask) -> float:
    """Difference of the masked means of |p0| and |pc|."""
    a, b = _masked_pair(p0, pc, mask)
    return float(np.mean(np.abs(a)) - np.mean(np.abs(b)))


def erode_mask(mask: CellMask, margin_px: int) -> CellMask:
    """Shrink the mask by margin_px pixels; pixels beyond the border count as outside."""
    if margin_px < 0:
        raise ParameterError(f"erosion margin must be non-negative, got {margin_px}")
    if margin_px == 0:
        return mask
    eroded = ndimage.binary_erosion(mask.mask, iterations=margin_px, border_value=0)
    return CellMask(mask=eroded)


def align_to_background(image: RealImage, mask: CellMask) -> RealImage:
    """Subtract the median of the pixels outside the mask."""
    background = image.data[~mask.mask]
    if background.size == 0:
        logger.warning("Mask covers the whole image, background alignment skipped")
        return image
    return RealImage(data=image.data - np.median(background))


def evaluate_case(
    reference: RealImage,
    candidate: RealImage,
    mask: CellMask,
    wavelength_um: float = DEFAULT_WAVELENGTH_UM,
    units: Literal["um", "rad"] = "um",
    erosion_px: int = 2,
    background_align: bool = True,
) -> ErrorReport:
    """
    Compare a reconstructed phase against its reference over a cell mask.

    Args:
        reference: Ground-truth phase in radians
        candidate: Reconstructed phase in radians
        mask: Cell mask, eroded by erosion_px before comparing
        wavelength_um: Wavelength for the optical height conversion
        units: "um" compares optical heights, "rad" compares phases
        erosion_px: Boundary margin removed from the mask
        background_align: Remove each map's background median first

    Returns:
        ErrorReport with L1, eps_mu and the masked reference height range
    """
    if reference.shape != candidate.shape or reference.shape != mask.shape:
        raise ParameterError(
            f"reference {reference.shape}, candidate {candidate.shape} "
            f"and mask {mask.shape} must match"
        )
    if background_align:
        reference = align_to_background(reference, mask)
        candidate = align_to_background(candidate, mask)

    heights = optical_height(reference, wavelength_um)
    if units == "um":
        reference, candidate = heights, optical_height(candidate, wavelength_um)

    eroded = erode_mask(mask, erosion_px)
    if eroded.pixel_count == 0:
        raise ParameterError(f"mask is empty after a {erosion_px} px erosion")

    inside = heights.data[eroded.mask]
    return ErrorReport(
        l1=masked_l1(reference, candidate, eroded),
        eps_mu=masked_eps_mu(reference, candidate, eroded),
        n_pixels=eroded.pixel_count,
        unit=units,
        height_range=(float(inside.min()), float(inside.max())),
    )


def _strip_means(data: np.ndarray, strip_px: int) -> np.ndarray:
    """m[:, k] = mean of data[:, k:k+strip_px]."""
    padded = np.concatenate([np.zeros((data.shape[0], 1)), np.cumsum(data, axis=1)], axis=1)
    return (padded[:, strip_px:] - padded[:, :-strip_px]) / strip_px


def _line_differences(
    phase: np.ndarray, axis: Axis, strip_px: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Steps and slope-compensated jumps across every admissible line.

    A line at coordinate c separates samples < c from samples >= c. Returns
    (coordinates, steps, jumps); steps and jumps are indexed [position, line].
    """
    data = phase.astype(np.float64)
    if axis == "row":
        data = data.T
    n = data.shape[1]
    coords = np.arange(2 * strip_px, n - 2 * strip_px + 1)
    if coords.size == 0:
        return coords, np.empty((data.shape[0], 0)), np.empty((data.shape[0], 0))
    m = _strip_means(data, strip_px)
    l2, l1 = m[:, coords - 2 * strip_px], m[:, coords - strip_px]
    r1, r2 = m[:, coords], m[:, coords + strip_px]
    steps = r1 - l1
    jumps = steps - ((r2 - r1) + (l1 - l2)) / 2
    return coords, steps, jumps


def jump_profile(
    phase: Image, axis: Axis, strip_px: int = 3
) -> tuple[np.ndarray, np.ndarray]:
    """
    Mean absolute slope-compensated jump for every line along an axis.

    Returns:
        (coordinates, mean |jump|) where axis "col" scans vertical lines
    """
    coords, _, jumps = _line_differences(phase.data, axis, strip_px)
    return coords, np.mean(np.abs(jumps), axis=0)


def _line_statistic(
    axis: Axis, coordinate: int, coords: np.ndarray, steps: np.ndarray, jumps: np.ndarray
) -> LineStatistic:
    index = int(np.searchsorted(coords, coordinate))
    if index >= coords.size or coords[index] != coordinate:
        raise ParameterError(f"{axis} patch line {coordinate} lies outside the measurable image")
    step, jump = np.abs(steps[:, index]), np.abs(jumps[:, index])
    return LineStatistic(
        axis=axis,
        coordinate=coordinate,
        mean_step=float(step.mean()),
        max_step=float(step.max()),
        mean_jump=float(jump.mean()),
        max_jump=float(jump.max()),
    )


def _interior(coords: np.ndarray, lines: Sequence[int], n: int, offset: int) -> np.ndarray:
    keep = (coords >= offset) & (coords <= n - offset)
    for line in lines:
        keep &= np.abs(coords - line) >= offset
    return keep


def patchline_discontinuity(
    phase: Image,
    layout: PatchLayout,
    strip_px: int = 3,
    baseline_offset_px: int = 16,
    floor_rad: float = 0.01,
) -> DiscontinuityReport:
    """
    Phase steps across every patch line against an interior baseline.

    The step is the difference of strip_px-wide strip means either side of
    the line. The jump additionally removes the local slope estimated from
    the next strip on each side, so it vanishes for smooth phase.

    Args:
        phase: Mosaic phase map
        layout: Mosaic layout naming the patch lines
        strip_px: Strip width in pixels
        baseline_offset_px: Minimum distance of baseline lines from patch lines and borders
        floor_rad: Noise floor added to both sides of the ratio

    Returns:
        DiscontinuityReport with per-line statistics and the baseline
    """
    if phase.shape != layout.mosaic_shape:
        raise ParameterError(f"phase {phase.shape} does not match layout {layout.mosaic_shape}")
    if strip_px < 1 or baseline_offset_px < 2 * strip_px:
        raise ParameterError("baseline offset must be at least two strip widths")

    rows, cols = phase.shape
    lines: list[LineStatistic] = []
    baseline_steps: list[np.ndarray] = []
    baseline_jumps: list[np.ndarray] = []
    for axis, declared, n in (("row", layout.patch_lines_r, rows), ("col", layout.patch_lines_c, cols)):
        coords, steps, jumps = _line_differences(phase.data, axis, strip_px)
        for coordinate in declared:
            if not 0 < coordinate < n:
                raise ParameterError(f"{axis} patch line {coordinate} outside image of {n} px")
            lines.append(_line_statistic(axis, coordinate, coords, steps, jumps))
        keep = _interior(coords, declared, n, baseline_offset_px)
        baseline_steps.append(np.abs(steps[:, keep]).ravel())
        baseline_jumps.append(np.abs(jumps[:, keep]).ravel())

    base_step = np.concatenate(baseline_steps)
    base_jump = np.concatenate(baseline_jumps)
    if base_jump.size == 0:
        logger.warning("No interior lines for the baseline, using zero")
    report = DiscontinuityReport(
        lines=lines,
        baseline_mean_step=float(base_step.mean()) if base_step.size else 0.0,
        baseline_mean_jump=float(base_jump.mean()) if base_jump.size else 0.0,
        floor_rad=floor_rad,
    )
    logger.debug(f"{len(lines)} patch lines, discontinuity ratio {report.ratio:.3f}")
    return report


def _case_row(
    case: CorpusCase,
    wavelength_um: float,
    units: Literal["um", "rad"],
    erosion_px: int,
    background_align: bool,
) -> dict:
    plain = evaluate_case(
        case.reference, case.candidate, case.mask, wavelength_um, units, erosion_px, background_align
    )
    row = {
        "case_id": case.case_id,
        "n_pixels": plain.n_pixels,
        "l1": plain.l1,
        "eps_mu": plain.eps_mu,
        "l1_mdi": math.nan,
        "eps_mu_mdi": math.nan,
        "height_min": plain.height_range[0],
        "height_max": plain.height_range[1],
    }
    if case.candidate_mdi is not None:
        mdi = evaluate_case(
            case.reference, case.candidate_mdi, case.mask, wavelength_um, units, erosion_px, background_align
        )
        row["l1_mdi"], row["eps_mu_mdi"] = mdi.l1, mdi.eps_mu
    return row


def summarize(cases: pd.DataFrame) -> pd.DataFrame:
    """Mean/Max/Min/Var/Median of the metric columns; Var is the population variance."""
    metrics = cases[["l1", "eps_mu", "l1_mdi", "eps_mu_mdi"]].astype(np.float64)
    summary = pd.DataFrame(
        [metrics.mean(), metrics.max(), metrics.min(), metrics.var(ddof=0), metrics.median()],
        index=list(SUMMARY_ROWS),
    )
    summary.index.name = "statistic"
    return summary


def corpus_report(
    cases: Sequence[CorpusCase],
    wavelength_um: float = DEFAULT_WAVELENGTH_UM,
    units: Literal["um", "rad"] = "um",
    erosion_px: int = 2,
    background_align: bool = True,
    threads: int = 1,
) -> CorpusReport:
    """
    Evaluate every case and summarize the corpus.

    Cases are evaluated in parallel; rows keep the input order.
    """
    if not cases:
        raise ParameterError("corpus is empty")
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        rows = list(
            pool.map(
                lambda case: _case_row(case, wavelength_um, units, erosion_px, background_align),
                cases,
            )
        )
    table = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    logger.info(f"Evaluated {len(table)} cases")
    return CorpusReport(cases=table, summary=summarize(table), unit=units)

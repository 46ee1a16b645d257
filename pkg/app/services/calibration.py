"""
Static system phase removal using an object-free recording.

Calibration works on the wrapped differences, before integration. Frames
are adapted to cutouts by cropping and to mosaics by tiling.
"""

from typing import Optional, Union

import numpy as np

from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.fields import RealImage
from app.models.patching import PatchLayout
from app.models.reconstruction import CalibrationFrame, CutoutRect, GradientPair, LobeLocation
from app.services.demodulation import demodulate_gradients, wrap_phase

logger = get_logger(__name__)


def build_calibration(
    object_free_hologram: RealImage,
    lobes: LobeLocation,
    apodize: bool = False,
) -> CalibrationFrame:
    """Demodulate an object-free hologram and keep its gradients as reference."""
    grads = demodulate_gradients(object_free_hologram, lobes, apodize=apodize)
    logger.info(f"Calibration built from {object_free_hologram.rows}x{object_free_hologram.cols} frame")
    return CalibrationFrame(
        gx_ref=grads.gx,
        gy_ref=grads.gy,
        source_dims=object_free_hologram.shape,
        lobes=lobes,
    )


def apply_calibration(grads: GradientPair, cal: CalibrationFrame) -> GradientPair:
    """Wrapped pointwise subtraction of the reference gradients."""
    if grads.shape != cal.shape:
        raise ParameterError(
            f"calibration {cal.shape} does not match gradients {grads.shape}; adapt it first"
        )
    return GradientPair(
        gx=RealImage(data=wrap_phase(grads.gx.data - cal.gx_ref.data)),
        gy=RealImage(data=wrap_phase(grads.gy.data - cal.gy_ref.data)),
    )


def _tile(reference: np.ndarray, layout: PatchLayout) -> np.ndarray:
    return np.tile(reference, (layout.grid_rows, layout.grid_cols))


def adapt_calibration(
    cal: CalibrationFrame, target: Union[PatchLayout, CutoutRect]
) -> CalibrationFrame:
    """
    Match a calibration frame to a cutout or a patched mosaic.

    Args:
        cal: Frame recorded at full single-shot size
        target: Cutout rectangle (crop) or mosaic layout (tile then crop)

    Returns:
        Frame with the target's dimensions
    """
    if isinstance(target, CutoutRect):
        rows, cols = cal.shape
        if target.row1 > rows or target.col1 > cols:
            raise ParameterError(f"cutout {target.shape} at ({target.row0}, {target.col0}) exceeds {cal.shape}")
        rs, cs = target.slices
        gx, gy = cal.gx_ref.data[rs, cs], cal.gy_ref.data[rs, cs]
    else:
        if target.tile_shape != cal.shape:
            raise ParameterError(
                f"layout tile size {target.tile_shape} does not match calibration {cal.shape}"
            )
        mosaic_rows, mosaic_cols = target.mosaic_shape
        gx = _tile(cal.gx_ref.data, target)[:mosaic_rows, :mosaic_cols]
        gy = _tile(cal.gy_ref.data, target)[:mosaic_rows, :mosaic_cols]

    return CalibrationFrame(
        gx_ref=RealImage(data=gx),
        gy_ref=RealImage(data=gy),
        source_dims=cal.source_dims,
        lobes=cal.lobes,
    )


def calibrate_gradients(
    grads: GradientPair,
    cal: Optional[CalibrationFrame],
    target: Optional[Union[PatchLayout, CutoutRect]] = None,
) -> GradientPair:
    """Apply an optional calibration, adapting it to the target geometry first."""
    if cal is None:
        logger.debug("No calibration frame, gradients left as demodulated")
        return grads
    if target is not None and cal.shape != grads.shape:
        cal = adapt_calibration(cal, target)
    return apply_calibration(grads, cal)

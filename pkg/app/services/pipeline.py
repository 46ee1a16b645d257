"""
End-to-end single hologram reconstruction.

spectrum -> lobe search -> demodulation -> calibration -> integration ->
shear scaling, plus the central-lobe amplitude.
"""

from typing import Optional, Union

from app.core.config import PipelineConfig
from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.fields import ComplexField, RealImage
from app.models.patching import PatchLayout
from app.models.reconstruction import (
    CalibrationFrame,
    CutoutRect,
    LobeLocation,
    ReconstructionResult,
)
from app.services.calibration import calibrate_gradients
from app.services.demodulation import demodulate_gradients, extract_amplitude, find_lobes
from app.services.fourier import fft2c
from app.services.integration import (
    integrate,
    orient_gradients,
    scale_to_phase,
    shear_of,
)

logger = get_logger(__name__)


def crop_cutout(image: RealImage, rect: CutoutRect) -> RealImage:
    """Copy out the rectangle of a full-frame image."""
    if rect.row1 > image.rows or rect.col1 > image.cols:
        raise ParameterError(
            f"cutout [{rect.row0}:{rect.row1}, {rect.col0}:{rect.col1}] exceeds {image.shape}"
        )
    return RealImage(data=image.data[rect.slices].copy())


def locate_lobes(spectrum: ComplexField, config: PipelineConfig) -> LobeLocation:
    """find_lobes with the search parameters of a pipeline config."""
    return find_lobes(
        spectrum,
        window_fraction=config.window_fraction,
        dc_exclusion_fraction=config.dc_exclusion_fraction,
        sector_half_width_deg=config.sector_half_width_deg,
        axis_exclusion_deg=config.axis_exclusion_deg,
        min_power_ratio=config.min_lobe_power_ratio,
    )

def reconstruct_hologram(
    hologram: RealImage,
    config: PipelineConfig,
    calibration: Optional[CalibrationFrame] = None,
    target: Optional[Union[PatchLayout, CutoutRect]] = None,
    lobes: Optional[LobeLocation] = None,
    low_memory: bool = False,
) -> ReconstructionResult:
    """
    Reconstruct phase and amplitude from one hologram, cutout or mosaic.

    A cutout is demodulated against the carrier of its source frame, taken
    from the calibration's lobes when it has them, so its differences line
    up with the adapted calibration.

    Intermediate fields are released as soon as the next stage has its
    input. With low_memory=True the gradients are not kept in the result
    and the amplitude is computed from a second transform after
    integration, so a float32 hologram never needs more than six times its
    own size on top.

    Args:
        hologram: Recorded intensity
        config: Pipeline parameters
        calibration: Object-free reference, adapted to target when sizes differ
        target: Cutout rectangle or mosaic layout the hologram covers
        lobes: Precomputed lobe windows; searched when None
        low_memory: Drop the gradients and defer the amplitude

    Returns:
        ReconstructionResult with the registered phase map
    """
    spectrum = fft2c(hologram.data)
    if lobes is None:
        lobes = locate_lobes(ComplexField(data=spectrum), config)

    cutout = {}
    if isinstance(target, CutoutRect):
        cutout["origin"] = (target.row0, target.col0)
        if calibration is not None and calibration.lobes is not None:
            cutout["reference"] = calibration.lobes
            cutout["reference_shape"] = calibration.source_dims
    grads = demodulate_gradients(
        hologram, lobes, apodize=config.apodize, spectrum=spectrum, **cutout
    )
    amplitude = None
    if not low_memory:
        amplitude = extract_amplitude(hologram, lobes, apodize=config.apodize, spectrum=spectrum)
    del spectrum
    grads = calibrate_gradients(grads, calibration, target)

    centered = orient_gradients(grads, config.setup)
    kept = None if low_memory else grads
    del grads
    raw = integrate(centered, config.integration, shear=shear_of(config.setup))
    del centered
    setup = config.setup
    phase = scale_to_phase(raw, setup.shear_x_px if setup.isotropic else 1)
    del raw

    if amplitude is None:
        amplitude = extract_amplitude(hologram, lobes, apodize=config.apodize)
    logger.info(
        f"Reconstructed {hologram.rows}x{hologram.cols} hologram "
        f"({config.integration.variant.value}, R={lobes.x_lobe.half_size})"
    )
    return ReconstructionResult(phase=phase, amplitude=amplitude, lobes=lobes, gradients=kept)

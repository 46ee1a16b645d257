"""
Whole-slide mosaics and the three patched-hologram reconstruction strategies.

1. Reconstruct every single shot, then patch the phase tiles.
2. Reconstruct the patched hologram as one with MDI.
3. Reconstruct the patched hologram as one on a shifted frequency grid.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from app.core.config import PipelineConfig
from app.core.exceptions import ParameterError, QPhaseError
from app.core.logging import get_logger
from app.models.fields import RealImage
from app.models.patching import PatchLayout, WsiMosaic
from app.models.reconstruction import (
    CalibrationFrame,
    IntegrationConfig,
    IntegrationVariant,
    PhaseMap,
    ReconstructionResult,
)
from app.services.pipeline import reconstruct_hologram

logger = get_logger(__name__)


def assemble_mosaic(tiles: Sequence[Sequence[RealImage]]) -> WsiMosaic:
    """
    Place equally sized tiles in row-major grid order without overlap.

    Args:
        tiles: Grid of tiles, tiles[i][j] is row i, column j

    Returns:
        WsiMosaic with the derived layout
    """
    if not tiles or not tiles[0]:
        raise ParameterError("tile grid is empty")
    grid_cols = len(tiles[0])
    shape = tiles[0][0].shape
    dtype = tiles[0][0].data.dtype
    for i, row in enumerate(tiles):
        if len(row) != grid_cols:
            raise ParameterError(f"tile row {i} has {len(row)} tiles, expected {grid_cols}")
        for j, tile in enumerate(row):
            if tile is None:
                raise ParameterError(f"tile ({i}, {j}) is missing")
            if tile.shape != shape:
                raise ParameterError(f"tile ({i}, {j}) is {tile.shape}, expected {shape}")
            if tile.data.dtype != dtype:
                dtype = np.result_type(dtype, tile.data.dtype)

    layout = PatchLayout.from_grid(shape[0], shape[1], len(tiles), grid_cols)
    data = np.block([[tile.data.astype(dtype, copy=False) for tile in row] for row in tiles])
    logger.info(
        f"Assembled {layout.grid_rows}x{layout.grid_cols} mosaic of {shape[0]}x{shape[1]} tiles"
    )
    return WsiMosaic(hologram=RealImage(data=data), layout=layout)


def split_into_tiles(image: np.ndarray, layout: PatchLayout) -> list[list[np.ndarray]]:
    """Cut a mosaic-sized array back into its tiles."""
    if image.shape != layout.mosaic_shape:
        raise ParameterError(f"image {image.shape} does not match layout {layout.mosaic_shape}")
    return [
        [image[layout.tile_slices(i, j)] for j in range(layout.grid_cols)]
        for i in range(layout.grid_rows)
    ]

def _reconstruct_tile(
    index: tuple[int, int],
    tile: RealImage,
    cal: Optional[CalibrationFrame],
    config: PipelineConfig,
) -> ReconstructionResult:
    try:
        return reconstruct_hologram(tile, config, calibration=cal)
    except QPhaseError as exc:
        exc.args = (f"tile {index}: {exc}",)
        raise


def reconstruct_strategy1(
    tiles: Sequence[Sequence[RealImage]],
    cal: Optional[CalibrationFrame],
    config: PipelineConfig,
    threads: int = 1,
) -> ReconstructionResult:
    """
    Reconstruct each single shot independently and patch the phase and
    amplitude tiles.

    Tiles stay individually mean-free; no offset equalization between tiles.
    The result carries no lobes or gradients since every tile has its own.
    """
    mosaic = assemble_mosaic(tiles)
    layout = mosaic.layout
    jobs = [
        ((i, j), tiles[i][j]) for i in range(layout.grid_rows) for j in range(layout.grid_cols)
    ]
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        results = list(pool.map(lambda job: _reconstruct_tile(job[0], job[1], cal, config), jobs))

    phase = np.empty(layout.mosaic_shape)
    amplitude = np.empty(layout.mosaic_shape, dtype=results[0].amplitude.data.dtype)
    for ((i, j), _), result in zip(jobs, results):
        phase[layout.tile_slices(i, j)] = result.phase.data
        amplitude[layout.tile_slices(i, j)] = result.amplitude.data
    phase -= np.mean(phase, dtype=np.float64)
    logger.info(f"Strategy 1 reconstructed {len(jobs)} tiles")
    return ReconstructionResult(
        phase=PhaseMap(phase=RealImage(data=phase), provenance=config.integration),
        amplitude=RealImage(data=amplitude),
    )


def _whole_mosaic(
    mosaic: WsiMosaic,
    cal: Optional[CalibrationFrame],
    config: PipelineConfig,
    variant: IntegrationVariant,
) -> ReconstructionResult:
    integration = config.integration
    if integration.variant != variant:
        integration = IntegrationConfig(
            variant=variant,
            shift_delta=integration.shift_delta,
            iterations=integration.iterations,
            combine_mdi=integration.combine_mdi,
        )
    tuned = config.model_copy(update={"integration": integration})
    return reconstruct_hologram(
        mosaic.hologram, tuned, calibration=cal, target=mosaic.layout, low_memory=True
    )


def reconstruct_strategy2(
    mosaic: WsiMosaic, cal: Optional[CalibrationFrame], config: PipelineConfig
) -> ReconstructionResult:
    """Reconstruct the whole mosaic as one hologram with MDI."""
    logger.info(f"Strategy 2 on {mosaic.hologram.rows}x{mosaic.hologram.cols} mosaic")
    return _whole_mosaic(mosaic, cal, config, IntegrationVariant.MDI)


def reconstruct_strategy3(
    mosaic: WsiMosaic, cal: Optional[CalibrationFrame], config: PipelineConfig
) -> ReconstructionResult:
    """Reconstruct the whole mosaic as one hologram on a shifted frequency grid."""
    logger.info(f"Strategy 3 on {mosaic.hologram.rows}x{mosaic.hologram.cols} mosaic")
    return _whole_mosaic(mosaic, cal, config, IntegrationVariant.SHIFTED)


def reconstruct_mosaic(
    tiles: Sequence[Sequence[RealImage]],
    cal: Optional[CalibrationFrame],
    config: PipelineConfig,
    threads: int = 1,
) -> ReconstructionResult:
    """Run the strategy selected by config.wsi_strategy."""
    if config.wsi_strategy == 1:
        return reconstruct_strategy1(tiles, cal, config, threads)
    mosaic = assemble_mosaic(tiles)
    if config.wsi_strategy == 2:
        return reconstruct_strategy2(mosaic, cal, config)
    return reconstruct_strategy3(mosaic, cal, config)

"""
synth: render a phantom spec into a hologram and its ground truth.
"""

import argparse
from pathlib import Path

import numpy as np

from app.core.config import PipelineConfig
from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.metrics import CellMask
from app.models.optics import Phantom, PhantomSpec
from app.models.patching import MosaicManifest, PatchLayout
from app.models.sidecars import SynthManifest
from app.services.forward_model import (
    cell_mask,
    phantom_from_spec,
    synthesize_hologram,
    synthesize_tiles,
)
from app.services.storage import read_json, write_json, write_mask_png, write_png16, write_qph

logger = get_logger(__name__)


def add_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "synth", parents=[parent], help="Synthesize a hologram from a phantom spec"
    )
    parser.add_argument("spec", type=Path, help="Phantom spec JSON")
    parser.add_argument("--out-dir", type=Path, required=True, help="Output directory")
    parser.add_argument(
        "--grid",
        type=int,
        nargs=2,
        metavar=("ROWS", "COLS"),
        help="Also write the single shots of a ROWS x COLS slide scan",
    )
    parser.add_argument(
        "--tile-tilt",
        type=float,
        default=0.0,
        help="Per-shot wavefront tilt in rad/px, scaled by the shot index",
    )
    parser.set_defaults(handler=handle)


def _write_tiles(
    out_dir: Path, phantom: Phantom, config: PipelineConfig, grid: list[int], tilt: float
) -> Path:
    grid_rows, grid_cols = grid
    rows, cols = phantom.shape
    if grid_rows < 1 or grid_cols < 1 or rows % grid_rows or cols % grid_cols:
        raise ParameterError(
            f"{rows}x{cols} phantom does not split into a {grid_rows}x{grid_cols} grid"
        )
    layout = PatchLayout.from_grid(rows // grid_rows, cols // grid_cols, grid_rows, grid_cols)
    tilts = [
        [(tilt * (1 + 0.25 * (i * grid_cols + j)), 0.0) for j in range(grid_cols)]
        for i in range(grid_rows)
    ]
    tiles = synthesize_tiles(phantom, config.setup, layout, tilts if tilt else None)

    names: list[list[str]] = []
    for i, row in enumerate(tiles):
        names.append([])
        for j, tile in enumerate(row):
            name = f"tile_{i}_{j}.qph"
            write_qph(out_dir / name, tile.data)
            names[-1].append(name)
    manifest = MosaicManifest(tile_rows=layout.tile_rows, tile_cols=layout.tile_cols, grid=names)
    return write_json(out_dir / "mosaic.json", manifest)


def handle(args: argparse.Namespace, config: PipelineConfig) -> int:
    spec = read_json(args.spec, PhantomSpec)
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    phantom = phantom_from_spec(spec, config.setup.wavelength_um)
    rng = np.random.default_rng(args.seed)
    hologram = synthesize_hologram(phantom, config.setup, rng)

    write_qph(out_dir / "hologram.qph", hologram.data)
    write_png16(out_dir / "hologram.png", hologram)
    write_qph(out_dir / "phase.qph", phantom.phase.data)
    write_mask_png(out_dir / "mask.png", CellMask(mask=cell_mask(spec.rows, spec.cols, spec.cells)))
    write_json(
        out_dir / "manifest.json",
        SynthManifest(
            hologram="hologram.qph",
            hologram_preview="hologram.png",
            phase="phase.qph",
            mask="mask.png",
            rows=spec.rows,
            cols=spec.cols,
            seed=args.seed,
            wavelength_um=config.setup.wavelength_um,
        ),
    )
    if args.grid:
        mosaic = _write_tiles(out_dir, phantom, config, args.grid, args.tile_tilt)
        logger.info(f"Wrote slide-scan shots and {mosaic.name}")

    logger.info(f"Synthesized {spec.rows}x{spec.cols} hologram with {len(spec.cells)} cells into {out_dir}")
    return 0

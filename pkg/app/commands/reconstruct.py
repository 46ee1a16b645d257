"""
reconstruct: phase, optical height and amplitude from a hologram or mosaic.
"""

import argparse
from pathlib import Path
from typing import Optional

import pandas as pd

from app.core.config import OutputFormat, PipelineConfig
from app.core.logging import get_logger
from app.models.fields import RealImage
from app.models.reconstruction import CalibrationFrame, CutoutRect, PhaseMap
from app.services.metrics import optical_height, patchline_discontinuity
from app.services.patching import assemble_mosaic, reconstruct_mosaic
from app.services.pipeline import crop_cutout, reconstruct_hologram
from app.services.report_service import render_discontinuity_report
from app.services.storage import (
    load_calibration,
    load_image,
    load_manifest,
    sidecar_path,
    write_json,
    write_png16,
    write_qph,
)

logger = get_logger(__name__)


def add_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "reconstruct",
        parents=[parent],
        help="Reconstruct a hologram (QPH/PNG) or a mosaic manifest (JSON)",
    )
    parser.add_argument("input", type=Path, help="Hologram file or mosaic manifest")
    parser.add_argument("--out-dir", type=Path, required=True, help="Output directory")
    parser.add_argument("--calibration", type=Path, help="Calibration frame QPH")
    parser.add_argument(
        "--cutout",
        type=int,
        nargs=4,
        metavar=("ROW0", "ROW1", "COL0", "COL1"),
        help="Reconstruct only this rectangle of the hologram",
    )
    parser.add_argument(
        "--strategy", type=int, choices=(1, 2, 3), help="Whole-slide strategy override"
    )
    parser.add_argument(
        "--mosaic",
        action="store_true",
        help="Treat the input as a mosaic manifest (implied by a .json suffix)",
    )
    parser.set_defaults(handler=handle)


def _write_phase(out_dir: Path, phase: PhaseMap, config: PipelineConfig) -> None:
    height = optical_height(phase, config.setup.wavelength_um)
    write_qph(out_dir / "phase.qph", phase.data)
    write_qph(out_dir / "height.qph", height.data)
    write_png16(out_dir / "height.png", height, unit="um")
    if config.output_format == OutputFormat.PNG16:
        write_png16(out_dir / "phase.png", phase.phase, unit="rad")
    elif config.output_format == OutputFormat.CSV:
        pd.DataFrame(height.data).to_csv(out_dir / "height.csv", header=False, index=False)


def _write_amplitude(out_dir: Path, amplitude: RealImage, config: PipelineConfig) -> None:
    write_qph(out_dir / "amplitude.qph", amplitude.data)
    if config.output_format == OutputFormat.PNG16:
        write_png16(out_dir / "amplitude.png", amplitude)


def _reconstruct_single(
    args: argparse.Namespace, config: PipelineConfig, cal: Optional[CalibrationFrame]
) -> None:
    hologram = load_image(args.input)
    target = None
    if args.cutout:
        row0, row1, col0, col1 = args.cutout
        target = CutoutRect(row0=row0, row1=row1, col0=col0, col1=col1)
        hologram = crop_cutout(hologram, target)

    # Stored lobe windows are only valid for the frame size they were found on
    lobes = None
    if cal is not None and cal.lobes is not None and hologram.shape == cal.source_dims:
        lobes = cal.lobes
    result = reconstruct_hologram(hologram, config, calibration=cal, target=target, lobes=lobes)
    _write_phase(args.out_dir, result.phase, config)
    _write_amplitude(args.out_dir, result.amplitude, config)


def _reconstruct_mosaic(
    args: argparse.Namespace, config: PipelineConfig, cal: Optional[CalibrationFrame]
) -> None:
    _, tiles = load_manifest(args.input)
    result = reconstruct_mosaic(tiles, cal, config, threads=args.threads)
    layout = assemble_mosaic(tiles).layout
    _write_phase(args.out_dir, result.phase, config)
    _write_amplitude(args.out_dir, result.amplitude, config)
    write_json(sidecar_path(args.out_dir / "phase.qph"), layout)

    report = patchline_discontinuity(result.phase, layout)
    text = render_discontinuity_report(report, label=f"strategy {config.wsi_strategy}")
    (args.out_dir / "patchlines.txt").write_text(text)
    logger.info(f"Patch-line ratio {report.ratio:.3f} with strategy {config.wsi_strategy}")


def handle(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.strategy is not None:
        config = config.model_copy(update={"wsi_strategy": args.strategy})
    args.out_dir.mkdir(parents=True, exist_ok=True)

    cal = load_calibration(args.calibration) if args.calibration else None
    if cal is None:
        logger.warning("No calibration frame, static system phase stays in the result")

    if args.mosaic or args.input.suffix.lower() == ".json":
        _reconstruct_mosaic(args, config, cal)
    else:
        _reconstruct_single(args, config, cal)
    logger.info(f"Wrote reconstruction to {args.out_dir}")
    return 0

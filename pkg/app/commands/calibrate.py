"""
calibrate: store the gradients of an object-free recording.
"""

import argparse
from pathlib import Path

from app.core.config import PipelineConfig
from app.core.logging import get_logger
from app.models.fields import ComplexField
from app.services.calibration import build_calibration
from app.services.fourier import fft2_forward
from app.services.pipeline import locate_lobes
from app.services.storage import load_image, save_calibration

logger = get_logger(__name__)


def add_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "calibrate", parents=[parent], help="Build a calibration frame from an object-free hologram"
    )
    parser.add_argument("hologram", type=Path, help="Object-free hologram (QPH or PNG)")
    parser.add_argument("--out", type=Path, required=True, help="Calibration QPH; metadata goes to <out>.json")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, config: PipelineConfig) -> int:
    hologram = load_image(args.hologram)
    spectrum: ComplexField = fft2_forward(hologram)
    lobes = locate_lobes(spectrum, config)
    cal = build_calibration(hologram, lobes, apodize=config.apodize)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_calibration(args.out, cal)
    return 0

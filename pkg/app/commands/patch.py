"""
patch: assemble single shots into one whole-slide hologram.
"""

import argparse
from pathlib import Path

from app.core.config import PipelineConfig
from app.core.logging import get_logger
from app.services.patching import assemble_mosaic
from app.services.storage import load_manifest, sidecar_path, write_json, write_qph

logger = get_logger(__name__)


def add_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "patch", parents=[parent], help="Patch the tiles of a mosaic manifest together"
    )
    parser.add_argument("manifest", type=Path, help="Mosaic manifest JSON")
    parser.add_argument("--out", type=Path, required=True, help="Output QPH; layout goes to <out>.json")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, config: PipelineConfig) -> int:
    _, tiles = load_manifest(args.manifest)
    mosaic = assemble_mosaic(tiles)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_qph(args.out, mosaic.hologram.data)
    write_json(sidecar_path(args.out), mosaic.layout)
    logger.info(f"Wrote {mosaic.hologram.rows}x{mosaic.hologram.cols} mosaic to {args.out}")
    return 0

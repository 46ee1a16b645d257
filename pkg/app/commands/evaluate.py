"""
eval: masked error metrics of reconstructions against references.
"""

import argparse
from pathlib import Path
from typing import Optional

from app.core.config import PipelineConfig
from app.core.exceptions import ParameterError
from app.core.logging import get_logger
from app.models.metrics import CorpusCase
from app.models.sidecars import CorpusManifest
from app.services.metrics import corpus_report
from app.services.report_service import render_corpus_report
from app.services.storage import load_image, read_json, read_mask_png, write_report_csv

logger = get_logger(__name__)


def add_parser(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "eval", parents=[parent], help="Compare reconstructions against references"
    )
    parser.add_argument("reference", type=Path, nargs="?", help="Reference phase")
    parser.add_argument("candidate", type=Path, nargs="?", help="Reconstructed phase")
    parser.add_argument("mask", type=Path, nargs="?", help="8-bit cell mask PNG")
    parser.add_argument("--candidate-mdi", type=Path, help="MDI reconstruction of the same case")
    parser.add_argument("--corpus", type=Path, help="Corpus JSON listing many cases")
    parser.add_argument("--out", type=Path, required=True, help="CSV report; text goes to <out>.txt")
    parser.set_defaults(handler=handle)


def _case(
    case_id: str, base: Path, reference: str, candidate: str, mask: str, mdi: Optional[str]
) -> CorpusCase:
    return CorpusCase(
        case_id=case_id,
        reference=load_image(base / reference),
        candidate=load_image(base / candidate),
        mask=read_mask_png(base / mask),
        candidate_mdi=load_image(base / mdi) if mdi else None,
    )


def _collect_cases(args: argparse.Namespace) -> list[CorpusCase]:
    if args.corpus is not None:
        corpus = read_json(args.corpus, CorpusManifest)
        base = args.corpus.parent
        return [
            _case(entry.case_id, base, entry.reference, entry.candidate, entry.mask, entry.candidate_mdi)
            for entry in corpus.cases
        ]
    if args.reference is None or args.candidate is None or args.mask is None:
        raise ParameterError("eval needs REFERENCE CANDIDATE MASK or --corpus")
    return [
        _case(
            args.candidate.stem,
            Path("."),
            str(args.reference),
            str(args.candidate),
            str(args.mask),
            str(args.candidate_mdi) if args.candidate_mdi else None,
        )
    ]


def handle(args: argparse.Namespace, config: PipelineConfig) -> int:
    cases = _collect_cases(args)
    report = corpus_report(
        cases,
        wavelength_um=config.setup.wavelength_um,
        units=config.metric_units,
        erosion_px=config.mask_erosion_px,
        background_align=config.background_align,
        threads=args.threads,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(args.out, report)
    text = render_corpus_report(report)
    args.out.with_name(args.out.name + ".txt").write_text(text)
    print(text, end="")
    logger.info(f"Wrote {args.out}")
    return 0

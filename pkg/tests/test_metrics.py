import math

import numpy as np
import pytest

from app.core.exceptions import ParameterError
from app.models.fields import RealImage
from app.models.metrics import CellMask, CorpusCase
from app.models.patching import PatchLayout
from app.services.metrics import (
    SUMMARY_ROWS,
    corpus_report,
    erode_mask,
    evaluate_case,
    jump_profile,
    masked_eps_mu,
    masked_l1,
    optical_height,
    patchline_discontinuity,
)


def _img(values) -> RealImage:
    return RealImage(data=np.asarray(values, dtype=float))


def _disk(n: int, radius: float) -> CellMask:
    y, x = np.mgrid[0:n, 0:n]
    return CellMask(mask=np.hypot(y - n / 2, x - n / 2) < radius)


def test_optical_height():
    assert optical_height(_img([[2 * math.pi]]), 0.528).data[0, 0] == pytest.approx(0.528, rel=1e-15)
    assert optical_height(_img([[2.9742]]), 0.528).data[0, 0] == pytest.approx(0.25, rel=1e-3)
    with pytest.raises(ParameterError):
        optical_height(_img([[1.0]]), 0.0)


def test_masked_metrics_by_hand():
    p0 = _img([[1.0, -2.0], [3.0, 5.0]])
    pc = _img([[1.5, -1.0], [3.0, 9.0]])
    mask = CellMask(mask=[[1, 1], [1, 0]])

    assert masked_l1(p0, pc, mask) == pytest.approx((0.5 + 1.0 + 0.0) / 3)
    assert masked_eps_mu(p0, pc, mask) == pytest.approx((1 + 2 + 3) / 3 - (1.5 + 1 + 3) / 3)


def test_masked_metrics_match_brute_force():
    rng = np.random.default_rng(9)
    p0, pc = rng.normal(size=(20, 30)), rng.normal(size=(20, 30))
    mask = rng.random((20, 30)) > 0.6

    l1 = masked_l1(_img(p0), _img(pc), CellMask(mask=mask))
    eps = masked_eps_mu(_img(p0), _img(pc), CellMask(mask=mask))

    idx = np.argwhere(mask)
    expected_l1 = sum(abs(p0[r, c] - pc[r, c]) for r, c in idx) / len(idx)
    expected_eps = sum(abs(p0[r, c]) - abs(pc[r, c]) for r, c in idx) / len(idx)
    assert l1 == pytest.approx(expected_l1, rel=1e-12)
    assert eps == pytest.approx(expected_eps, abs=1e-12)
    assert abs(eps) <= l1


def test_identical_maps_score_zero():
    p = _img(np.random.default_rng(10).normal(size=(16, 16)))

    report = evaluate_case(p, p, _disk(16, 6), erosion_px=1)

    assert report.l1 == 0.0
    assert report.eps_mu == 0.0


def test_empty_mask_rejected():
    p = _img(np.zeros((8, 8)))

    with pytest.raises(ParameterError):
        masked_l1(p, p, CellMask(mask=np.zeros((8, 8))))
    with pytest.raises(ParameterError):
        evaluate_case(p, p, CellMask(mask=np.zeros((8, 8))))


def test_erosion_can_empty_the_mask():
    p = _img(np.zeros((8, 8)))
    tiny = CellMask(mask=np.pad(np.ones((2, 2)), 3))

    with pytest.raises(ParameterError, match="erosion"):
        evaluate_case(p, p, tiny, erosion_px=2)


def test_size_mismatch_rejected():
    with pytest.raises(ParameterError):
        evaluate_case(_img(np.zeros((8, 8))), _img(np.zeros((8, 9))), _disk(8, 3))


def test_erosion_treats_border_as_outside():
    full = CellMask(mask=np.ones((6, 6)))

    eroded = erode_mask(full, 1)

    assert eroded.pixel_count == 16
    assert not eroded.mask[0].any()
    assert erode_mask(full, 0) is full
    with pytest.raises(ParameterError):
        erode_mask(full, -1)


def test_background_alignment_removes_offset():
    base = np.zeros((32, 32))
    base[8:24, 8:24] = 1.0
    mask = CellMask(mask=base > 0)

    aligned = evaluate_case(_img(base), _img(base + 0.4), mask, units="rad", erosion_px=0)
    raw = evaluate_case(
        _img(base), _img(base + 0.4), mask, units="rad", erosion_px=0, background_align=False
    )

    assert aligned.l1 == pytest.approx(0.0, abs=1e-12)
    assert raw.l1 == pytest.approx(0.4)


def test_height_range_in_micrometres():
    phase = np.zeros((16, 16))
    phase[4:12, 4:12] = 2 * math.pi
    mask = CellMask(mask=phase > 0)

    report = evaluate_case(_img(phase), _img(phase), mask, wavelength_um=0.5, erosion_px=0)

    assert report.height_range == pytest.approx((0.5, 0.5))
    assert report.unit == "um"


def test_step_on_patch_line_is_detected():
    phase = np.zeros((64, 64))
    phase[:, 32:] = 0.5
    layout = PatchLayout.from_grid(32, 32, 2, 2)

    report = patchline_discontinuity(_img(phase - phase.mean()), layout)

    by_axis = {line.axis: line for line in report.lines}
    assert by_axis["col"].max_step == pytest.approx(0.5)
    assert by_axis["col"].mean_jump == pytest.approx(0.5)
    assert by_axis["row"].max_step == pytest.approx(0.0, abs=1e-12)
    assert report.ratio > 10


def test_smooth_ramp_has_no_discontinuity():
    ramp = np.broadcast_to(0.05 * np.arange(64.0), (64, 64))
    layout = PatchLayout.from_grid(32, 32, 2, 2)

    report = patchline_discontinuity(_img(ramp - ramp.mean()), layout)

    assert report.line_mean_jump == pytest.approx(0.0, abs=1e-12)
    assert report.ratio < 1.5


def test_jump_profile_peaks_at_step():
    phase = np.zeros((16, 48))
    phase[:, 20:] = 1.0

    coords, jumps = jump_profile(_img(phase), "col")

    assert coords[np.argmax(jumps)] == 20
    assert coords[0] == 6 and coords[-1] == 42


def test_patch_line_outside_measurable_range():
    with pytest.raises(ParameterError):
        patchline_discontinuity(_img(np.zeros((64, 4))), PatchLayout.from_grid(64, 2, 1, 2))


def _case(case_id: str, offset: float, n: int = 16) -> CorpusCase:
    reference = np.zeros((n, n))
    mask = _disk(n, 5)
    reference[mask.mask] = 1.0
    candidate = reference.copy()
    candidate[mask.mask] += offset
    return CorpusCase(case_id=case_id, reference=_img(reference), candidate=_img(candidate), mask=mask)


def test_corpus_of_identical_cases_is_zero():
    report = corpus_report([_case("a", 0.0), _case("b", 0.0)], units="rad")

    assert report.cases["l1"].tolist() == [0.0, 0.0]
    assert report.summary.loc["Mean", "l1"] == 0.0
    assert report.summary.loc["Var", "l1"] == 0.0


def test_corpus_summary_statistics():
    offsets = [0.1, 0.1, 0.1, 0.2, 2.0]
    report = corpus_report(
        [_case(f"c{k}", o) for k, o in enumerate(offsets)], units="rad", erosion_px=0
    )

    l1 = np.array(offsets)
    summary = report.summary["l1"]
    assert list(report.summary.index) == list(SUMMARY_ROWS)
    assert summary["Mean"] == pytest.approx(l1.mean())
    assert summary["Max"] == pytest.approx(2.0)
    assert summary["Min"] == pytest.approx(0.1)
    assert summary["Var"] == pytest.approx(l1.var())
    assert summary["Median"] == pytest.approx(0.1)
    assert summary["Mean"] >= summary["Median"]
    assert report.cases["eps_mu"].iloc[4] == pytest.approx(-2.0)
    assert np.isnan(report.cases["l1_mdi"]).all()


def test_corpus_mdi_columns():
    case = _case("a", 0.3).model_copy(update={"candidate_mdi": _case("a", 0.1).candidate})

    report = corpus_report([case], units="rad", erosion_px=0)

    assert report.cases.loc[0, "l1"] == pytest.approx(0.3)
    assert report.cases.loc[0, "l1_mdi"] == pytest.approx(0.1)


def test_corpus_rows_combined():
    report = corpus_report([_case("a", 0.0), _case("b", 0.5)], units="rad")

    combined = report.combined()

    assert combined["case_id"].tolist() == ["a", "b", *SUMMARY_ROWS]
    assert list(combined.columns) == list(report.cases.columns)


def test_corpus_threads_do_not_change_results():
    cases = [_case(f"c{k}", 0.05 * k) for k in range(6)]

    serial = corpus_report(cases, units="rad", threads=1)
    parallel = corpus_report(cases, units="rad", threads=4)

    assert serial.cases.equals(parallel.cases)


def test_empty_corpus_rejected():
    with pytest.raises(ParameterError):
        corpus_report([])

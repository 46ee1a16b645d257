import json
import math

import numpy as np
import pytest

from app.main import main
from app.models.metrics import CellMask
from app.models.patching import PatchLayout
from app.services.storage import read_json, read_mask_png, read_qph, write_mask_png, write_qph

CELL = {"center": [128, 128], "radius": 48, "peak_height_um": 0.25}


def _spec(tmp_path, name="spec.json", rows=256, cols=256, cells=(CELL,), **extra):
    path = tmp_path / name
    path.write_text(json.dumps({"rows": rows, "cols": cols, "cells": list(cells), **extra}))
    return path


def _synth(tmp_path, out="synth", *flags, **spec):
    out_dir = tmp_path / out
    code = main(["synth", str(_spec(tmp_path, f"{out}.json", **spec)), "--out-dir", str(out_dir), *flags])
    assert code == 0
    return out_dir


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "reconstruct" in capsys.readouterr().out


def test_unknown_command():
    assert main(["frobnicate"]) == 2


def test_threads_must_be_positive(tmp_path):
    assert main(["synth", str(_spec(tmp_path)), "--out-dir", str(tmp_path), "--threads", "0"]) == 2


def test_synth_writes_ground_truth(tmp_path):
    out_dir = _synth(tmp_path, rows=64, cols=64, cells=({"center": [32, 32], "radius": 10, "peak_height_um": 0.25},))

    for name in ("hologram.qph", "hologram.png", "hologram.png.json", "phase.qph", "mask.png", "manifest.json"):
        assert (out_dir / name).exists()
    assert read_qph(out_dir / "phase.qph").max() == pytest.approx(0.25 * 2 * math.pi / 0.528, rel=1e-12)
    assert read_mask_png(out_dir / "mask.png").mask[32, 32]


def test_synth_is_deterministic(tmp_path):
    spec = _spec(tmp_path, rows=64, cols=64, cells=())
    config = tmp_path / "noisy.json"
    config.write_text(json.dumps({"setup": {"noise_sigma": 0.2}}))

    for out in ("a", "b"):
        assert main(["synth", str(spec), "--out-dir", str(tmp_path / out), "--config", str(config), "--seed", "11"]) == 0

    assert (tmp_path / "a" / "hologram.qph").read_bytes() == (tmp_path / "b" / "hologram.qph").read_bytes()


def test_synth_rejects_malformed_spec(tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text("{rows: 3")

    assert main(["synth", str(spec), "--out-dir", str(tmp_path / "out")]) == 2


def test_synth_rejects_cell_outside_image(tmp_path):
    spec = _spec(tmp_path, rows=32, cols=32, cells=({"center": [40, 4], "radius": 3, "peak_height_um": 0.1},))

    assert main(["synth", str(spec), "--out-dir", str(tmp_path / "out")]) == 2


def test_reconstruct_round_trip(tmp_path):
    out_dir = _synth(tmp_path)
    result = tmp_path / "result"

    assert main(["reconstruct", str(out_dir / "hologram.qph"), "--out-dir", str(result)]) == 0

    truth = read_qph(out_dir / "phase.qph")
    phase = read_qph(result / "phase.qph")
    mask = read_mask_png(out_dir / "mask.png").mask
    error = phase[mask] - truth[mask]
    assert float(np.sqrt(np.mean((error - error.mean()) ** 2))) < 0.05
    for name in ("height.qph", "height.png", "amplitude.qph"):
        assert (result / name).exists()


def test_reconstruct_png16_output(tmp_path):
    out_dir = _synth(tmp_path, rows=128, cols=128, cells=())
    config = tmp_path / "png.json"
    config.write_text(json.dumps({"output_format": "png16"}))

    code = main(
        ["reconstruct", str(out_dir / "hologram.qph"), "--out-dir", str(tmp_path / "r"), "--config", str(config)]
    )

    assert code == 0
    assert (tmp_path / "r" / "phase.png").exists()
    assert (tmp_path / "r" / "phase.png.json").exists()


def test_reconstruct_cutout(tmp_path):
    out_dir = _synth(tmp_path)

    code = main(
        ["reconstruct", str(out_dir / "hologram.qph"), "--out-dir", str(tmp_path / "r"), "--cutout", "64", "192", "32", "224"]
    )

    assert code == 0
    assert read_qph(tmp_path / "r" / "phase.qph").shape == (128, 192)


def test_reconstruct_noise_has_no_lobes(tmp_path):
    noise = write_qph(tmp_path / "noise.qph", np.random.default_rng(12).normal(size=(128, 128)))

    assert main(["reconstruct", str(noise), "--out-dir", str(tmp_path / "r")]) == 3


def test_reconstruct_corrupt_file(tmp_path):
    path = write_qph(tmp_path / "h.qph", np.ones((64, 64)))
    path.write_bytes(b"JUNK" + path.read_bytes()[4:])

    assert main(["reconstruct", str(path), "--out-dir", str(tmp_path / "r")]) == 2


def test_reconstruct_missing_file(tmp_path):
    assert main(["reconstruct", str(tmp_path / "absent.qph"), "--out-dir", str(tmp_path / "r")]) == 2


def test_calibrate_then_reconstruct(tmp_path):
    empty = _synth(tmp_path, "empty", cells=(), tilt_x=0.01, tilt_y=-0.01)
    cell = _synth(tmp_path, "cell", tilt_x=0.01, tilt_y=-0.01)
    cal = tmp_path / "cal" / "cal.qph"

    assert main(["calibrate", str(empty / "hologram.qph"), "--out", str(cal)]) == 0
    assert (tmp_path / "cal" / "cal.qph.json").exists()
    assert read_qph(cal).shape == (512, 256)

    result = tmp_path / "result"
    code = main(["reconstruct", str(cell / "hologram.qph"), "--out-dir", str(result), "--calibration", str(cal)])
    assert code == 0

    # the calibrated reconstruction keeps the cell but drops the tilt
    truth = read_qph(cell / "phase.qph") - (0.01 * np.arange(256)[None, :] - 0.01 * np.arange(256)[:, None])
    phase = read_qph(result / "phase.qph")
    mask = read_mask_png(cell / "mask.png").mask
    error = phase[mask] - truth[mask]
    assert float(np.sqrt(np.mean((error - error.mean()) ** 2))) < 0.05


def test_patch_writes_layout(tmp_path):
    out_dir = _synth(tmp_path, "grid", "--grid", "2", "2", rows=128, cols=128, cells=())
    out = tmp_path / "patched" / "mosaic.qph"

    assert main(["patch", str(out_dir / "mosaic.json"), "--out", str(out)]) == 0

    layout = read_json(out.with_name("mosaic.qph.json"), PatchLayout)
    assert layout.patch_lines_r == [64] and layout.patch_lines_c == [64]
    assert read_qph(out).shape == (128, 128)


def test_patch_single_tile_is_identity(tmp_path):
    out_dir = _synth(tmp_path, "grid", "--grid", "1", "1", rows=64, cols=64, cells=())
    out = tmp_path / "one.qph"

    assert main(["patch", str(out_dir / "mosaic.json"), "--out", str(out)]) == 0

    assert out.read_bytes() == (out_dir / "tile_0_0.qph").read_bytes()


def test_patch_rejects_mixed_tile_sizes(tmp_path):
    write_qph(tmp_path / "a.qph", np.zeros((8, 8)))
    write_qph(tmp_path / "b.qph", np.zeros((8, 6)))
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"tile_rows": 8, "tile_cols": 8, "grid": [["a.qph", "b.qph"]]}))

    assert main(["patch", str(manifest), "--out", str(tmp_path / "o.qph")]) == 2


def test_patch_rejects_missing_tile(tmp_path):
    write_qph(tmp_path / "a.qph", np.zeros((8, 8)))
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"tile_rows": 8, "tile_cols": 8, "grid": [["a.qph", "gone.qph"]]}))

    assert main(["patch", str(manifest), "--out", str(tmp_path / "o.qph")]) == 2


def test_reconstruct_mosaic_reports_patch_lines(tmp_path):
    out_dir = _synth(tmp_path, "grid", "--grid", "2", "2", "--tile-tilt", "0.02")
    result = tmp_path / "result"

    assert main(["reconstruct", str(out_dir / "mosaic.json"), "--out-dir", str(result), "--strategy", "1"]) == 0

    text = (result / "patchlines.txt").read_text()
    assert "strategy 1" in text
    assert read_json(result / "phase.qph.json", PatchLayout).patch_lines_c == [128]
    assert read_qph(result / "amplitude.qph").shape == (256, 256)


def test_reconstruct_mosaic_flag_reads_any_manifest_name(tmp_path):
    out_dir = _synth(tmp_path, "grid", "--grid", "2", "2", rows=128, cols=128, cells=())
    manifest = out_dir / "mosaic.manifest"
    manifest.write_text((out_dir / "mosaic.json").read_text())
    result = tmp_path / "result"

    assert main(["reconstruct", str(manifest), "--mosaic", "--out-dir", str(result), "--strategy", "2"]) == 0

    assert read_qph(result / "phase.qph").shape == (128, 128)
    assert (result / "amplitude.qph").exists()
    assert "strategy 2" in (result / "patchlines.txt").read_text()


def test_eval_identical_maps(tmp_path, capsys):
    out_dir = _synth(tmp_path, rows=64, cols=64, cells=({"center": [32, 32], "radius": 12, "peak_height_um": 0.2},))
    report = tmp_path / "report.csv"

    code = main(
        ["eval", str(out_dir / "phase.qph"), str(out_dir / "phase.qph"), str(out_dir / "mask.png"), "--out", str(report)]
    )

    assert code == 0
    lines = report.read_text().splitlines()
    assert lines[0].split(",")[:4] == ["case_id", "n_pixels", "l1", "eps_mu"]
    assert lines[1].split(",")[2:4] == ["0", "0"]
    assert (tmp_path / "report.csv.txt").exists()
    assert "Median" in capsys.readouterr().out


def test_eval_corpus(tmp_path):
    out_dir = _synth(tmp_path, rows=64, cols=64, cells=({"center": [32, 32], "radius": 12, "peak_height_um": 0.2},))
    corpus = out_dir / "corpus.json"
    case = {"case_id": "c", "reference": "phase.qph", "candidate": "phase.qph", "mask": "mask.png"}
    corpus.write_text(json.dumps({"cases": [case, {**case, "case_id": "d", "candidate_mdi": "phase.qph"}]}))

    assert main(["eval", "--corpus", str(corpus), "--out", str(tmp_path / "r.csv")]) == 0
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 1 + 2 + 5


def test_eval_empty_mask(tmp_path):
    ref = write_qph(tmp_path / "ref.qph", np.zeros((16, 16)))
    mask = write_mask_png(tmp_path / "mask.png", CellMask(mask=np.zeros((16, 16))))

    assert main(["eval", str(ref), str(ref), str(mask), "--out", str(tmp_path / "r.csv")]) == 2


def test_eval_size_mismatch(tmp_path):
    ref = write_qph(tmp_path / "ref.qph", np.zeros((16, 16)))
    cand = write_qph(tmp_path / "cand.qph", np.zeros((16, 12)))
    mask = write_mask_png(tmp_path / "mask.png", CellMask(mask=np.ones((16, 16))))

    assert main(["eval", str(ref), str(cand), str(mask), "--out", str(tmp_path / "r.csv")]) == 2


def test_eval_needs_inputs(tmp_path):
    assert main(["eval", "--out", str(tmp_path / "r.csv")]) == 2

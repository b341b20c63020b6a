import csv
import json
import struct

import numpy as np
import pytest

from advmri import formats, report
from advmri.cli import main


def run(*argv):
    return main([str(a) for a in argv])


# --- CFI -------------------------------------------------------------------------


def test_cfi_round_trip_is_bitwise(tmp_path, rng):
    img = (rng.standard_normal((7, 5)) + 1j * rng.standard_normal((7, 5))).astype(np.complex64)
    p = tmp_path / "a.cfi"
    formats.write_cfi(p, img)
    back = formats.read_cfi(p)
    assert back.dtype == np.complex64 and back.tobytes() == img.tobytes()


def test_cfi_layout(tmp_path):
    p = tmp_path / "b.cfi"
    formats.write_cfi(p, np.array([[1 + 2j, 3 - 4j]]))
    raw = p.read_bytes()
    assert raw[:4] == b"CFI1"
    assert struct.unpack("<II", raw[4:12]) == (1, 2)
    assert struct.unpack("<4f", raw[12:]) == (1.0, 2.0, 3.0, -4.0)


def test_cfi_rejects_garbage(tmp_path):
    p = tmp_path / "c.cfi"
    p.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(ValueError):
        formats.read_cfi(p)
    p.write_bytes(b"CFI1" + struct.pack("<II", 2, 2) + bytes(8))  # truncated payload
    with pytest.raises(ValueError):
        formats.read_cfi(p)


# --- CSV / table -----------------------------------------------------------------


def test_csv_full_precision(tmp_path):
    p = tmp_path / "t.csv"
    formats.write_rows(p, ["v"], [{"v": 0.1 + 0.2}])
    assert float(formats.read_rows(p)[0]["v"]) == 0.1 + 0.2


def attack_row(alpha, lines=20, noise=0.04):
    return {f: 0 for f in formats.ATTACK_FIELDS} | {"alpha": alpha, "lines": lines, "noise_rel": noise}


def test_aggregate_single_row():
    (t,) = report.aggregate([attack_row(3.7)])
    assert t["alpha_mean"] == 3.7 and t["alpha_std"] == 0.0 and t["count"] == 1


def test_aggregate_two_rows_markdown():
    table = report.aggregate([attack_row(4), attack_row(6)])
    assert table[0]["alpha_std"] == pytest.approx(np.sqrt(2))
    assert "5.00 ± 1.41" in report.to_markdown(table)


def test_aggregate_matches_independent_recomputation(tmp_path, rng):
    rows = [attack_row(float(a), lines=int(ln), noise=float(nz))
            for a, ln, nz in zip(rng.uniform(1, 10, 30), rng.choice([10, 20, 40], 30), rng.choice([0.01, 0.04], 30))]
    for k in range(3):
        (tmp_path / f"run{k}").mkdir()
        formats.write_rows(tmp_path / f"run{k}" / "attacks.csv", formats.ATTACK_FIELDS, rows[10 * k:10 * (k + 1)])
    table = report.aggregate(report.collect_rows(tmp_path))
    # spreadsheet-style: plain loops over the raw csv text
    groups = {}
    for path in sorted(tmp_path.rglob("attacks.csv")):
        with open(path) as fh:
            for rec in csv.DictReader(fh):
                groups.setdefault((float(rec["noise_rel"]), int(rec["lines"])), []).append(float(rec["alpha"]))
    assert len(table) == len(groups)
    for t in table:
        vals = groups[(t["noise_rel"], t["lines"])]
        mean = sum(vals) / len(vals)
        std = (sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)) ** 0.5 if len(vals) > 1 else 0.0
        assert t["alpha_mean"] == pytest.approx(mean, rel=1e-12)
        assert t["alpha_std"] == pytest.approx(std, rel=1e-9, abs=1e-12)
    md = report.to_markdown(table).splitlines()
    assert len(md) == 2 + 2  # header, separator, one row per noise level
    assert md[0].count("lines") == 3


def test_collect_rows_empty(tmp_path):
    with pytest.raises(ValueError):
        report.collect_rows(tmp_path)


# --- rendering -------------------------------------------------------------------


def test_render_endpoints():
    img = np.array([[0.5, 1.0, 2.0, 0.0]])
    rgb = formats.render_rgb(img, vmax_excess=1.0)
    assert rgb[0, 0].tolist() == [128, 128, 128]
    assert rgb[0, 1].tolist() == [255, 255, 255]
    assert rgb[0, 2].tolist() == [255, 0, 0]
    assert rgb[0, 3].tolist() == [0, 0, 0]


def test_render_uses_modulus(tmp_path):
    img = np.full((3, 4), 0.5j)
    p = tmp_path / "m.ppm"
    formats.render(img, p)
    rgb = formats.read_ppm(p)
    assert rgb.shape == (3, 4, 3) and np.all(rgb == 128)


# --- CLI -------------------------------------------------------------------------


def digests(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


def test_phantom_cli_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("phantom", "--n", 64, "--seed", 1, "--count", 2, "--out", d) == 0
    files = digests(a)
    assert sorted(files) == ["phantom_0000.cfi", "phantom_0001.cfi"]
    assert files == digests(b)


def test_phantom_count_zero(tmp_path):
    assert run("phantom", "--n", 32, "--count", 0, "--out", tmp_path) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.json"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["runs"][0]["outputs"] == {}


def test_manifest_digest_matches_file(tmp_path):
    assert run("phantom", "--n", 256, "--seed", 7, "--out", tmp_path) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    (run_,) = manifest["runs"]
    assert run_["seed"] == 7 and run_["command"]["subcommand"] == "phantom"
    for name, digest in run_["outputs"].items():
        assert formats.sha256(tmp_path / name) == digest


def test_measure_reconstruct_render_pipeline(tmp_path):
    assert run("phantom", "--n", 32, "--seed", 3, "--out", tmp_path) == 0
    assert run("mask", "--n", 32, "--lines", 10, "--out", tmp_path) == 0
    assert run("measure", "--image", tmp_path / "phantom_0000.cfi", "--mask", tmp_path / "mask_32_10.cfi",
               "--noise-rel", 0.02, "--out", tmp_path) == 0
    assert run("reconstruct", "--measurements", tmp_path / "phantom_0000_y.cfi", "--mask", tmp_path / "mask_32_10.cfi",
               "--lam", 0.02, "--penalty", 0.2, "--iterations", 50, "--out", tmp_path) == 0
    z = formats.read_cfi(tmp_path / "phantom_0000_y_tv.cfi")
    assert z.shape == (32, 32)
    assert run("render", "--image", tmp_path / "phantom_0000_y_tv.cfi", "--out", tmp_path) == 0
    assert formats.read_ppm(tmp_path / "phantom_0000_y_tv.ppm").shape == (32, 32, 3)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [r["command"]["subcommand"] for r in manifest["runs"]] == [
        "phantom", "mask", "measure", "reconstruct", "render"]


def test_attack_cli(tmp_path):
    assert run("phantom", "--n", 64, "--seed", 0, "--out", tmp_path) == 0
    img = tmp_path / "phantom_0000.cfi"
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("attack", "--image", img, "--lines", 20, "--noise-rel", 0.04, "--grid", 1, 1, "--steps", 10,
                   "--lam", 0.0193, "--penalty", 0.193, "--out", out) == 0
        outs.append(out)
    assert digests(outs[0]) == digests(outs[1])
    (row,) = formats.read_rows(outs[0] / "attacks.csv")
    assert float(row["alpha"]) > 1
    centers = formats.read_rows(outs[0] / "phantom_0000_L20_eta0.04_centers.csv")
    assert len(centers) == 1
    run_ = json.loads((outs[0] / "manifest.json").read_text())["runs"][0]
    assert "wall_time" in run_["extra"]
    assert run("table", "--results", tmp_path, "--out", tmp_path / "t") == 0
    assert "| 4.0% |" in (tmp_path / "t" / "table.md").read_text()


def test_attack_auto_lambda_needs_calibration(tmp_path, capsys):
    assert run("phantom", "--n", 32, "--out", tmp_path) == 0
    with pytest.raises(SystemExit) as exc:
        run("attack", "--image", tmp_path / "phantom_0000.cfi", "--lines", 10, "--noise-rel", 0.04, "--out", tmp_path)
    assert exc.value.code == 2
    assert "calibration" in capsys.readouterr().err


def test_calibrate_then_attack(tmp_path):
    assert run("calibrate", "--n", 32, "--lines", 10, "--samples", 2, "--noise-rel", 0.04, "--iterations", 30,
               "--n-lambda", 3, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "calibration.json").read_text())
    assert len(rep["grid"]) == 9 and rep["chosen"] in rep["grid"]
    assert run("phantom", "--n", 32, "--out", tmp_path) == 0
    assert run("attack", "--image", tmp_path / "phantom_0000.cfi", "--lines", 10, "--noise-rel", 0.04, "--grid", 1, 1,
               "--steps", 3, "--iterations", 30, "--calibration", tmp_path / "calibration.json", "--out", tmp_path) == 0
    run_ = json.loads((tmp_path / "manifest.json").read_text())["runs"][-1]
    assert [run_["extra"]["lam"], run_["extra"]["penalty"]] == rep["chosen"]


def test_spike1d_cli(tmp_path, capsys):
    assert run("spike1d", "--n", 256, "--m", 32, "--out", tmp_path) == 0
    (row,) = formats.read_rows(tmp_path / "spike1d.csv")
    assert float(row["alpha"]) >= 8 * (1 - 1e-12)
    assert run("spike1d", "--n", 8, "--full", "--out", tmp_path) == 0
    (row,) = formats.read_rows(tmp_path / "spike1d.csv")
    assert float(row["alpha"]) == pytest.approx(1.0)


def test_recover1d_cli(tmp_path, caplog):
    assert run("recover1d", "--mode", "tv", "--n", 64, "--s", 2, "--freqs", "1,2,3,5,8,-4,-9,11,13,-17,20,-22,25",
               "--trials", 2, "--out", tmp_path) == 0
    assert "adding it" in caplog.text
    rows = formats.read_rows(tmp_path / "recover1d_tv.csv")
    assert len(rows) == 2


def test_table_without_rows_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("table", "--results", tmp_path, "--out", tmp_path)
    assert exc.value.code == 2

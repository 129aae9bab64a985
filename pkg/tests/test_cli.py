import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from speccam import io as sio
from speccam.calibration import TransformationMatrix, make_profile, write_profile_file
from speccam.cli import main
from speccam.phantom import CameraModel, generate_chart_scene, generate_dataset, synthetic_chart
from speccam.spectral import RgbImage, RgbTriple, Roi, SpectralCube, default_grid

G = default_grid()


@pytest.fixture
def chart_files(tmp_path):
    chart = synthetic_chart(24, seed=5)
    img, _ = generate_chart_scene(chart, CameraModel(seed=5))
    sio.write_chart_csv(chart, tmp_path / "chart.csv")
    sio.write_ppm(img, tmp_path / "chart.ppm")
    return tmp_path


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "d320.csv"
    sio.write_dataset_csv(generate_dataset(320, seed=42), path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def svg_ok(path):
    root = ET.parse(path).getroot()
    return root.tag.endswith("svg") and root.get("viewBox") == "0 0 800 600"


# -- calibrate ---------------------------------------------------------------

def test_calibrate_writes_profile(chart_files):
    out = chart_files / "p.json"
    assert run("calibrate", "--chart", chart_files / "chart.csv", "--image", chart_files / "chart.ppm",
               "--layout", "6x4", "--device", "phone", "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["device_model"] == "phone"
    assert np.array(d["matrix"]).shape == (27, 3)


def test_calibrate_uses_profile_store(chart_files, monkeypatch):
    store = chart_files / "store"
    monkeypatch.setenv("SPECCAM_PROFILE_DIR", str(store))
    assert run("calibrate", "--chart", chart_files / "chart.csv", "--image", chart_files / "chart.ppm",
               "--device", "pixel4") == 0
    assert (store / "pixel4.profile.json").is_file()
    img = chart_files / "one.ppm"
    sio.write_ppm(RgbImage.filled(2, 2, RgbTriple(100, 100, 100)), img)
    assert run("reconstruct", "--device", "pixel4", "--image", img, "--out", chart_files / "c.msc") == 0
    assert run("reconstruct", "--device", "unknown", "--image", img, "--out", chart_files / "c.msc") == 2


def test_calibrate_is_reproducible(chart_files):
    args = ["calibrate", "--chart", chart_files / "chart.csv", "--image", chart_files / "chart.ppm", "--device", "d"]
    run(*args, "--out", chart_files / "a.json")
    run(*args, "--out", chart_files / "b.json")
    assert (chart_files / "a.json").read_bytes() == (chart_files / "b.json").read_bytes()


def test_overexposed_block_warns_and_strict_fails(chart_files, capsys):
    chart = sio.read_chart_csv(chart_files / "chart.csv")
    img, truth = generate_chart_scene(chart, CameraModel(gain=4.0, noise_sigma=0))
    sio.write_ppm(img, chart_files / "hot.ppm")
    args = ["calibrate", "--chart", chart_files / "chart.csv", "--image", chart_files / "hot.ppm",
            "--device", "d", "--out", chart_files / "hot.json"]
    assert run(*args) == 0
    err = capsys.readouterr().err
    hot = [b for b, t in zip(truth.block_ids, truth.rgb) if max(t.r, t.g, t.b) >= 255]
    assert hot and all(f"block {b} is overexposed" in err for b in hot)
    assert run(*args, "--strict") == 2


def test_missing_chart_is_io_error(chart_files, capsys):
    code = run("calibrate", "--chart", chart_files / "nope.csv", "--image", chart_files / "chart.ppm",
               "--device", "d", "--out", chart_files / "x.json")
    assert code == 3
    assert "nope.csv" in capsys.readouterr().err


def test_singular_chart_is_domain_error(chart_files):
    grey = np.zeros((144, 96, 3))  # black frame has no colour information
    sio.write_ppm(RgbImage(grey), chart_files / "grey.ppm")
    code = run("calibrate", "--chart", chart_files / "chart.csv", "--image", chart_files / "grey.ppm",
               "--device", "d", "--out", chart_files / "x.json")
    assert code == 2


# -- reconstruct ---------------------------------------------------------------

def _identity_profile(path):
    w = np.zeros((27, 3))
    w[:, 0] = 1 / 255  # every band reads the red channel
    write_profile_file(make_profile("id", TransformationMatrix(G, w), "none"), path)


def test_reconstruct_single_white_pixel(tmp_path):
    _identity_profile(tmp_path / "p.json")
    sio.write_ppm(RgbImage.filled(1, 1, RgbTriple(255, 255, 255)), tmp_path / "w.ppm")
    assert run("reconstruct", "--profile", tmp_path / "p.json", "--image", tmp_path / "w.ppm",
               "--out", tmp_path / "w.msc") == 0
    cube = sio.read_cube(tmp_path / "w.msc")
    assert (cube.width, cube.height) == (1, 1)
    np.testing.assert_allclose(cube.data[:, 0, 0], 1.0, rtol=1e-7)


def test_reconstruct_is_byte_identical(tmp_path, rng):
    _identity_profile(tmp_path / "p.json")
    sio.write_ppm(RgbImage(rng.integers(0, 256, (20, 30, 3)).astype(float)), tmp_path / "i.ppm")
    for name in ("a.msc", "b.msc"):
        run("reconstruct", "--profile", tmp_path / "p.json", "--image", tmp_path / "i.ppm", "--out", tmp_path / name)
    assert (tmp_path / "a.msc").read_bytes() == (tmp_path / "b.msc").read_bytes()


def test_reconstruct_malformed_profile(tmp_path):
    (tmp_path / "p.json").write_text('{"device_model": 1}')
    sio.write_ppm(RgbImage.filled(1, 1, RgbTriple(1, 1, 1)), tmp_path / "i.ppm")
    assert run("reconstruct", "--profile", tmp_path / "p.json", "--image", tmp_path / "i.ppm",
               "--out", tmp_path / "o.msc") == 2


# -- extract -----------------------------------------------------------------

def _read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_extract_constant_cube(tmp_path):
    sio.write_cube(SpectralCube(G, np.full((27, 6, 6), 0.25)), tmp_path / "c.msc")
    (tmp_path / "r.csv").write_text("x,y,side\n1,1,3\n")
    assert run("extract", "--cube", tmp_path / "c.msc", "--rois", tmp_path / "r.csv", "--out", tmp_path / "s.csv") == 0
    rows = _read_rows(tmp_path / "s.csv")
    assert rows[-1][0] == "aggregate"
    assert [float(v) for v in rows[-1][6:]] == [0.25] * 27


def test_extract_ten_rois(tmp_path, rng):
    sio.write_cube(SpectralCube(G, rng.uniform(0, 1, (27, 40, 40))), tmp_path / "c.msc")
    sio.write_roi_csv([(str(i % 2), Roi(3 * i, 2 * i, 8)) for i in range(10)], tmp_path / "r.csv")
    assert run("extract", "--cube", tmp_path / "c.msc", "--rois", tmp_path / "r.csv", "--out", tmp_path / "s.csv") == 0
    assert len(_read_rows(tmp_path / "s.csv")) == 1 + 11


def test_extract_out_of_bounds_names_row(tmp_path, capsys):
    sio.write_cube(SpectralCube(G, np.zeros((27, 10, 10))), tmp_path / "c.msc")
    (tmp_path / "r.csv").write_text("x,y,side\n0,0,5\n8,8,5\n")
    assert run("extract", "--cube", tmp_path / "c.msc", "--rois", tmp_path / "r.csv", "--out", tmp_path / "s.csv") == 2
    assert "row 2" in capsys.readouterr().err


def test_extract_quality_gate(tmp_path):
    px = np.full((20, 20, 3), 150.0)
    px[:, 10:] = 0.0  # dark right half
    sio.write_ppm(RgbImage(px), tmp_path / "i.ppm")
    sio.write_cube(SpectralCube(G, np.zeros((27, 20, 20))), tmp_path / "c.msc")
    (tmp_path / "r.csv").write_text("x,y,side\n0,0,8\n12,0,8\n")
    args = ["extract", "--cube", tmp_path / "c.msc", "--rois", tmp_path / "r.csv", "--image", tmp_path / "i.ppm"]
    assert run(*args, "--out", tmp_path / "s.csv") == 0
    rows = _read_rows(tmp_path / "s.csv")
    assert rows[1][5] == "accept" and rows[2][5] == "reject:under-illuminated"
    assert rows[3][5] == "n=1"
    (tmp_path / "r.csv").write_text("x,y,side\n12,0,8\n")
    assert run(*args, "--out", tmp_path / "t.csv") == 2


# -- simulate ----------------------------------------------------------------

def test_simulate_is_deterministic(tmp_path):
    run("simulate", "--n", 320, "--seed", 7, "--out", tmp_path / "a.csv")
    run("simulate", "--n", 320, "--seed", 7, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len(_read_rows(tmp_path / "a.csv")) == 321


def test_simulate_chart_test(tmp_path, capsys):
    assert run("simulate", "--n", 20, "--out", tmp_path / "a.csv", "--chart-test") == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("chart test")][0]
    assert line.endswith("PASS")
    assert float(line.split("mean RMSE ")[1].split()[0]) < 0.04


def test_simulate_rejects_small_n(tmp_path):
    assert run("simulate", "--n", 10, "--out", tmp_path / "a.csv") == 2


def test_bad_flag_exits_2(tmp_path):
    assert run("simulate", "--n", "ten", "--out", tmp_path / "a.csv") == 2


# -- evaluate ------------------------------------------------------------------

def test_evaluate_predicts_every_record_once(tmp_path, dataset_csv):
    out = tmp_path / "r.json"
    assert run("evaluate", "--dataset", dataset_csv, "--mode", "rgbl", "--model", "knn", "--folds", 10,
               "--out", out, "--plots", tmp_path / "plots") == 0
    rep = json.loads(out.read_text())
    assert sorted(p["id"] for p in rep["predictions"]) == list(range(320))
    assert rep["roc"]["threshold"] == 17.1
    assert set(rep["agreement"]) >= {"r", "md", "loa_upper", "loa_lower", "std_md", "p_value"}
    svgs = sorted(p.name for p in (tmp_path / "plots").iterdir())
    assert svgs == ["bland_altman_rgbl_knn.svg", "roc_rgbl_knn.svg", "scatter_rgbl_knn.svg"]
    assert all(svg_ok(tmp_path / "plots" / s) for s in svgs)


def test_evaluate_is_byte_identical(tmp_path, dataset_csv):
    for name in ("a.json", "b.json"):
        run("evaluate", "--dataset", dataset_csv, "--model", "svr", "--seed", 3, "--out", tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


@pytest.mark.slow
def test_evaluate_hybrid_sal_default_set(tmp_path, dataset_csv):
    out = tmp_path / "r.json"
    assert run("evaluate", "--dataset", dataset_csv, "--mode", "sal", "--model", "hybrid", "--out", out) == 0
    assert json.loads(out.read_text())["agreement"]["r"] >= 0.9


# -- learning-curve ------------------------------------------------------------

def test_learning_curve_default_fractions(tmp_path, dataset_csv):
    out = tmp_path / "curve.csv"
    assert run("learning-curve", "--dataset", dataset_csv, "--model", "knn", "--out", out,
               "--plots", tmp_path / "plots") == 0
    rows = _read_rows(out)
    assert rows[0] == ["mode", "fraction", "n", "r", "md", "std_md"]
    assert len(rows) == 31
    assert [int(r[2]) for r in rows[1:16]] == list(range(40, 321, 20))
    side = json.loads((tmp_path / "curve.stability.json").read_text())
    assert set(side["stability_std"]) == {"sal", "rgbl"}
    assert all(svg_ok(p) for p in (tmp_path / "plots").iterdir())


def test_learning_curve_single_fraction(tmp_path, dataset_csv):
    out = tmp_path / "curve.csv"
    assert run("learning-curve", "--dataset", dataset_csv, "--model", "knn", "--from", 1.0, "--to", 1.0,
               "--out", out) == 0
    assert len(_read_rows(out)) == 3


def test_learning_curve_too_small(tmp_path):
    path = tmp_path / "d.csv"
    sio.write_dataset_csv(generate_dataset(40, seed=1), path)
    assert run("learning-curve", "--dataset", path, "--model", "knn", "--out", tmp_path / "c.csv") == 2

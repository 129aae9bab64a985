import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speccam.calibration import (
    ChartLayout,
    ChartSamples,
    Exposure,
    TransformationMatrix,
    chart_from_arrays,
    load_profile,
    make_profile,
    profile_path,
    read_profile_file,
    sample_chart,
    save_profile,
    validate_exposure,
    wiener_matrix,
    wiener_tm,
)
from speccam.errors import (
    ChartMismatch,
    LayoutTooFine,
    ProfileCorrupt,
    ProfileNotFound,
    SingularCalibration,
)
from speccam.phantom import CameraModel, generate_chart_scene, synthetic_chart
from speccam.spectral import RgbImage, RgbTriple, default_grid

G = default_grid()


def samples_from(rgb: np.ndarray, ids) -> ChartSamples:
    return ChartSamples("t", tuple(ids), tuple(RgbTriple.from_array(t) for t in rgb))


def random_chart_pair(rng, n=24):
    """Well-conditioned random responses with matching reflectance rows."""
    rgb = rng.uniform(20, 230, (n, 3))
    refl = rng.uniform(0.05, 0.9, (n, 27))
    ids = [f"b{i}" for i in range(n)]
    return chart_from_arrays("rand", ids, refl, G), samples_from(rgb, ids)


def normal_equations_oracle(v, s):
    # solve (V V^T) W^T = V S^T with LAPACK rather than an adjugate
    return np.linalg.solve(v @ v.T, v @ s.T).T


# -- layout -----------------------------------------------------------------

def test_layout_parse_and_standard_sizes():
    assert ChartLayout.parse("6x4") == ChartLayout(6, 4)
    assert ChartLayout.parse(" 12X8 ").size == 96
    assert ChartLayout.for_blocks(24) == ChartLayout(6, 4)
    assert ChartLayout.for_blocks(96) == ChartLayout(12, 8)
    with pytest.raises(ValueError):
        ChartLayout.parse("6by4")
    with pytest.raises(ChartMismatch):
        ChartLayout.for_blocks(30)


def test_chart_requires_standard_block_count(rng):
    with pytest.raises(ChartMismatch):
        chart_from_arrays("x", [str(i) for i in range(10)], rng.uniform(0, 1, (10, 27)))
    with pytest.raises(ChartMismatch):
        chart_from_arrays("x", ["a"] * 24, rng.uniform(0, 1, (24, 27)))


# -- exposure ---------------------------------------------------------------

def test_exposure_verdicts():
    s = samples_from(np.array([[255, 120, 80], [99, 60, 40], [180, 150, 90], [100, 0, 0]]), "abcd")
    verdicts = dict(validate_exposure(s))
    assert verdicts == {
        "a": Exposure.OVEREXPOSED,
        "b": Exposure.UNDEREXPOSED,
        "c": Exposure.OK,
        "d": Exposure.OK,
    }


# -- Wiener -----------------------------------------------------------------

def test_exactly_determined_system_recovers_map(rng):
    a = rng.uniform(-0.004, 0.006, (27, 3))
    v = np.array([[200.0, 30, 10], [20, 180, 40], [15, 25, 160]]).T
    w = wiener_matrix(v, a @ v, ridge=0)
    np.testing.assert_allclose(w, a, rtol=0, atol=1e-9)


def test_synthetic_chart_gives_27x3():
    chart = synthetic_chart(24)
    img, truth = generate_chart_scene(chart, CameraModel(noise_sigma=0))
    tm = wiener_tm(truth, chart)
    assert tm.w.shape == (27, 3)


def test_matches_normal_equations_oracle(rng):
    chart, samples = random_chart_pair(rng)
    tm = wiener_tm(samples, chart, ridge=0)
    oracle = normal_equations_oracle(samples.response_matrix(), chart.reflectance_matrix())
    np.testing.assert_allclose(tm.w, oracle, rtol=0, atol=1e-9)


def test_default_ridge_is_negligible_on_good_charts(rng):
    chart, samples = random_chart_pair(rng)
    np.testing.assert_allclose(
        wiener_tm(samples, chart).w, wiener_tm(samples, chart, ridge=0).w, rtol=1e-6
    )


def test_residual_orthogonal_to_responses(rng):
    chart, samples = random_chart_pair(rng)
    v, s = samples.response_matrix(), chart.reflectance_matrix()
    w = wiener_tm(samples, chart, ridge=0).w
    resid = s - w @ v
    np.testing.assert_allclose(resid @ v.T / v.shape[1], 0, atol=1e-9)


@given(st.floats(0.05, 20.0), st.integers(0, 2**32 - 1))
def test_scale_equivariance(g, seed):
    rng = np.random.default_rng(seed)
    chart, samples = random_chart_pair(rng)
    for ridge in (0.0, 1e-8):
        w = wiener_tm(samples, chart, ridge=ridge).w
        w_g = wiener_tm(samples.scaled(g), chart, ridge=ridge).w
        # relative to the matrix scale; single entries can sit near zero
        np.testing.assert_allclose(w_g, w / g, rtol=0, atol=1e-12 * np.abs(w / g).max())


def test_permutation_invariance(rng):
    chart, samples = random_chart_pair(rng)
    perm = rng.permutation(24)
    chart_p = chart_from_arrays(
        "p", [chart.block_ids[i] for i in perm], chart.reflectance_matrix().T[perm], G
    )
    samples_p = samples_from(samples.response_matrix().T[perm], chart_p.block_ids)
    np.testing.assert_allclose(
        wiener_tm(samples_p, chart_p).w, wiener_tm(samples, chart).w, rtol=1e-12
    )


def test_singular_and_mismatched(rng):
    chart, _ = random_chart_pair(rng)
    grey = samples_from(np.tile([[100.0, 100.0, 100.0]], (24, 1)) * rng.uniform(0.5, 1.5, (24, 1)), chart.block_ids)
    with pytest.raises(SingularCalibration):
        wiener_tm(grey, chart, ridge=0)
    wrong = samples_from(rng.uniform(20, 200, (24, 3)), [f"z{i}" for i in range(24)])
    with pytest.raises(ChartMismatch):
        wiener_tm(wrong, chart)
    with pytest.raises(SingularCalibration):
        wiener_matrix(np.ones((3, 2)), np.ones((27, 2)))


# -- chart sampling ---------------------------------------------------------

def test_flat_cells_sampled_exactly(rng):
    colours = rng.integers(0, 256, (24, 3)).astype(float)
    img = np.repeat(np.repeat(colours.reshape(6, 4, 3), 20, axis=0), 20, axis=1)
    s = sample_chart(RgbImage(img), ChartLayout(6, 4), margin_fraction=0.25)
    np.testing.assert_allclose(s.response_matrix().T, colours, rtol=1e-12)


def test_96_cells_row_major(rng):
    colours = rng.integers(0, 256, (96, 3)).astype(float)
    img = np.repeat(np.repeat(colours.reshape(12, 8, 3), 16, axis=0), 16, axis=1)
    chart = synthetic_chart(96)
    s = sample_chart(RgbImage(img), ChartLayout.parse("12x8"), chart=chart)
    assert len(s) == 96 and s.block_ids == chart.block_ids
    np.testing.assert_allclose(s.response_matrix().T, colours, rtol=1e-12)


def test_noisy_border_is_excluded(rng):
    core = np.array([120.0, 80.0, 60.0])
    cell = rng.uniform(0, 255, (20, 20, 3))
    cell[5:15, 5:15] = core  # centred 50 % core
    img = np.tile(cell, (6, 4, 1))
    s = sample_chart(RgbImage(img), ChartLayout(6, 4), margin_fraction=0.3)
    for t in s.rgb:
        np.testing.assert_allclose(t.as_array(), core, rtol=1e-12)


def test_layout_too_fine():
    img = RgbImage(np.zeros((24, 16, 3)))
    with pytest.raises(LayoutTooFine):
        sample_chart(img, ChartLayout(6, 4))


def test_chart_size_must_match_layout():
    img = RgbImage(np.zeros((120, 80, 3)))
    with pytest.raises(ChartMismatch):
        sample_chart(img, ChartLayout(12, 8), chart=synthetic_chart(24))


# -- profile store ----------------------------------------------------------

def _profile(model, rng):
    tm = TransformationMatrix(G, rng.normal(0, 1e-3, (27, 3)))
    return make_profile(model, tm, "chart", created_at=dt.datetime(2024, 1, 2, 3, 4, 5, tzinfo=dt.timezone.utc))


def test_profile_round_trip_bit_exact(tmp_path, rng):
    p = _profile("pixel4", rng)
    path = save_profile(p, tmp_path)
    assert path == tmp_path / "pixel4.profile.json"
    q = load_profile("pixel4", tmp_path)
    assert q.tm == p.tm
    assert q.created_at == p.created_at
    assert (q.device_model, q.illuminant, q.chart_name) == ("pixel4", "flashlight", "chart")
    fields = json.loads(path.read_text())
    assert set(fields) == {"device_model", "illuminant", "chart_name", "wavelengths", "matrix", "created_at"}
    assert len(fields["wavelengths"]) == 27 and len(fields["matrix"]) == 27


def test_profiles_coexist(tmp_path, rng):
    a, b = _profile("a", rng), _profile("b", rng)
    save_profile(a, tmp_path)
    save_profile(b, tmp_path)
    assert load_profile("a", tmp_path).tm == a.tm
    assert load_profile("b", tmp_path).tm == b.tm


def test_missing_and_corrupt_profiles(tmp_path):
    with pytest.raises(ProfileNotFound):
        load_profile("nope", tmp_path)
    bad = profile_path("bad", tmp_path)
    bad.write_text("{not json")
    with pytest.raises(ProfileCorrupt):
        read_profile_file(bad)
    bad.write_text(json.dumps({"device_model": "bad"}))
    with pytest.raises(ProfileCorrupt):
        load_profile("bad", tmp_path)
    with pytest.raises(ValueError):
        profile_path("../escape", tmp_path)

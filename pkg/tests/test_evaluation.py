import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from speccam.errors import DegenerateRoc, EmptyInput, GridMismatch, UndefinedCorrelation
from speccam.evaluation import (
    DEFAULT_FRACTIONS,
    LOA_Z,
    CurvePoint,
    LearningCurve,
    agreement_report,
    bland_altman,
    fraction_grid,
    learning_curve,
    pearson,
    prediction_band_95,
    roc,
    roc_curve,
    spectral_rmse,
    stability_summary,
    t_quantile,
    t_sf_two_sided,
)
from speccam.regression.cv import PredictionPairs, cross_validated_predictions
from speccam.regression.data import FeatureMode
from speccam.regression.models import ModelSpec
from speccam.spectral import Spectrum, WavelengthGrid, default_grid


def t_pdf(x, dof):
    c = math.exp(math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2)) / math.sqrt(dof * math.pi)
    return c * (1 + x * x / dof) ** (-(dof + 1) / 2)


def pearson_oracle(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def auroc_oracle(truth, scores, threshold=17.1):
    pos = [s for t, s in zip(truth, scores) if t > threshold]
    neg = [s for t, s in zip(truth, scores) if t <= threshold]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


# -- Pearson ------------------------------------------------------------------

def test_pearson_perfect(rng):
    x = rng.normal(size=20)
    r, p = pearson(PredictionPairs(x, x))
    assert r == pytest.approx(1.0, abs=1e-15) and p == pytest.approx(0.0, abs=1e-12)
    r, _ = pearson(PredictionPairs(x, -x))
    assert r == pytest.approx(-1.0, abs=1e-15)


def test_pearson_against_oracles(rng):
    x = rng.normal(size=10)
    y = 0.5 * x + rng.normal(size=10)
    r, p = pearson(PredictionPairs(x, y))
    assert r == pytest.approx(pearson_oracle(x, y), abs=1e-12)
    t = r * math.sqrt(8 / (1 - r * r))
    tail, _ = integrate.quad(t_pdf, abs(t), np.inf, args=(8,), epsabs=1e-13, epsrel=1e-12)
    assert p == pytest.approx(2 * tail, abs=1e-8)


def test_t_helpers_frozen_values():
    # two-sided 5 % critical values from standard t tables
    assert t_quantile(0.975, 8) == pytest.approx(2.306004135, abs=1e-8)
    assert t_quantile(0.975, 48) == pytest.approx(2.010634758, abs=1e-8)
    assert t_sf_two_sided(2.306004135, 8) == pytest.approx(0.05, abs=1e-9)


def test_pearson_degenerate():
    with pytest.raises(UndefinedCorrelation):
        pearson(PredictionPairs([1, 2], [1, 2]))
    with pytest.raises(UndefinedCorrelation):
        pearson(PredictionPairs([1, 2, 3], [5, 5, 5]))


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=15), rng.normal(size=15)
    r, _ = pearson(PredictionPairs(x, y))
    r2, _ = pearson(PredictionPairs(a * x + b, y))
    r3, _ = pearson(PredictionPairs(x, a * y + b))
    assert r2 == pytest.approx(r, abs=1e-12)
    assert r3 == pytest.approx(r, abs=1e-12)


# -- Bland-Altman -------------------------------------------------------------

def test_bland_altman_identical():
    ba = bland_altman(PredictionPairs([1, 2, 3], [1, 2, 3]))
    assert (ba.md, ba.loa_lower, ba.loa_upper) == (0.0, 0.0, 0.0)


def test_bland_altman_hand_values():
    ba = bland_altman(PredictionPairs([0, 0], [2, -2]))
    assert ba.md == 0.0
    assert ba.std_md == pytest.approx(2.8284271247, abs=1e-9)
    assert ba.loa_upper == pytest.approx(5.5437171645, abs=1e-9)
    assert ba.loa_lower == pytest.approx(-5.5437171645, abs=1e-9)


def test_bland_altman_sign_convention():
    ba = bland_altman(PredictionPairs([10, 20, 30], [11, 21, 31]))
    assert ba.md == pytest.approx(1.0)


def test_bland_altman_direct_oracle(rng):
    t, p = rng.uniform(0, 400, 30), rng.uniform(0, 400, 30)
    d = [b - a for a, b in zip(t, p)]
    md = sum(d) / 30
    sd = math.sqrt(sum((v - md) ** 2 for v in d) / 29)
    ba = bland_altman(PredictionPairs(t, p))
    assert ba.md == pytest.approx(md, abs=1e-12)
    assert ba.std_md == pytest.approx(sd, abs=1e-12)
    assert ba.loa_upper - ba.loa_lower == pytest.approx(2 * LOA_Z * ba.std_md, rel=1e-15, abs=1e-12)


def test_agreement_report_fields(rng):
    t = rng.uniform(0, 100, 20)
    rep = agreement_report(PredictionPairs(t, t + rng.normal(0, 5, 20)))
    assert set(rep.to_dict()) == {"r", "p_value", "md", "loa_upper", "loa_lower", "std_md", "n"}
    assert rep.n == 20
    with pytest.raises(EmptyInput):
        bland_altman(PredictionPairs([1.0], [1.0]))


# -- ROC ------------------------------------------------------------------------

def test_roc_perfect_and_tied():
    truth = np.array([5, 10, 20, 30, 40.0])
    assert roc(PredictionPairs(truth, truth)).auroc == 1.0
    assert roc(PredictionPairs(truth, np.full(5, 3.0))).auroc == 0.5


def test_roc_threshold_is_strict():
    rep = roc(PredictionPairs([17.1, 17.2, 5.0], [1.0, 2.0, 0.0]))
    assert (rep.n_positive, rep.n_negative) == (1, 2)


def test_roc_against_pair_counting(rng):
    truth = rng.uniform(0, 40, 12)
    scores = rng.integers(0, 6, 12).astype(float)  # plenty of ties
    if not (truth > 17.1).any() or (truth > 17.1).all():
        truth[0], truth[1] = 5.0, 30.0
    assert roc(PredictionPairs(truth, scores)).auroc == pytest.approx(auroc_oracle(truth, scores), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_roc_invariances(seed):
    rng = np.random.default_rng(seed)
    labels = rng.random(20) < 0.5
    labels[:2] = [True, False]
    scores = np.round(rng.normal(size=20), 1)
    _, _, auc = roc_curve(labels, scores)
    _, _, auc_mono = roc_curve(labels, np.exp(3 * scores) + 1)
    _, _, auc_flip = roc_curve(~labels, scores)
    assert auc_mono == pytest.approx(auc, abs=1e-12)
    assert auc_flip == pytest.approx(1 - auc, abs=1e-12)


def test_roc_curve_endpoints():
    fpr, tpr, _ = roc_curve([True, False, True, False], [0.9, 0.8, 0.4, 0.1])
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0, 0, 1, 1)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)


def test_roc_single_class():
    with pytest.raises(DegenerateRoc):
        roc(PredictionPairs([1, 2, 3], [1, 2, 3]))


# -- prediction band -----------------------------------------------------------

def test_band_collapses_without_residuals():
    x = np.linspace(0, 10, 8)
    band = prediction_band_95(PredictionPairs(x, x))
    assert np.all(band.half_width(x) < 1e-9)


def test_band_shape(rng):
    x = rng.uniform(0, 100, 25)
    band = prediction_band_95(PredictionPairs(x, x + rng.normal(0, 5, 25)))
    grid = np.linspace(band.x_mean, band.x_mean + 80, 30)
    h = band.half_width(grid)
    assert np.all(np.diff(h) > 0)
    assert band.half_width(band.x_mean) <= band.half_width(band.x_mean - 10)


def test_band_coverage_monte_carlo(rng):
    x = np.linspace(0, 9, 10)
    sigma = 2.0
    hits = 0
    for _ in range(1000):
        y = 1.5 * x + 3 + rng.normal(0, sigma, 10)
        band = prediction_band_95(PredictionPairs(x, y))
        x_new = rng.uniform(0, 9)
        y_new = 1.5 * x_new + 3 + rng.normal(0, sigma)
        lo, hi = band(x_new)
        hits += lo <= y_new <= hi
    assert abs(hits / 1000 - 0.95) <= 0.03


# -- spectral RMSE ----------------------------------------------------------------

def test_spectral_rmse_examples(rng):
    a = Spectrum.constant(0.4)
    assert spectral_rmse(a, a) == 0.0
    assert spectral_rmse(Spectrum.constant(0.5), a) == pytest.approx(0.1, abs=1e-15)
    u, v = rng.uniform(0, 1, 27), rng.uniform(0, 1, 27)
    oracle = math.sqrt(sum((p - q) ** 2 for p, q in zip(u, v)) / 27)
    g = default_grid()
    assert spectral_rmse(Spectrum(g, u), Spectrum(g, v)) == pytest.approx(oracle, abs=1e-15)
    with pytest.raises(GridMismatch):
        spectral_rmse(a, Spectrum(WavelengthGrid(tuple(range(27))), np.zeros(27)))


# -- learning curves -------------------------------------------------------------

def test_fraction_grid_defaults():
    assert len(DEFAULT_FRACTIONS) == 15
    assert DEFAULT_FRACTIONS[0] == 0.125 and DEFAULT_FRACTIONS[-1] == 1.0
    assert fraction_grid(1.0, 1.0, 0.0625) == (1.0,)
    with pytest.raises(ValueError):
        fraction_grid(0.5, 0.25, 0.1)


def test_single_fraction_equals_plain_cv(small_dataset):
    spec = ModelSpec("knn")
    curve = learning_curve(small_dataset, spec, fractions=(1.0,), k=5, seed=7)
    plain = cross_validated_predictions(small_dataset, spec, "sal", 5, 7)
    r, _ = pearson(plain)
    ba = bland_altman(plain)
    point = curve.points["sal"][0]
    assert (point.n, point.r, point.md, point.std_md) == (60, r, ba.md, ba.std_md)


def test_modes_share_subsets(small_dataset):
    curve = learning_curve(small_dataset, ModelSpec("knn"), fractions=(0.5, 0.75, 1.0), k=5, seed=1)
    assert len(curve.subset_ids) == 3
    for i in range(3):
        assert np.array_equal(curve.pairs[("sal", i)].ids, curve.pairs[("rgbl", i)].ids)
        assert np.array_equal(curve.pairs[("sal", i)].ids, curve.subset_ids[i])


def test_identical_features_give_identical_series(small_dataset):
    curve = learning_curve(
        small_dataset, ModelSpec("knn"), fractions=(0.5, 1.0), k=5, seed=2,
        features={FeatureMode.RGBL: FeatureMode.SAL},
    )
    for index in ("r", "md", "std_md"):
        assert np.array_equal(curve.series("sal", index), curve.series("rgbl", index))


def test_too_small_for_cv(small_dataset):
    with pytest.raises(EmptyInput):
        learning_curve(small_dataset, ModelSpec("knn"), fractions=(0.125,), k=10)


def test_stability_summary_hand_values():
    def pts(rs):
        return [CurvePoint(0.5, 10, r, 1.0, 2.0) for r in rs]

    curve = LearningCurve((0.5, 1.0), {"sal": pts([0.8, 1.0]), "rgbl": pts([0.9, 0.9])})
    s = stability_summary(curve)
    assert s["sal"]["r"] == pytest.approx(0.1414213562, abs=1e-10)
    assert s["rgbl"] == {"r": 0.0, "md": 0.0, "std_md": 0.0}
    with pytest.raises(EmptyInput):
        stability_summary(LearningCurve((1.0,), {"sal": pts([0.8])}))

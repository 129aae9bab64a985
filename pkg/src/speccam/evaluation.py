"""Agreement and diagnostic statistics, learning curves.

Conventions: Bland-Altman differences are ``prediction - truth``; every
standard deviation uses the n - 1 denominator; the ROC positive class is
``truth > threshold`` (strict).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import (
    DegenerateRoc,
    EmptyInput,
    GridMismatch,
    UndefinedCorrelation,
    UndefinedRegression,
)
from .regression.cv import PredictionPairs, cross_validated_predictions, resample_fraction
from .regression.data import FeatureMode
from .regression.models import ModelSpec
from .seeding import derive_seed
from .spectral import Spectrum

LOA_Z = 1.96
BBL_THRESHOLD_UMOL_L = 17.1


def _as_pairs(pairs) -> PredictionPairs:
    if isinstance(pairs, PredictionPairs):
        return pairs
    return PredictionPairs.from_pairs(pairs)


def t_sf_two_sided(t: float, dof: float) -> float:
    """P(|T| > |t|) for Student's t, via the regularised incomplete beta."""
    if not np.isfinite(t):
        return 0.0
    return float(special.betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def t_quantile(q: float, dof: float) -> float:
    return float(special.stdtrit(dof, q))


def pearson(pairs) -> tuple[float, float]:
    """Sample correlation and its two-sided p-value (t test, n - 2 dof)."""
    pp = _as_pairs(pairs)
    n = len(pp)
    if n < 3:
        raise UndefinedCorrelation(f"need at least 3 pairs, got {n}")
    x = pp.truth - pp.truth.mean()
    y = pp.prediction - pp.prediction.mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("a column is constant")
    r = float(np.clip((x @ y) / np.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf_two_sided(t, n - 2)


@dataclass(frozen=True)
class BlandAltman:
    md: float
    std_md: float
    loa_upper: float
    loa_lower: float
    n: int


def bland_altman(pairs) -> BlandAltman:
    pp = _as_pairs(pairs)
    if len(pp) < 2:
        raise EmptyInput("Bland-Altman needs at least 2 pairs")
    d = pp.prediction - pp.truth
    md = float(d.mean())
    sd = float(d.std(ddof=1))
    half = LOA_Z * sd
    return BlandAltman(md, sd, md + half, md - half, len(pp))


@dataclass(frozen=True)
class AgreementReport:
    r: float
    p_value: float
    md: float
    loa_upper: float
    loa_lower: float
    std_md: float
    n: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def agreement_report(pairs) -> AgreementReport:
    r, p = pearson(pairs)
    ba = bland_altman(pairs)
    return AgreementReport(r, p, ba.md, ba.loa_upper, ba.loa_lower, ba.std_md, ba.n)


@dataclass(frozen=True, eq=False)
class RocReport:
    threshold: float
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float
    n_positive: int
    n_negative: int

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "auroc": self.auroc,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "points": [list(p) for p in self.points],
        }


def roc_curve(labels, scores) -> tuple[np.ndarray, np.ndarray, float]:
    """ROC points swept over distinct score cutoffs, and trapezoid AUROC.

    Tied scores move along the diagonal of their block, so the area counts
    each positive/negative tie as one half.
    """
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateRoc("both classes must be present")
    order = np.argsort(-scores, kind="stable")
    s, lab = scores[order], labels[order]
    # last index of each block of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(lab)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    auroc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return fpr, tpr, auroc


def roc(pairs, threshold: float = BBL_THRESHOLD_UMOL_L) -> RocReport:
    pp = _as_pairs(pairs)
    labels = pp.truth > threshold
    fpr, tpr, auc = roc_curve(labels, pp.prediction)
    return RocReport(threshold, fpr, tpr, auc, int(labels.sum()), int((~labels).sum()))


@dataclass(frozen=True)
class PredictionBand:
    """OLS line of prediction on truth with a two-sided prediction interval."""

    slope: float
    intercept: float
    residual_se: float
    x_mean: float
    sxx: float
    n: int
    t_crit: float

    def half_width(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.t_crit * self.residual_se * np.sqrt(
            1.0 + 1.0 / self.n + (x - self.x_mean) ** 2 / self.sxx
        )

    def __call__(self, x):
        centre = self.intercept + self.slope * np.asarray(x, dtype=np.float64)
        h = self.half_width(x)
        return centre - h, centre + h


def prediction_band_95(pairs, level: float = 0.95) -> PredictionBand:
    pp = _as_pairs(pairs)
    n = len(pp)
    if n < 4:
        raise UndefinedRegression(f"need at least 4 pairs, got {n}")
    x, y = pp.truth, pp.prediction
    xm = float(x.mean())
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0:
        raise UndefinedRegression("truth column is constant")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean()) - slope * xm
    resid = y - (intercept + slope * x)
    s = float(np.sqrt(resid @ resid / (n - 2)))
    t_crit = t_quantile(0.5 + level / 2.0, n - 2)
    return PredictionBand(slope, intercept, s, xm, sxx, n, t_crit)


def spectral_rmse(reconstructed: Spectrum, reference: Spectrum) -> float:
    if reconstructed.grid != reference.grid:
        raise GridMismatch("spectra are on different grids")
    diff = reconstructed.values - reference.values
    return float(np.sqrt(np.mean(diff * diff)))


# -- learning curves ---------------------------------------------------------

def fraction_grid(start: float = 0.125, stop: float = 1.0, step: float = 0.0625) -> tuple[float, ...]:
    """Inclusive arithmetic grid of resampling fractions."""
    if not (0 < start <= stop <= 1) or not step > 0:
        raise ValueError(f"bad fraction grid {start}..{stop} step {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


DEFAULT_FRACTIONS = fraction_grid()


@dataclass(frozen=True)
class CurvePoint:
    fraction: float
    n: int
    r: float
    md: float
    std_md: float


@dataclass(eq=False)
class LearningCurve:
    fractions: tuple[float, ...]
    points: dict  # mode value -> list[CurvePoint]
    subset_ids: list = field(default_factory=list)  # per fraction, record ids used
    pairs: dict = field(default_factory=dict)  # (mode value, fraction index) -> PredictionPairs

    def series(self, mode, index: str) -> np.ndarray:
        mode = FeatureMode.parse(mode).value
        return np.array([getattr(p, index) for p in self.points[mode]])

    def rows(self):
        for mode, pts in self.points.items():
            for p in pts:
                yield mode, p


def learning_curve(
    dataset,
    sal_spec: ModelSpec,
    rgbl_spec: ModelSpec | None = None,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    k: int = 10,
    seed: int = 42,
    repeats: int = 1,
    modes: Sequence = (FeatureMode.SAL, FeatureMode.RGBL),
    features: dict | None = None,
) -> LearningCurve:
    """CV agreement indices per resampling fraction and feature mode.

    Both modes see the same row subset at each fraction and the same fold
    seed. ``features`` may override the feature source per mode (used to
    feed spectra to both modes as a degenerate check).
    """
    rgbl_spec = rgbl_spec or sal_spec
    modes = [FeatureMode.parse(m) for m in modes]
    specs = {FeatureMode.SAL: sal_spec, FeatureMode.RGBL: rgbl_spec}
    n_total = len(dataset)
    smallest = int(np.floor(min(fractions) * n_total + 0.5))
    if smallest < 2 * k:
        raise EmptyInput(f"smallest subset has {smallest} rows, need >= {2 * k} for {k}-fold CV")
    points = {m.value: [] for m in modes}
    subset_ids, all_pairs = [], {}
    for i, frac in enumerate(fractions):
        acc = {m.value: [] for m in modes}
        for rep in range(repeats):
            tag = f"fraction:{i}" if rep == 0 else f"fraction:{i}:repeat:{rep}"
            sub = resample_fraction(dataset, frac, derive_seed(seed, tag))
            cv_seed = seed if rep == 0 else derive_seed(seed, f"cv-repeat:{rep}")
            if rep == 0:
                subset_ids.append(sub.ids.copy())
            for m in modes:
                source = m if features is None else features.get(m, m)
                pp = cross_validated_predictions(sub, specs[m], source, k, cv_seed)
                if rep == 0:
                    all_pairs[(m.value, i)] = pp
                rep_r, _ = pearson(pp)
                ba = bland_altman(pp)
                acc[m.value].append((rep_r, ba.md, ba.std_md))
        for m in modes:
            r, md, sd = np.mean(acc[m.value], axis=0)
            points[m.value].append(CurvePoint(float(frac), len(subset_ids[-1]), float(r), float(md), float(sd)))
    return LearningCurve(tuple(float(f) for f in fractions), points, subset_ids, all_pairs)


def stability_summary(curve: LearningCurve) -> dict:
    """Sample std of r, md and std_md across fractions, per mode."""
    if len(curve.fractions) < 2:
        raise EmptyInput("stability needs at least 2 fractions")
    out = {}
    for mode in curve.points:
        out[mode] = {
            index: float(np.std(curve.series(mode, index), ddof=1))
            for index in ("r", "md", "std_md")
        }
    return out

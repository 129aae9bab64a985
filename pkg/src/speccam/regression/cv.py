"""K-fold cross-validation and random resampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import BadHyperparameter, SubsetTooSmall
from ..seeding import rng_for
from .data import FeatureMode, training_set
from .models import ModelSpec, train

MIN_SUBSET = 20


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def kfold_split(n: int, k: int, seed: int) -> FoldAssignment:
    """Random permutation dealt round-robin into k folds (sizes differ by <= 1)."""
    if k < 2:
        raise BadHyperparameter("k must be >= 2")
    if n < k:
        raise BadHyperparameter(f"cannot split {n} rows into {k} folds")
    perm = rng_for(seed, "kfold").permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % k
    return FoldAssignment(fold_of, k)


@dataclass(frozen=True, eq=False)
class PredictionPairs:
    truth: np.ndarray
    prediction: np.ndarray
    ids: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.truth, dtype=np.float64).reshape(-1)
        p = np.asarray(self.prediction, dtype=np.float64).reshape(-1)
        if t.shape != p.shape:
            raise ValueError("truth and prediction differ in length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("prediction pairs must be finite")
        object.__setattr__(self, "truth", t)
        object.__setattr__(self, "prediction", p)

    def __len__(self) -> int:
        return len(self.truth)

    @classmethod
    def from_pairs(cls, pairs) -> "PredictionPairs":
        arr = np.asarray(list(pairs), dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


FoldHook = Callable[[int, np.ndarray, np.ndarray], None]


def cross_validated_predictions(
    dataset,
    spec: ModelSpec,
    mode,
    k: int = 10,
    seed: int = 42,
    normalize_nm: float | None = None,
    on_fold: FoldHook | None = None,
) -> PredictionPairs:
    """Out-of-fold prediction for every row, in input order.

    ``on_fold(fold, train_ids, test_ids)`` is called before each fold is
    trained, with dataset record ids.
    """
    mode = FeatureMode.parse(mode)
    ts = training_set(dataset, mode, normalize_nm)
    folds = kfold_split(len(ts), k, seed)
    pred = np.full(len(ts), np.nan)
    for f in range(k):
        test, tr = folds.test_rows(f), folds.train_rows(f)
        if on_fold is not None:
            on_fold(f, ts.row_ids[tr], ts.row_ids[test])
        model = train(ts.subset(tr), spec)
        pred[test] = model.predict_matrix(ts.x[test])
    return PredictionPairs(ts.y.copy(), pred, ts.row_ids.copy())


def subset_size(n: int, fraction: float) -> int:
    return int(np.floor(fraction * n + 0.5))


def resample_fraction(dataset, fraction: float, seed: int, min_rows: int = MIN_SUBSET):
    """Uniform subset without replacement of round(fraction * n) rows.

    Selected rows keep their original order.
    """
    if not 0 < fraction <= 1:
        raise BadHyperparameter(f"fraction must lie in (0, 1], got {fraction}")
    n = len(dataset)
    m = subset_size(n, fraction)
    if m < min_rows:
        raise SubsetTooSmall(f"{fraction:g} of {n} rows leaves {m} (< {min_rows})")
    if m == n:
        return dataset.subset(np.arange(n))
    rows = np.sort(rng_for(seed, "resample").choice(n, size=m, replace=False))
    return dataset.subset(rows)

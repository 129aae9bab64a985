"""Feature extraction, training sets and per-feature standardisation."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import FeatureModeMismatch


class FeatureMode(enum.Enum):
    SAL = "sal"  # 27-band reflectance spectra
    RGBL = "rgbl"  # raw RGB triples

    @classmethod
    def parse(cls, value) -> "FeatureMode":
        if isinstance(value, FeatureMode):
            return value
        return cls(str(value).lower())


def feature_length(mode: FeatureMode, n_bands: int = 27) -> int:
    return n_bands if mode is FeatureMode.SAL else 3


@dataclass(frozen=True, eq=False)
class FeatureVector:
    mode: FeatureMode
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if self.mode is FeatureMode.RGBL and v.size != 3:
            raise FeatureModeMismatch(f"RGBL features have 3 values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("features must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Design matrix ``x`` (n, d), targets ``y`` (n,) and the source row ids."""

    mode: FeatureMode
    x: np.ndarray
    y: np.ndarray
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError(f"x {x.shape} and y {y.shape} disagree")
        if self.mode is FeatureMode.RGBL and x.shape[1] != 3:
            raise FeatureModeMismatch("RGBL training set must have 3 columns")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("training data must be finite")
        ids = np.arange(len(y)) if self.row_ids is None else np.asarray(self.row_ids)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "row_ids", ids)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subset(self, rows) -> "TrainingSet":
        rows = np.asarray(rows, dtype=np.int64)
        return TrainingSet(self.mode, self.x[rows], self.y[rows], self.row_ids[rows])


def dataset_features(dataset, mode, normalize_nm: float | None = None) -> np.ndarray:
    """Feature matrix for a dataset.

    SAL uses the spectra, optionally divided by the band at ``normalize_nm``;
    RGBL uses the RGB columns.
    """
    mode = FeatureMode.parse(mode)
    if mode is FeatureMode.RGBL:
        return np.array(dataset.rgb, dtype=np.float64)
    x = np.array(dataset.spectra, dtype=np.float64)
    if normalize_nm is not None:
        idx = dataset.grid.index_of(normalize_nm)
        x = x / x[:, idx : idx + 1]
    return x


def training_set(dataset, mode, normalize_nm: float | None = None) -> TrainingSet:
    mode = FeatureMode.parse(mode)
    return TrainingSet(mode, dataset_features(dataset, mode, normalize_nm), dataset.bbl, dataset.ids)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # 0 marks a constant feature

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (x - self.mean) / safe
        return np.where(self.std > 0, out, 0.0)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def standardize_fit(ts) -> Standardizer:
    """Per-feature mean and population std of a training set (or raw matrix)."""
    x = ts.x if isinstance(ts, TrainingSet) else np.asarray(ts, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("standardisation needs at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    # a spread at rounding level is a constant column
    tiny = 1e-12 * np.maximum(np.abs(mean), 1.0)
    std = np.where(std > tiny, std, 0.0)
    return Standardizer(mean, std)


def standardize_apply(standardizer: Standardizer, x) -> np.ndarray:
    return standardizer.apply(x)

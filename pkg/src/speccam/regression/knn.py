"""k-nearest-neighbour regression (uniform weights, Euclidean distance)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadHyperparameter


@dataclass(frozen=True)
class KnnParams:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise BadHyperparameter("k must be >= 1")


@dataclass(frozen=True, eq=False)
class KnnState:
    x: np.ndarray
    y: np.ndarray
    k: int

    def neighbours(self, xs: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows; equal distances keep row order."""
        d2 = ((xs[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=2)
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict(self, xs: np.ndarray) -> np.ndarray:
        return self.y[self.neighbours(xs)].mean(axis=1)


def fit_knn(xs: np.ndarray, y: np.ndarray, params: KnnParams) -> KnnState:
    if params.k > len(y):
        raise BadHyperparameter(f"k={params.k} exceeds {len(y)} training rows")
    return KnnState(np.array(xs, dtype=np.float64), np.array(y, dtype=np.float64), params.k)

"""Model specs, trainers for the four learners and their linear hybrid.

Every trainer standardises features on its own training rows, fits the
learner on the standardised matrix and returns an immutable
:class:`TrainedModel`. All randomness comes from ``spec.seed``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import nnls

from ..errors import BadHyperparameter, FeatureModeMismatch
from ..seeding import rng_for
from .data import FeatureMode, FeatureVector, Standardizer, TrainingSet, standardize_fit
from .forest import ForestState, RfParams, Tree, fit_forest
from .knn import KnnParams, KnnState, fit_knn
from .mlp import MlpParams, MlpState, fit_mlp
from .svr import SvrParams, SvrState, fit_svr

BASE_KINDS = ("mlp", "svr", "knn", "rf")
KINDS = BASE_KINDS + ("hybrid",)
KIND_ALIASES = {"ann": "mlp", "svm": "svr"}


@dataclass(frozen=True)
class HybridParams:
    weighting: str = "equal"  # "equal" or "stacked"
    inner_folds: int = 5
    mlp: MlpParams = field(default_factory=MlpParams)
    svr: SvrParams = field(default_factory=SvrParams)
    knn: KnnParams = field(default_factory=KnnParams)
    rf: RfParams = field(default_factory=RfParams)

    def __post_init__(self):
        if self.weighting not in ("equal", "stacked"):
            raise BadHyperparameter(f"unknown hybrid weighting {self.weighting!r}")
        if self.inner_folds < 2:
            raise BadHyperparameter("inner_folds must be >= 2")


_PARAM_TYPES = {
    "mlp": MlpParams,
    "svr": SvrParams,
    "knn": KnnParams,
    "rf": RfParams,
    "hybrid": HybridParams,
}

MIN_ROWS = {"mlp": 10, "svr": 2, "knn": 1, "rf": 5, "hybrid": 20}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: Any = None
    seed: int = 42

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind.lower(), self.kind.lower())
        if kind not in KINDS:
            raise BadHyperparameter(f"unknown model kind {self.kind!r}")
        params = self.params if self.params is not None else _PARAM_TYPES[kind]()
        if not isinstance(params, _PARAM_TYPES[kind]):
            raise BadHyperparameter(f"{kind} expects {_PARAM_TYPES[kind].__name__}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    def base_specs(self) -> dict[str, "ModelSpec"]:
        """Component specs of a hybrid; random streams are separated by purpose."""
        p = self.params
        return {
            kind: ModelSpec(kind, getattr(p, kind), seed=self.seed)
            for kind in BASE_KINDS
        }


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ModelSpec
    mode: FeatureMode
    n_features: int
    standardizer: Standardizer | None
    state: Any
    # hybrid only
    bases: tuple = ()
    weights: np.ndarray | None = None

    def predict_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_features:
            raise FeatureModeMismatch(
                f"model expects {self.n_features} features, got {x.shape[1]}"
            )
        if self.spec.kind == "hybrid":
            preds = np.stack([b.predict_matrix(x) for b in self.bases], axis=1)
            return preds @ self.weights
        return self.state.predict(self.standardizer.apply(x))


def _check_rows(ts: TrainingSet, kind: str):
    if len(ts) < MIN_ROWS[kind]:
        raise BadHyperparameter(f"{kind} needs at least {MIN_ROWS[kind]} rows, got {len(ts)}")
    if len(ts) < 2:
        raise BadHyperparameter("training needs at least 2 rows")


def _fit_base(ts: TrainingSet, spec: ModelSpec) -> TrainedModel:
    _check_rows(ts, spec.kind)
    std = standardize_fit(ts)
    xs = std.apply(ts.x)
    kind, p = spec.kind, spec.params
    if kind == "mlp":
        state = fit_mlp(xs, ts.y, p, rng_for(spec.seed, "mlp"))
    elif kind == "svr":
        state = fit_svr(xs, ts.y, p)
    elif kind == "knn":
        state = fit_knn(xs, ts.y, p)
    else:
        state = fit_forest(xs, ts.y, p, rng_for(spec.seed, "rf"))
    return TrainedModel(spec, ts.mode, ts.n_features, std, state)


def train_mlp(ts: TrainingSet, spec: ModelSpec | None = None) -> TrainedModel:
    return _fit_base(ts, spec or ModelSpec("mlp"))


def train_svr(ts: TrainingSet, spec: ModelSpec | None = None) -> TrainedModel:
    return _fit_base(ts, spec or ModelSpec("svr"))


def train_knn(ts: TrainingSet, spec: ModelSpec | None = None) -> TrainedModel:
    return _fit_base(ts, spec or ModelSpec("knn"))


def train_rf(ts: TrainingSet, spec: ModelSpec | None = None) -> TrainedModel:
    return _fit_base(ts, spec or ModelSpec("rf"))


def stack_weights(base_predictions: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Non-negative least-squares combination weights, (n, m) -> (m,)."""
    weights, _ = nnls(np.asarray(base_predictions, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return weights


def _inner_oof_predictions(ts: TrainingSet, specs: dict, folds: int, seed: int) -> np.ndarray:
    from .cv import kfold_split

    assignment = kfold_split(len(ts), folds, seed)
    out = np.empty((len(ts), len(specs)))
    for f in range(folds):
        test = np.flatnonzero(assignment.fold_of == f)
        train = np.flatnonzero(assignment.fold_of != f)
        inner = ts.subset(train)
        for col, spec in enumerate(specs.values()):
            out[test, col] = _fit_base(inner, spec).predict_matrix(ts.x[test])
    return out


def train_hybrid(ts: TrainingSet, spec: ModelSpec | None = None) -> TrainedModel:
    spec = spec or ModelSpec("hybrid")
    _check_rows(ts, "hybrid")
    specs = spec.base_specs()
    bases = tuple(_fit_base(ts, s) for s in specs.values())
    if spec.params.weighting == "equal":
        weights = np.full(len(bases), 1.0 / len(bases))
    else:
        oof = _inner_oof_predictions(ts, specs, spec.params.inner_folds, spec.seed)
        weights = stack_weights(oof, ts.y)
    return TrainedModel(spec, ts.mode, ts.n_features, None, None, bases, weights)


def train(ts: TrainingSet, spec: ModelSpec) -> TrainedModel:
    if spec.kind == "hybrid":
        return train_hybrid(ts, spec)
    return _fit_base(ts, spec)


def predict(model: TrainedModel, x: FeatureVector) -> float:
    """Prediction in umol/L for one feature vector."""
    if not isinstance(x, FeatureVector):
        raise TypeError("predict expects a FeatureVector; use predict_matrix for arrays")
    if x.mode is not model.mode:
        raise FeatureModeMismatch(f"model trained on {model.mode.value}, got {x.mode.value}")
    return float(model.predict_matrix(x.values)[0])


def predict_matrix(model: TrainedModel, x) -> np.ndarray:
    return model.predict_matrix(x)


# -- serialisation ------------------------------------------------------------

def _params_to_dict(params) -> dict:
    from dataclasses import asdict

    return asdict(params)


def _params_from_dict(kind: str, d: dict):
    if kind == "hybrid":
        return HybridParams(
            weighting=d["weighting"],
            inner_folds=d["inner_folds"],
            mlp=MlpParams(**d["mlp"]),
            svr=SvrParams(**d["svr"]),
            knn=KnnParams(**d["knn"]),
            rf=RfParams(**d["rf"]),
        )
    return _PARAM_TYPES[kind](**d)


def spec_to_dict(spec: ModelSpec) -> dict:
    return {"kind": spec.kind, "seed": spec.seed, "params": _params_to_dict(spec.params)}


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(d["kind"], _params_from_dict(d["kind"], d["params"]), int(d["seed"]))


def model_to_dict(model: TrainedModel) -> dict:
    out = {
        "spec": spec_to_dict(model.spec),
        "mode": model.mode.value,
        "n_features": model.n_features,
    }
    if model.spec.kind == "hybrid":
        out["weights"] = model.weights.tolist()
        out["bases"] = [model_to_dict(b) for b in model.bases]
        return out
    out["standardizer"] = model.standardizer.to_dict()
    s = model.state
    kind = model.spec.kind
    if kind == "mlp":
        state = {
            "sizes": list(s.sizes),
            "params": s.params.tolist(),
            "y_mean": s.y_mean,
            "y_scale": s.y_scale,
            "epochs": s.epochs,
        }
    elif kind == "svr":
        state = {
            "support": s.support.tolist(),
            "alpha": s.alpha.tolist(),
            "alpha_star": s.alpha_star.tolist(),
            "bias": s.bias,
            "gamma": s.gamma,
            "c": s.c,
            "epsilon": s.epsilon,
            "iterations": s.iterations,
        }
    elif kind == "knn":
        state = {"x": s.x.tolist(), "y": s.y.tolist(), "k": s.k}
    else:
        state = {"trees": [t.to_dict() for t in s.trees]}
    out["state"] = state
    return out


def model_from_dict(d: dict) -> TrainedModel:
    spec = spec_from_dict(d["spec"])
    mode = FeatureMode.parse(d["mode"])
    n_features = int(d["n_features"])
    if spec.kind == "hybrid":
        bases = tuple(model_from_dict(b) for b in d["bases"])
        return TrainedModel(
            spec, mode, n_features, None, None, bases, np.array(d["weights"], dtype=np.float64)
        )
    std = Standardizer.from_dict(d["standardizer"])
    s = d["state"]
    if spec.kind == "mlp":
        state = MlpState(
            tuple(s["sizes"]), np.array(s["params"], dtype=np.float64),
            float(s["y_mean"]), float(s["y_scale"]), int(s["epochs"]),
        )
    elif spec.kind == "svr":
        state = SvrState(
            np.array(s["support"], dtype=np.float64).reshape(-1, n_features),
            np.array(s["alpha"], dtype=np.float64),
            np.array(s["alpha_star"], dtype=np.float64),
            float(s["bias"]), float(s["gamma"]), float(s["c"]), float(s["epsilon"]),
            int(s["iterations"]),
        )
    elif spec.kind == "knn":
        state = KnnState(
            np.array(s["x"], dtype=np.float64).reshape(-1, n_features),
            np.array(s["y"], dtype=np.float64),
            int(s["k"]),
        )
    else:
        state = ForestState(tuple(Tree.from_dict(t) for t in s["trees"]))
    return TrainedModel(spec, mode, n_features, std, state)

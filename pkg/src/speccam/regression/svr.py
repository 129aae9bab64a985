"""Epsilon-insensitive support vector regression, RBF kernel, SMO solver.

The dual is written over 2n variables ``beta = [alpha; alpha*]`` with signs
``z = [+1...; -1...]``::

    min  1/2 beta^T Q beta + p^T beta
    s.t. z^T beta = 0,  0 <= beta <= C
    Q_ij = z_i z_j K(x_i, x_j),  p = [eps - y; eps + y]

Working pairs are chosen by maximal violation with second-order gain, as in
Fan, Chen & Lin (2005). The decision function is
``f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) + b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadHyperparameter, TrainingDiverged

TAU = 1e-12


@dataclass(frozen=True)
class SvrParams:
    c: float | None = None  # None -> 10 * std(y)
    epsilon: float | None = None  # None -> 0.05 * std(y)
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-3
    max_iter: int = 500_000

    def __post_init__(self):
        if self.c is not None and not self.c > 0:
            raise BadHyperparameter("C must be > 0")
        if self.epsilon is not None and self.epsilon < 0:
            raise BadHyperparameter("epsilon must be >= 0")
        if self.gamma is not None and not self.gamma > 0:
            raise BadHyperparameter("gamma must be > 0")
        if not self.tol > 0:
            raise BadHyperparameter("tol must be > 0")


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvrState:
    support: np.ndarray  # standardised training inputs
    alpha: np.ndarray
    alpha_star: np.ndarray
    bias: float
    gamma: float
    c: float
    epsilon: float
    iterations: int

    @property
    def coef(self) -> np.ndarray:
        return self.alpha - self.alpha_star

    def predict(self, xs: np.ndarray) -> np.ndarray:
        return rbf_kernel(xs, self.support, self.gamma) @ self.coef + self.bias


def solve_svr_dual(k: np.ndarray, y: np.ndarray, c: float, epsilon: float, tol: float, max_iter: int):
    """SMO on the 2n-variable dual. Returns (alpha, alpha_star, bias, iterations)."""
    n = len(y)
    z = np.concatenate([np.ones(n), -np.ones(n)])
    beta = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])
    kdiag = np.diag(k).copy()
    qd = np.concatenate([kdiag, kdiag])
    it = 0
    while True:
        mzg = -z * grad
        up = ((z > 0) & (beta < c)) | ((z < 0) & (beta > 0))
        low = ((z < 0) & (beta < c)) | ((z > 0) & (beta > 0))
        if not up.any() or not low.any():
            break
        mzg_up = np.where(up, mzg, -np.inf)
        i = int(np.argmax(mzg_up))
        g_max = mzg_up[i]
        g_min = np.where(low, mzg, np.inf).min()
        if g_max - g_min < tol:
            break
        if it >= max_iter:
            raise TrainingDiverged(f"SMO did not reach tolerance {tol} in {max_iter} iterations")
        it += 1
        ki = k[i % n]
        q_i = z[i] * z * np.concatenate([ki, ki])
        # second-order selection of j among violating partners
        b_ij = g_max - mzg
        cand = low & (b_ij > 0)
        a_ij = qd[i] + qd - 2.0 * z[i] * z * q_i
        a_ij = np.where(a_ij > 0, a_ij, TAU)
        gain = np.where(cand, -(b_ij * b_ij) / a_ij, np.inf)
        j = int(np.argmin(gain))
        kj = k[j % n]
        q_j = z[j] * z * np.concatenate([kj, kj])

        old_i, old_j = beta[i], beta[j]
        if z[i] != z[j]:
            quad = qd[i] + qd[j] + 2.0 * q_i[j]
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            bi, bj = old_i + delta, old_j + delta
            if diff > 0:
                if bj < 0:
                    bj, bi = 0.0, diff
            elif bi < 0:
                bi, bj = 0.0, -diff
            if diff > 0:
                if bi > c:
                    bi, bj = c, c - diff
            elif bj > c:
                bj, bi = c, c + diff
        else:
            quad = qd[i] + qd[j] - 2.0 * q_i[j]
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            bi, bj = old_i - delta, old_j + delta
            if total > c:
                if bi > c:
                    bi, bj = c, total - c
            elif bj < 0:
                bj, bi = 0.0, total
            if total > c:
                if bj > c:
                    bj, bi = c, total - c
            elif bi < 0:
                bi, bj = 0.0, total
        beta[i], beta[j] = bi, bj
        grad += q_i * (bi - old_i) + q_j * (bj - old_j)

    # bias from free variables, else midpoint of the feasible interval
    zg = z * grad
    at_upper = beta >= c
    at_lower = beta <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(zg[free].mean())
    else:
        ub_mask = (at_upper & (z < 0)) | (at_lower & (z > 0))
        lb_mask = (at_upper & (z > 0)) | (at_lower & (z < 0))
        ub = zg[ub_mask].min() if ub_mask.any() else np.inf
        lb = zg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    return beta[:n].copy(), beta[n:].copy(), -rho, it


def fit_svr(xs: np.ndarray, y: np.ndarray, params: SvrParams) -> SvrState:
    """Fit on standardised inputs.

    The dual is solved with targets divided by std(y), which makes the SMO
    tolerance relative to the target spread; the solution is then scaled back.
    """
    n, d = xs.shape
    scale = float(y.std())
    if not scale > 0:
        scale = 1.0
    c = params.c if params.c is not None else 10.0 * scale
    epsilon = params.epsilon if params.epsilon is not None else 0.05 * scale
    gamma = params.gamma if params.gamma is not None else 1.0 / d
    k = rbf_kernel(xs, xs, gamma)
    alpha, alpha_star, bias, it = solve_svr_dual(
        k, y / scale, c / scale, epsilon / scale, params.tol, params.max_iter
    )
    return SvrState(
        support=np.array(xs, dtype=np.float64),
        alpha=alpha * scale,
        alpha_star=alpha_star * scale,
        bias=bias * scale,
        gamma=gamma,
        c=c,
        epsilon=epsilon,
        iterations=it,
    )

"""Epsilon-SVR with an RBF kernel, trained by sequential minimal optimization.

The dual is solved over 2l variables a = [alpha; alpha*] with labels
y = [+1; -1]:

    min  1/2 a^T Q a + p^T a   s.t.  y^T a = 0,  0 <= a <= C
    Q_st = y_s y_t K(x_s, x_t),  p = [eps - z; eps + z]

Each step updates the maximal-violating pair chosen with second-order
working-set selection, so the solver is deterministic. Coefficients are
alpha - alpha*, and f(x) = sum_i coef_i K(x_i, x) + bias.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


def rbf_kernel(a: Sequence[float], b: Sequence[float], gamma: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = a - b
    return math.exp(-gamma * float(d @ d))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel_gamma: float
    C: float
    epsilon: float
    n_iter: int = 0
    converged: bool = True

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    def decision_function(self, X) -> np.ndarray:
        """Raw regression output, without clamping."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.dual_coefs.size == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_matrix(X, self.support_vectors, self.kernel_gamma) @ self.dual_coefs + self.bias

    def lipschitz_bound(self) -> float:
        # |d/dx exp(-g|x-c|^2)| peaks at sqrt(2g/e)
        return float(np.abs(self.dual_coefs).sum() * math.sqrt(2.0 * self.kernel_gamma / math.e))

    def to_dict(self) -> dict:
        return {
            "kernel": "rbf",
            "kernel_gamma": self.kernel_gamma,
            "C": self.C,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        n_feat = len(d["support_vectors"][0]) if d["support_vectors"] else int(d.get("n_features", 0))
        return cls(
            sv.reshape(-1, n_feat) if sv.size else np.zeros((0, n_feat)),
            np.asarray(d["dual_coefs"], dtype=np.float64),
            float(d["bias"]), float(d["kernel_gamma"]), float(d["C"]), float(d["epsilon"]),
            int(d.get("n_iter", 0)), bool(d.get("converged", True)),
        )

    def write_json(self, path: str | Path) -> None:
        d = self.to_dict()
        d["n_features"] = self.n_features
        Path(path).write_text(json.dumps(d) + "\n", encoding="utf-8")

    @classmethod
    def read_json(cls, path: str | Path) -> "SvrModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _select_pair(G, a, y, C, Kdiag, Kfull, l, tol):
    """Second-order working-set selection. Returns (i, j) or None when optimal."""
    mgy = -y * G
    up = np.where(y > 0, a < C, a > 0)
    low = np.where(y > 0, a > 0, a < C)
    if not up.any() or not low.any():
        return None
    cand = np.where(up, mgy, -np.inf)
    i = int(np.argmax(cand))
    m = cand[i]
    M = np.where(low, mgy, np.inf).min()
    if m - M < tol:
        return None
    b = m - mgy
    ok = low & (b > 0)
    if not ok.any():
        return None
    ii = i % l
    idx = np.arange(2 * l) % l
    quad = Kdiag[ii] + Kdiag[idx] - 2.0 * Kfull[ii, idx]
    quad = np.where(quad > 0, quad, TAU)
    obj = np.where(ok, -(b * b) / quad, np.inf)
    j = int(np.argmin(obj))
    return i, j


def train_svr(
    features,
    targets: Sequence[float],
    C: float = 1.0,
    epsilon: float = 0.1,
    gamma: float | None = None,
    tol: float = 1e-3,
    max_passes: int = 200,
) -> SvrModel:
    """Fit an epsilon-SVR with RBF kernel.

    ``features`` is an (n, d) array or a sequence of objects with a
    ``ratings`` vector. ``gamma`` defaults to 1/d. Optimization stops when the
    maximal KKT violation falls below ``tol`` or after ``max_passes * 2n``
    pair updates.
    """
    X = _as_matrix(features)
    z = np.asarray(targets, dtype=np.float64)
    l = X.shape[0]
    if l < 2:
        raise ValueError("need at least two samples")
    if z.shape != (l,):
        raise ValueError("targets must align with features")
    if not np.isfinite(X).all() or not np.isfinite(z).all():
        raise ValueError("features and targets must be finite")
    if C <= 0 or epsilon < 0 or tol <= 0:
        raise ValueError("require C > 0, epsilon >= 0, tol > 0")
    gamma = 1.0 / X.shape[1] if gamma is None else float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    K = rbf_matrix(X, X, gamma)
    Kdiag = np.diag(K).copy()
    n = 2 * l
    y = np.concatenate([np.ones(l), -np.ones(l)])
    a = np.zeros(n)
    G = np.concatenate([epsilon - z, epsilon + z])
    max_iter = max_passes * n
    it = 0
    converged = False
    while it < max_iter:
        pair = _select_pair(G, a, y, C, Kdiag, K, l, tol)
        if pair is None:
            converged = True
            break
        i, j = pair
        ii, jj = i % l, j % l
        Qij = y[i] * y[j] * K[ii, jj]
        old_ai, old_aj = a[i], a[j]
        if y[i] != y[j]:
            quad = Kdiag[ii] + Kdiag[jj] + 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = Kdiag[ii] + Kdiag[jj] - 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        da_i, da_j = a[i] - old_ai, a[j] - old_aj
        # Q[:, t] = y * y_t * K[:, t mod l] over the doubled index set
        G += y * (y[i] * da_i) * np.tile(K[:, ii], 2) + y * (y[j] * da_j) * np.tile(K[:, jj], 2)
        it += 1
    if not converged:
        log.warning("SMO stopped after %d updates without reaching tol=%g", it, tol)

    bias = -_rho(G, a, y, C)
    coefs = a[:l] - a[l:]
    sv = np.flatnonzero(coefs != 0.0)
    return SvrModel(X[sv].copy(), coefs[sv].copy(), float(bias), gamma, float(C), float(epsilon), it, converged)


def _rho(G, a, y, C) -> float:
    yG = y * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        X = features.astype(np.float64)
    else:
        rows = [getattr(f, "ratings", f) for f in features]
        X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X


def predict_svr(model: SvrModel, feature, clamp: tuple[float, float] | None = (1.0, 5.0)) -> float:
    """Prediction for one feature vector, clamped to the rating scale by default."""
    x = np.asarray(getattr(feature, "ratings", feature), dtype=np.float64).reshape(1, -1)
    out = float(model.decision_function(x)[0])
    if clamp is not None:
        out = min(max(out, clamp[0]), clamp[1])
    return out

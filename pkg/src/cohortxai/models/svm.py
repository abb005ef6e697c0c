"""Kernel SVMs solved by SMO, with Platt-calibrated probabilities."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .base import TrainedModel, _frozen
from .params import ModelKind

SMO_TOL = 1e-3


def resolve_gamma(mode, X) -> float:
    d = X.shape[1]
    if mode == "auto":
        return 1.0 / d
    if mode == "scale":
        var = float(X.var())
        return 1.0 / (d * var) if var > 0 else 1.0
    return float(mode)


def kernel_matrix(A, B, kind, gamma, degree=3, coef0=0.0):
    if kind == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def platt_fit(f, y, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Fit P(y=1|f) = 1 / (1 + exp(A f + B)) with Platt's smoothed targets.

    Newton iterations with backtracking, after Lin, Lin and Weng's
    numerically stable formulation.
    """
    f = np.asarray(f, dtype=float)
    n_pos = float(np.sum(y == 1))
    n_neg = float(len(y) - n_pos)
    t = np.where(y == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    A, B = 0.0, math.log((n_neg + 1) / (n_pos + 1))

    def objective(A, B):
        z = f * A + B
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)), (t - 1) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = f * A + B
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2
        else:
            break
    return A, B


class SVMModel(TrainedModel):
    """Soft-margin kernel SVM. ``decision_function`` is the raw margin;
    probabilities come from a sigmoid fitted to training margins."""

    kind = ModelKind.SVM_RADIAL

    def __init__(self, params, feature_names, class_prior, support_vectors, dual_coef, bias,
                 gamma, calibration, support=(), smo_gap=0.0, smo_iter=0):
        super().__init__(params, feature_names, class_prior)
        self.support_vectors = _frozen(np.asarray(support_vectors, dtype=float).reshape(-1, len(feature_names)))
        self.dual_coef = _frozen(dual_coef)
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.calibration = (float(calibration[0]), float(calibration[1]))
        self.support = _frozen(support, np.int64)
        self.smo_gap = float(smo_gap)
        self.smo_iter = int(smo_iter)

    @property
    def _kernel(self):
        return "poly" if self.kind is ModelKind.SVM_POLY else "rbf"

    @property
    def degree(self) -> int:
        return int(self.params.get("degree", 3))

    @classmethod
    def fit(cls, X, y, params, feature_names, seed=None):
        n = len(y)
        gamma = resolve_gamma(params["gamma"], X)
        kname = "poly" if cls.kind is ModelKind.SVM_POLY else "rbf"
        K = kernel_matrix(X, X, kname, gamma, params.get("degree", 3))
        ys = np.where(y == 1, 1.0, -1.0)
        Q = np.ascontiguousarray(K * np.outer(ys, ys))
        C = float(params["C"])
        alpha, G, gap, it = _kernels.smo_solve(Q, ys, C, SMO_TOL, 10 * n * n)
        up = ((ys > 0) & (alpha < C)) | ((ys < 0) & (alpha > 0))
        low = ((ys > 0) & (alpha > 0)) | ((ys < 0) & (alpha < C))
        v = -ys * G
        m = v[up].max() if up.any() else v[low].min()
        M = v[low].min() if low.any() else m
        bias = 0.5 * (m + M)
        sv = np.flatnonzero(alpha > 0)
        dual = alpha[sv] * ys[sv]
        f_train = K[:, sv] @ dual + bias
        A, B = platt_fit(f_train, y)
        # keep calibrated probability strictly increasing in the margin
        A = min(A, -1e-12)
        return cls(params, feature_names, y.mean(), X[sv], dual, bias, gamma, (A, B), sv, gap, it)

    def _decision(self, X):
        if len(self.dual_coef) == 0:
            return np.full(len(X), self.bias)
        K = kernel_matrix(X, self.support_vectors, self._kernel, self.gamma, self.degree)
        return K @ self.dual_coef + self.bias

    def decision_function(self, X):
        return self._decision(self._matrix(X))

    def calibrate(self, f):
        A, B = self.calibration
        z = A * np.asarray(f, dtype=float) + B
        return np.where(z >= 0, np.exp(-np.abs(z)) / (1 + np.exp(-np.abs(z))), 1 / (1 + np.exp(-np.abs(z))))

    def _predict(self, X):
        return self.calibrate(self._decision(X))

    def kkt_violations(self, X, y) -> np.ndarray:
        """Per-training-row KKT violation given the fitted dual solution."""
        ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
        alpha = np.zeros(len(ys))
        alpha[self.support] = np.abs(self.dual_coef)
        margin = ys * self.decision_function(X)
        C = float(self.params["C"])
        viol = np.abs(margin - 1)
        viol = np.where(alpha <= 0, np.maximum(0.0, 1 - margin), viol)
        viol = np.where(alpha >= C, np.maximum(0.0, margin - 1), viol)
        return viol

    def _state(self):
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "calibration": list(self.calibration),
            "support": self.support.tolist(),
            "smo_gap": self.smo_gap,
            "smo_iter": self.smo_iter,
        }

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        return cls(
            params, feature_names, class_prior, state["support_vectors"], state["dual_coef"],
            state["bias"], state["gamma"], state["calibration"], state.get("support", ()),
            state.get("smo_gap", 0.0), state.get("smo_iter", 0),
        )


class PolySVM(SVMModel):
    kind = ModelKind.SVM_POLY


class RadialSVM(SVMModel):
    kind = ModelKind.SVM_RADIAL

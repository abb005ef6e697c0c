"""Logistic regression fitted by iteratively reweighted least squares."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel, _frozen
from .params import ModelKind


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _penalized_nll(Z, y, beta, ridge):
    eta = Z @ beta
    # log(1 + exp(eta)) - y * eta, computed stably
    nll = np.sum(np.logaddexp(0.0, eta) - y * eta)
    return nll + 0.5 * np.sum(ridge * beta * beta)


class LogisticModel(TrainedModel):
    """P(y=1 | x) = sigmoid(intercept + x . coef)."""

    kind = ModelKind.LOGREG

    def __init__(self, params, feature_names, class_prior, coef, intercept, n_iter=0):
        super().__init__(params, feature_names, class_prior)
        self.coef = _frozen(coef)
        self.intercept = float(intercept)
        self.n_iter = int(n_iter)

    @classmethod
    def fit(cls, X, y, params, feature_names, seed=None, max_iter=100, tol=1e-8):
        n, d = X.shape
        Z = np.hstack([np.ones((n, 1)), X])
        lam = 1.0 / params["C"] if params["penalty"] == "l2" else 1e-10
        ridge = np.full(d + 1, lam)
        ridge[0] = 0.0
        beta = np.zeros(d + 1)
        loss = _penalized_nll(Z, y, beta, ridge)
        it = 0
        for it in range(1, max_iter + 1):
            p = sigmoid(Z @ beta)
            w = np.maximum(p * (1 - p), 1e-10)
            grad = Z.T @ (p - y) + ridge * beta
            H = (Z * w[:, None]).T @ Z + np.diag(ridge + 1e-12)
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, grad, rcond=None)[0]
            t = 1.0
            for _ in range(40):
                cand = beta - t * step
                cand_loss = _penalized_nll(Z, y, cand, ridge)
                if np.isfinite(cand_loss) and cand_loss <= loss + 1e-12 * abs(loss):
                    break
                t *= 0.5
            else:
                break
            delta = np.max(np.abs(cand - beta))
            beta, loss = cand, cand_loss
            if delta < tol:
                break
        return cls(params, feature_names, y.mean(), beta[1:], beta[0], it)

    def decision_function(self, X):
        return self._matrix(X) @ self.coef + self.intercept

    def _predict(self, X):
        return sigmoid(X @ self.coef + self.intercept)

    def _state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "n_iter": self.n_iter}

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        return cls(params, feature_names, class_prior, state["coef"], state["intercept"], state.get("n_iter", 0))

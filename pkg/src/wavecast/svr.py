"""Epsilon-insensitive support vector regression trained by SMO.

The dual is solved in the usual doubled form: variables ``a = [alpha, alpha*]``
of length ``2n`` with labels ``s = [+1]*n + [-1]*n``, minimising

    0.5 * a' Q a + p' a,   Q[t, u] = s_t s_u K(x_t, x_u),
    p = [eps - y, eps + y],  subject to  s' a = 0,  0 <= a <= C.

The regression function is ``f(x) = sum_i beta_i K(x_i, x) + b`` with
``beta = alpha - alpha*``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import ConvergenceWarning, DataError, ShapeError

__all__ = [
    "KERNEL_PRESETS",
    "KernelSpec",
    "SvrHyperParams",
    "SvrModel",
    "kernel_preset",
    "kernel_eval",
    "kernel_matrix",
    "train_svr",
    "svr_predict",
    "EpsilonSVR",
]

KERNEL_PRESETS = (
    "linear",
    "quadratic",
    "cubic",
    "fine_gaussian",
    "medium_gaussian",
    "coarse_gaussian",
)

_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel definition.

    ``linear``: ``<x, y>``; ``polynomial``: ``(1 + <x, y>)**degree``;
    ``gaussian``: ``exp(-||x - y||**2 / (2 * scale**2))``.
    """

    kind: str = "linear"
    degree: Optional[int] = None
    scale: Optional[float] = None

    def __post_init__(self):
        if self.kind == "polynomial":
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise ValueError(f"polynomial kernel needs an integer degree >= 1, got {self.degree}")
        elif self.kind == "gaussian":
            if self.scale is None or not self.scale > 0:
                raise ValueError(f"gaussian kernel needs scale > 0, got {self.scale}")
        elif self.kind != "linear":
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree, "scale": self.scale}

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        return cls(d["kind"], d.get("degree"), d.get("scale"))


def kernel_preset(name: str, n_features: int) -> KernelSpec:
    """Resolve one of :data:`KERNEL_PRESETS` for inputs with ``n_features`` columns.

    Gaussian scales are ``sqrt(p)/4``, ``sqrt(p)`` and ``4*sqrt(p)`` for the
    fine, medium and coarse presets; inputs are assumed standardized.
    """
    root_p = math.sqrt(n_features)
    if name == "linear":
        return KernelSpec("linear")
    if name == "quadratic":
        return KernelSpec("polynomial", degree=2)
    if name == "cubic":
        return KernelSpec("polynomial", degree=3)
    if name == "fine_gaussian":
        return KernelSpec("gaussian", scale=root_p / 4)
    if name == "medium_gaussian":
        return KernelSpec("gaussian", scale=root_p)
    if name == "coarse_gaussian":
        return KernelSpec("gaussian", scale=4 * root_p)
    raise ValueError(f"unknown kernel preset {name!r}; expected one of {KERNEL_PRESETS}")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"kernel arguments differ in dimension: {x.shape} vs {y.shape}")
    if spec.kind == "linear":
        return float(np.sum(x * y))
    if spec.kind == "polynomial":
        return float((1.0 + np.sum(x * y)) ** spec.degree)
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * spec.scale ** 2)))


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel values between every row of ``A`` and every row of ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"kernel arguments differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    if spec.kind == "polynomial":
        return (1.0 + A @ B.T) ** spec.degree
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * spec.scale ** 2))


@dataclass(frozen=True)
class SvrHyperParams:
    """``epsilon=None`` means ``0.1 * std(y)`` of the training targets."""

    C: float = 1.0
    epsilon: Optional[float] = None
    tolerance: float = 1e-3
    max_iterations: int = 100_000

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "epsilon": self.epsilon,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
        }


@dataclass
class SvrModel:
    """A trained regressor.

    ``support_vectors`` are stored in standardized feature space; inputs are
    mapped there with ``(x - scaler_mean) / scaler_scale`` before the kernel
    sum.
    """

    support_vectors: np.ndarray
    dual_coeffs: np.ndarray
    bias: float
    kernel: KernelSpec
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray
    hyperparams: SvrHyperParams = field(default_factory=SvrHyperParams)
    converged: bool = True
    iterations: int = 0
    kkt_violation: float = 0.0
    dual_objective: float = 0.0
    objective_history: Optional[List[float]] = None

    @property
    def n_features(self) -> int:
        return int(self.scaler_mean.shape[0])

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.dual_coeffs.size == 0:
            return np.full(X.shape[0], self.bias)
        Z = (X - self.scaler_mean) / self.scaler_scale
        return kernel_matrix(self.kernel, Z, self.support_vectors) @ self.dual_coeffs + self.bias

    predict = decision_function

    def to_dict(self) -> dict:
        return {
            "model": "svr",
            "kernel": self.kernel.to_dict(),
            "hyperparams": self.hyperparams.to_dict(),
            "scaler": {"mean": self.scaler_mean.tolist(), "scale": self.scaler_scale.tolist()},
            "support_vectors": self.support_vectors.tolist(),
            "dual_coeffs": self.dual_coeffs.tolist(),
            "bias": self.bias,
            "convergence_flag": self.converged,
        }

    @classmethod
    def from_dict(cls, d) -> "SvrModel":
        p = d.get("hyperparams", {})
        n_features = len(d["scaler"]["mean"])
        return cls(
            support_vectors=np.asarray(d["support_vectors"], dtype=float).reshape(-1, n_features),
            dual_coeffs=np.asarray(d["dual_coeffs"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            scaler_mean=np.asarray(d["scaler"]["mean"], dtype=float),
            scaler_scale=np.asarray(d["scaler"]["scale"], dtype=float),
            hyperparams=SvrHyperParams(**p),
            converged=bool(d.get("convergence_flag", True)),
        )


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or y.ndim != 1:
        raise ShapeError(f"expected 2-D X and 1-D y, got {X.shape} and {y.shape}")
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
    if X.shape[0] < 2 or X.shape[1] == 0:
        raise DataError(f"need at least 2 samples and 1 feature, got shape {X.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("training data contains non-finite values")
    return X, y


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return (X - mean) / scale, mean, scale


def _select_pair(a, s, G, C):
    """Maximal violating pair; ``np.argmax``/``argmin`` break ties at the lowest index."""
    score = -s * G
    up = ((s > 0) & (a < C)) | ((s < 0) & (a > 0))
    low = ((s > 0) & (a > 0)) | ((s < 0) & (a < C))
    i = int(np.argmax(np.where(up, score, -np.inf)))
    j = int(np.argmin(np.where(low, score, np.inf)))
    gap = score[i] - score[j] if up.any() and low.any() else -np.inf
    return i, j, gap


def _compute_bias(a, s, G, C):
    yG = s * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return -float(yG[free].mean())
    ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
    lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return -float((ub + lb) / 2)


def train_svr(
    X,
    y,
    spec: KernelSpec = KernelSpec(),
    hyper: SvrHyperParams = SvrHyperParams(),
    record_objective: bool = False,
) -> SvrModel:
    """Fit an epsilon-SVR by sequential two-multiplier optimisation of the dual.

    Features are z-scored with the training statistics. Each iteration picks
    the maximal KKT violator ``i`` and its partner ``j`` with the largest
    gradient gap, solves the two-variable subproblem analytically and clips
    it to the box. Training stops when the gap falls below
    ``hyper.tolerance``.

    Parameters
    ----------
    X : array_like of shape (n_samples, n_features)
    y : array_like of shape (n_samples,)
    spec : KernelSpec
    hyper : SvrHyperParams
    record_objective : bool, default=False
        Store the dual objective after every step in ``objective_history``.

    Returns
    -------
    SvrModel
        ``converged`` is False (and a :class:`ConvergenceWarning` is issued)
        if ``hyper.max_iterations`` was reached first.
    """
    X, y = _check_training_data(X, y)
    Z, mean, scale = _standardize(X)
    n = Z.shape[0]
    C = float(hyper.C)
    eps = 0.1 * float(np.std(y)) if hyper.epsilon is None else float(hyper.epsilon)

    K = kernel_matrix(spec, Z, Z)
    s = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([eps - y, eps + y])
    Kdiag = np.diag(K).copy()
    a = np.zeros(2 * n)
    G = p.copy()

    def q_row(t):
        base = t % n
        return s[t] * s * np.concatenate([K[base], K[base]])

    def objective():
        # convention: maximisation form of the dual
        return -0.5 * float(a @ (G + p))

    history = [objective()] if record_objective else None
    converged = False
    iterations = 0
    gap = -np.inf
    while True:
        i, j, gap = _select_pair(a, s, G, C)
        if gap <= hyper.tolerance:
            converged = True
            break
        if iterations >= hyper.max_iterations:
            break
        iterations += 1
        Qi, Qj = q_row(i), q_row(j)
        ai_old, aj_old = a[i], a[j]
        if s[i] != s[j]:
            quad = Kdiag[i % n] + Kdiag[j % n] + 2.0 * Qi[j]
            delta = (-G[i] - G[j]) / max(quad, _TAU)
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
            quad = Kdiag[i % n] + Kdiag[j % n] - 2.0 * Qi[j]
            delta = (G[i] - G[j]) / max(quad, _TAU)
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
        G += Qi * (a[i] - ai_old) + Qj * (a[j] - aj_old)
        if record_objective:
            history.append(objective())

    if not converged:
        warnings.warn(
            f"SMO stopped after {iterations} iterations with KKT gap {gap:.3g} "
            f"> tolerance {hyper.tolerance}",
            ConvergenceWarning,
            stacklevel=2,
        )

    beta = a[:n] - a[n:]
    bias = _compute_bias(a, s, G, C)
    support = beta != 0
    return SvrModel(
        support_vectors=Z[support],
        dual_coeffs=beta[support],
        bias=bias,
        kernel=spec,
        scaler_mean=mean,
        scaler_scale=scale,
        hyperparams=SvrHyperParams(C, eps, hyper.tolerance, hyper.max_iterations),
        converged=converged,
        iterations=iterations,
        kkt_violation=max(float(gap), 0.0),
        dual_objective=objective(),
        objective_history=history,
    )


def svr_predict(model: SvrModel, x) -> float:
    """Evaluate the trained regression function at a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"expected a single feature vector, got shape {x.shape}")
    return float(model.decision_function(x[None, :])[0])


class EpsilonSVR(RegressorMixin, BaseEstimator):
    """Epsilon-insensitive support vector regressor.

    Parameters
    ----------
    kernel : str, default="linear"
        One of :data:`KERNEL_PRESETS`, or ``"polynomial"`` / ``"gaussian"``
        together with ``degree`` / ``scale``.
    degree : int, optional
        Polynomial degree when ``kernel="polynomial"``.
    scale : float, optional
        Gaussian width when ``kernel="gaussian"``.
    C : float, default=1.0
        Box constraint.
    epsilon : float, optional
        Half-width of the insensitive tube; defaults to ``0.1 * std(y)``.
    tol : float, default=1e-3
        Stopping tolerance on the maximal KKT violation.
    max_iter : int, default=100000
        Maximum number of pairwise updates.

    Attributes
    ----------
    model_ : SvrModel
    support_vectors_ : ndarray of shape (n_support, n_features)
        Support vectors in standardized feature space.
    dual_coef_ : ndarray of shape (n_support,)
    intercept_ : float
    converged_ : bool
    """

    def __init__(self, kernel="linear", degree=None, scale=None, C=1.0, epsilon=None,
                 tol=1e-3, max_iter=100_000):
        self.kernel = kernel
        self.degree = degree
        self.scale = scale
        self.C = C
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def _kernel_spec(self, n_features):
        if self.kernel in KERNEL_PRESETS:
            return kernel_preset(self.kernel, n_features)
        return KernelSpec(self.kernel, self.degree, self.scale)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, ensure_min_samples=2)
        hyper = SvrHyperParams(self.C, self.epsilon, self.tol, self.max_iter)
        self.model_ = train_svr(X, y, self._kernel_spec(X.shape[1]), hyper)
        self.support_vectors_ = self.model_.support_vectors
        self.dual_coef_ = self.model_.dual_coeffs
        self.intercept_ = self.model_.bias
        self.converged_ = self.model_.converged
        self.n_iter_ = self.model_.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False)
        return self.model_.decision_function(X)

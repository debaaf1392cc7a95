"""Single-layer LSTM cell with a linear scalar readout, trained by BPTT.

Per step, with ``sig`` the logistic sigmoid::

    z = tanh(W_z x + V_z y_prev + b_z)
    i = sig(W_i x + V_i y_prev + b_i)
    f = sig(W_f x + V_f y_prev + b_f)
    c = i * z + f * c_prev
    o = sig(W_o x + V_o y_prev + b_o)
    y = o * tanh(c)

There are no peephole connections. Gate parameters are stored stacked in the
order ``z, i, f, o``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import DataError, DivergenceError, ShapeError

__all__ = [
    "GATES",
    "LstmParams",
    "LstmState",
    "LstmConfig",
    "TrainResult",
    "init_params",
    "lstm_step",
    "lstm_forward",
    "predict_sequences",
    "loss_and_grads",
    "train_lstm",
    "LSTMRegressor",
]

GATES = ("z", "i", "f", "o")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmParams:
    """Weights of the cell and readout.

    ``W`` is ``(4h, p)``, ``V`` is ``(4h, h)``, ``b`` is ``(4h,)`` with gate
    blocks in :data:`GATES` order; ``w_out`` is ``(h,)`` and ``b_out`` a float.
    """

    W: np.ndarray
    V: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.w_out = np.asarray(self.w_out, dtype=float)
        self.b_out = float(self.b_out)
        h = self.V.shape[1]
        if (self.V.shape != (4 * h, h) or self.W.ndim != 2 or self.W.shape[0] != 4 * h
                or self.b.shape != (4 * h,) or self.w_out.shape != (h,)):
            raise ShapeError(
                f"inconsistent LSTM shapes: W {self.W.shape}, V {self.V.shape}, "
                f"b {self.b.shape}, w_out {self.w_out.shape}"
            )

    @property
    def hidden_size(self) -> int:
        return self.V.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W_g, V_g, b_g)`` for gate ``name`` in ``z, i, f, o``."""
        h = self.hidden_size
        k = GATES.index(name)
        sl = slice(k * h, (k + 1) * h)
        return self.W[sl], self.V[sl], self.b[sl]

    @classmethod
    def from_gates(cls, gates: dict, w_out, b_out=0.0) -> "LstmParams":
        """Build from ``{"z": (W, V, b), "i": ..., "f": ..., "o": ...}``."""
        W = np.vstack([np.atleast_2d(gates[g][0]) for g in GATES])
        V = np.vstack([np.atleast_2d(gates[g][1]) for g in GATES])
        b = np.concatenate([np.atleast_1d(gates[g][2]) for g in GATES])
        return cls(W, V, b, np.atleast_1d(w_out), b_out)

    @classmethod
    def zeros(cls, hidden_size: int, input_size: int) -> "LstmParams":
        h, p = hidden_size, input_size
        return cls(np.zeros((4 * h, p)), np.zeros((4 * h, h)), np.zeros(4 * h), np.zeros(h))

    def copy(self) -> "LstmParams":
        return LstmParams(self.W.copy(), self.V.copy(), self.b.copy(), self.w_out.copy(), self.b_out)

    def arrays(self) -> List[np.ndarray]:
        return [self.W, self.V, self.b, self.w_out]

    def to_dict(self) -> dict:
        d = {"h": self.hidden_size, "p": self.input_size}
        for g in GATES:
            W, V, b = self.gate(g)
            d[f"W_{g}"] = W.tolist()
            d[f"V_{g}"] = V.tolist()
            d[f"b_{g}"] = b.tolist()
        d["readout"] = {"weights": self.w_out.tolist(), "bias": self.b_out}
        return d

    @classmethod
    def from_dict(cls, d) -> "LstmParams":
        h, p = int(d["h"]), int(d["p"])
        gates = {
            g: (np.asarray(d[f"W_{g}"], dtype=float).reshape(h, p),
                np.asarray(d[f"V_{g}"], dtype=float).reshape(h, h),
                np.asarray(d[f"b_{g}"], dtype=float))
            for g in GATES
        }
        return cls.from_gates(gates, d["readout"]["weights"], d["readout"]["bias"])


@dataclass(frozen=True)
class LstmState:
    c: np.ndarray
    y: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


def _gate_activations(params, x, y_prev):
    h = params.hidden_size
    a = x @ params.W.T + y_prev @ params.V.T + params.b
    z = np.tanh(a[..., :h])
    i = _sigmoid(a[..., h:2 * h])
    f = _sigmoid(a[..., 2 * h:3 * h])
    o = _sigmoid(a[..., 3 * h:])
    return z, i, f, o


def lstm_step(params: LstmParams, x, state: LstmState) -> Tuple[np.ndarray, LstmState]:
    """Advance the cell by one input vector; returns ``(y, new_state)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.input_size,):
        raise ShapeError(f"expected input of shape ({params.input_size},), got {x.shape}")
    if state.c.shape != (params.hidden_size,) or state.y.shape != (params.hidden_size,):
        raise ShapeError(f"state does not match hidden size {params.hidden_size}")
    z, i, f, o = _gate_activations(params, x, state.y)
    c = i * z + f * state.c
    y = o * np.tanh(c)
    return y, LstmState(c, y)


def lstm_forward(params: LstmParams, xs) -> np.ndarray:
    """Run a sequence of shape ``(T, p)`` from the zero state; returns ``(T, h)`` outputs."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise DataError(f"expected a non-empty (T, p) sequence, got shape {xs.shape}")
    state = LstmState.zeros(params.hidden_size)
    outputs = []
    for x in xs:
        y, state = lstm_step(params, x, state)
        outputs.append(y)
    return np.array(outputs)


def _as_batch(params, xs):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 2:
        xs = xs[None]
    if xs.ndim != 3 or xs.shape[0] == 0 or xs.shape[1] == 0:
        raise DataError(f"expected non-empty windows of shape (N, T, p), got {xs.shape}")
    if xs.shape[2] != params.input_size:
        raise ShapeError(f"expected {params.input_size} input features, got {xs.shape[2]}")
    return xs


def _forward_batch(params, xs):
    """Batched forward pass keeping every activation needed by BPTT."""
    n, T, _ = xs.shape
    h = params.hidden_size
    c = np.zeros((n, h))
    y = np.zeros((n, h))
    cache = []
    for t in range(T):
        z, i, f, o = _gate_activations(params, xs[:, t], y)
        c_prev, y_prev = c, y
        c = i * z + f * c_prev
        tc = np.tanh(c)
        y = o * tc
        cache.append((z, i, f, o, c_prev, y_prev, tc))
    return y, cache


def predict_sequences(params: LstmParams, xs) -> np.ndarray:
    """Scalar head ``w_out . y_T + b_out`` for every window in ``xs`` (N, T, p)."""
    xs = _as_batch(params, xs)
    y_last, _ = _forward_batch(params, xs)
    return y_last @ params.w_out + params.b_out


def loss_and_grads(params: LstmParams, xs, targets):
    """Mean squared error of the scalar head and its gradient by BPTT.

    Returns
    -------
    loss : float
    grads : LstmParams
        Gradient with the same layout as ``params``.
    """
    xs = _as_batch(params, xs)
    targets = np.asarray(targets, dtype=float).ravel()
    n, T, _ = xs.shape
    y_last, cache = _forward_batch(params, xs)
    resid = y_last @ params.w_out + params.b_out - targets
    loss = float(np.mean(resid ** 2))

    dpred = 2.0 * resid / n
    g_w_out = y_last.T @ dpred
    g_b_out = float(dpred.sum())
    dW = np.zeros_like(params.W)
    dV = np.zeros_like(params.V)
    db = np.zeros_like(params.b)
    dy = np.outer(dpred, params.w_out)
    dc = np.zeros_like(dy)
    for t in range(T - 1, -1, -1):
        z, i, f, o, c_prev, y_prev, tc = cache[t]
        do = dy * tc
        dc = dc + dy * o * (1.0 - tc ** 2)
        da = np.concatenate([
            dc * i * (1.0 - z ** 2),
            dc * z * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            do * o * (1.0 - o),
        ], axis=1)
        dW += da.T @ xs[:, t]
        dV += da.T @ y_prev
        db += da.sum(axis=0)
        dy = da @ params.V
        dc = dc * f
    return loss, LstmParams(dW, dV, db, g_w_out, g_b_out)


def init_params(hidden_size: int, input_size: int, seed=None, forget_bias: float = 1.0) -> LstmParams:
    """Uniform ``±1/sqrt(p)`` input weights, ``±1/sqrt(h)`` recurrent and readout
    weights, forget-gate bias ``forget_bias`` and all other biases zero."""
    if hidden_size < 1 or input_size < 1:
        raise ValueError(f"hidden_size and input_size must be >= 1, got {hidden_size}, {input_size}")
    rng = np.random.default_rng(seed)
    h, p = hidden_size, input_size
    W = rng.uniform(-1, 1, size=(4 * h, p)) / np.sqrt(p)
    V = rng.uniform(-1, 1, size=(4 * h, h)) / np.sqrt(h)
    b = np.zeros(4 * h)
    b[2 * h:3 * h] = forget_bias
    w_out = rng.uniform(-1, 1, size=h) / np.sqrt(h)
    return LstmParams(W, V, b, w_out, 0.0)


@dataclass(frozen=True)
class LstmConfig:
    hidden_size: int = 8
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    clip_norm: float = 1.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
        }


@dataclass
class TrainResult:
    params: LstmParams
    loss_history: List[float]
    initial_loss: float
    config: LstmConfig = field(default_factory=LstmConfig)


def train_lstm(xs, targets, config: LstmConfig = LstmConfig(),
               params: Optional[LstmParams] = None) -> TrainResult:
    """Minimise the MSE of the scalar head with Adam on shuffled mini-batches.

    The global gradient norm is clipped to ``config.clip_norm`` before each
    update. ``loss_history[e]`` is the full-dataset MSE after epoch ``e``.
    Everything is reproducible from ``config.seed``.

    Raises
    ------
    DataError
        If ``xs`` is empty.
    DivergenceError
        If the loss becomes non-finite.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 3 or xs.shape[0] == 0:
        raise DataError(f"expected non-empty windows of shape (N, T, p), got {xs.shape}")
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.shape[0] != xs.shape[0]:
        raise ShapeError(f"{xs.shape[0]} windows but {targets.shape[0]} targets")
    if config.hidden_size < 1:
        raise ValueError(f"hidden_size must be >= 1, got {config.hidden_size}")

    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(config.hidden_size, xs.shape[2], seed=rng)
    else:
        params = params.copy()
    initial_loss = float(np.mean((predict_sequences(params, xs) - targets) ** 2))

    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    m = [np.zeros_like(a) for a in params.arrays()] + [0.0]
    v = [np.zeros_like(a) for a in params.arrays()] + [0.0]
    step = 0
    history = []
    n = xs.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, g = loss_and_grads(params, xs[idx], targets[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            grads = g.arrays() + [g.b_out]
            norm = np.sqrt(sum(float(np.sum(np.square(x))) for x in grads))
            if config.clip_norm and norm > config.clip_norm:
                grads = [x * (config.clip_norm / norm) for x in grads]
            step += 1
            updated = []
            for k, (p_k, g_k) in enumerate(zip(params.arrays() + [params.b_out], grads)):
                m[k] = beta1 * m[k] + (1 - beta1) * g_k
                v[k] = beta2 * v[k] + (1 - beta2) * np.square(g_k)
                m_hat = m[k] / (1 - beta1 ** step)
                v_hat = v[k] / (1 - beta2 ** step)
                updated.append(p_k - config.learning_rate * m_hat / (np.sqrt(v_hat) + adam_eps))
            params = LstmParams(*updated)
        epoch_loss = float(np.mean((predict_sequences(params, xs) - targets) ** 2))
        if not np.isfinite(epoch_loss):
            raise DivergenceError(epoch, epoch_loss)
        history.append(epoch_loss)
    return TrainResult(params, history, initial_loss, config)


class LSTMRegressor(RegressorMixin, BaseEstimator):
    """LSTM one-step regressor over lag windows.

    ``X`` is either 3-D ``(n_samples, n_timesteps, n_step_features)`` or the
    flattened 2-D form ``(n_samples, n_timesteps * n_step_features)`` produced
    by :func:`wavecast.dataset.make_supervised`, in which case
    ``n_timesteps`` must be given. Inputs and targets are standardized with
    training statistics before entering the network.

    Parameters
    ----------
    n_timesteps : int, optional
        Window length used to reshape 2-D input.
    hidden_size : int, default=8
    learning_rate : float, default=0.01
    epochs : int, default=200
    batch_size : int, default=32
    clip_norm : float, default=1.0
    seed : int, default=0
    """

    def __init__(self, n_timesteps=None, hidden_size=8, learning_rate=0.01, epochs=200,
                 batch_size=32, clip_norm=1.0, seed=0):
        self.n_timesteps = n_timesteps
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.seed = seed

    def _windows(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 3:
            return X
        T = self.n_timesteps or 1
        if X.shape[1] % T:
            raise ShapeError(f"{X.shape[1]} features do not split into {T} timesteps")
        return X.reshape(X.shape[0], T, X.shape[1] // T)

    def fit(self, X, y):
        flat = np.asarray(X, dtype=float)
        if flat.ndim == 3:
            flat = flat.reshape(flat.shape[0], -1)
        flat, y = validate_data(self, flat, y, y_numeric=True)
        xs = self._windows(np.asarray(X, dtype=float) if np.ndim(X) == 3 else flat)
        self.x_mean_ = xs.reshape(-1, xs.shape[2]).mean(axis=0)
        self.x_scale_ = xs.reshape(-1, xs.shape[2]).std(axis=0)
        self.x_scale_[self.x_scale_ == 0] = 1.0
        self.y_mean_ = float(np.mean(y))
        self.y_scale_ = float(np.std(y)) or 1.0
        config = LstmConfig(self.hidden_size, self.learning_rate, self.epochs,
                            self.batch_size, self.clip_norm, self.seed)
        result = train_lstm((xs - self.x_mean_) / self.x_scale_,
                            (y - self.y_mean_) / self.y_scale_, config)
        self.params_ = result.params
        self.loss_history_ = result.loss_history
        self.initial_loss_ = result.initial_loss
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        is_3d = np.ndim(X) == 3
        flat = np.asarray(X, dtype=float)
        if is_3d:
            flat = flat.reshape(flat.shape[0], -1)
        flat = validate_data(self, flat, reset=False)
        xs = self._windows(np.asarray(X, dtype=float) if is_3d else flat)
        out = predict_sequences(self.params_, (xs - self.x_mean_) / self.x_scale_)
        return out * self.y_scale_ + self.y_mean_

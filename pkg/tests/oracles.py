"""Independent reference solvers used only by the test-suite."""
import numpy as np


def _project_box_hyperplane(v, s, C):
    """Euclidean projection onto {0 <= a <= C, s.a = 0}.

    The projection is ``clip(v - mu*s, 0, C)`` where ``mu`` zeroes the
    piecewise-linear, non-increasing function ``g(mu) = s.clip(v - mu*s, 0, C)``;
    ``g`` is evaluated at every breakpoint and interpolated exactly.
    """
    bps = np.unique(np.concatenate([s * v, s * (v - C)]))
    vals = (s[None, :] * np.clip(v[None, :] - bps[:, None] * s[None, :], 0.0, C)).sum(axis=1)
    if vals[0] <= 0:
        mu = bps[0]
    elif vals[-1] >= 0:
        mu = bps[-1]
    else:
        k = int(np.argmax(vals <= 0))
        x0, x1, g0, g1 = bps[k - 1], bps[k], vals[k - 1], vals[k]
        mu = x0 + g0 * (x1 - x0) / (g0 - g1)
    return np.clip(v - mu * s, 0.0, C)


def dense_svr_dual(K, y, C, eps, iters=200_000, tol=1e-14):
    """Solve the epsilon-SVR dual by accelerated projected gradient.

    Works on the unstacked variables (alpha, alpha*) and returns
    ``(beta, bias, dual_objective)`` in maximisation form
    ``-0.5 b'Kb - eps*sum(alpha+alpha*) + y'b``.
    """
    n = len(y)
    s = np.concatenate([np.ones(n), -np.ones(n)])
    Q = np.block([[K, -K], [-K, K]])
    p = np.concatenate([eps - y, eps + y])
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    a = np.zeros(2 * n)
    z = a.copy()
    t = 1.0
    for it in range(iters):
        a_new = _project_box_hyperplane(z - (Q @ z + p) / L, s, C)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = a_new + ((t - 1) / t_new) * (a_new - a)
        step = np.abs(a_new - a).max()
        a, t = a_new, t_new
        if step < tol and it > 100:
            break
    alpha, alpha_star = a[:n], a[n:]
    beta = alpha - alpha_star
    f0 = K @ beta
    margin = 1e-6 * C
    candidates = []
    for i in range(n):
        if margin < alpha[i] < C - margin:
            candidates.append(y[i] - f0[i] - eps)
        if margin < alpha_star[i] < C - margin:
            candidates.append(y[i] - f0[i] + eps)
    if candidates:
        bias = float(np.mean(candidates))
    else:
        # no free multiplier: midpoint of the interval allowed by the KKT conditions
        r = y - f0
        lower = np.where(alpha < margin, r - eps, -np.inf)
        lower = np.maximum(lower, np.where(alpha_star > C - margin, r + eps, -np.inf))
        upper = np.where(alpha > C - margin, r - eps, np.inf)
        upper = np.minimum(upper, np.where(alpha_star < margin, r + eps, np.inf))
        lo, hi = lower.max(), upper.min()
        bias = float((lo + hi) / 2)
    objective = -0.5 * beta @ K @ beta - eps * a.sum() + y @ beta
    return beta, bias, float(objective)


def numerical_gradient(f, x, step=1e-5):
    """Central finite differences of scalar ``f`` with respect to array ``x`` (in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        up = f()
        x[idx] = orig - step
        down = f()
        x[idx] = orig
        grad[idx] = (up - down) / (2 * step)
    return grad


def svr_instance(seed):
    """Small random regression problem: ``(X, y, X_test, kernel_name)``.

    Even seeds use the linear kernel, odd seeds the medium gaussian.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 26))
    p = int(rng.integers(1, 4))
    X = rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + 0.3 * rng.normal(size=n)
    kind = "linear" if seed % 2 == 0 else "medium_gaussian"
    return X, y, rng.normal(size=(10, p)), kind


def lstm_hand_example():
    """h=1, p=1, every weight 1, every bias 0, x=1, zero initial state."""
    import math

    z = math.tanh(1.0)
    i = f = o = 1.0 / (1.0 + math.exp(-1.0))
    c = z * i + 0.0 * f
    return {"z": z, "i": i, "f": f, "o": o, "c": c, "y": math.tanh(c) * o}

"""Linear predictors f(x) = <w, x> + b trained on the epsilon-insensitive
regression objective or its hinge-loss classification counterpart.

Both objectives share one dual solver: block-2 dual coordinate descent (SMO
with maximal violating pair selection) on

    min  1/2 a^T (z z^T * K) a + p^T a    s.t.  z^T a = 0,  0 <= a <= c_reg

which covers hinge-loss classification (z = labels, p = -1) and, after the
usual variable doubling, the epsilon-tube regression problem.  The solver
stops when the maximum projected-gradient violation drops below tol or the
update budget runs out; the bias is recovered from the complementary
slackness conditions of free support vectors, falling back to the midpoint
of the feasible interval.  Every step is deterministic, so a fixed seed
(kept in the signatures for interface stability) reproduces models exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError

_TAU = 1e-12


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    epsilon: float  # ignored in classification mode
    c_reg: float
    mode: str  # "regression" | "classification"

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if not np.isfinite(self.w).all() or not np.isfinite(self.b):
            raise NumericError("SVM model contains non-finite values")
        if self.mode not in ("regression", "classification"):
            raise DataError(f"unknown SVM mode {self.mode!r}")


@dataclass
class SvmParams:
    """Solver knobs shared by every training call in the pipeline."""

    c_reg: float = 1.0
    tol: float = 1e-6
    max_passes: int = 10_000
    seed: int = 0


@dataclass
class MulticlassModel:
    """One-vs-rest bundle; prediction is the argmax of raw scores."""

    classes: list[str]  # sorted ascending
    models: list[SvmModel]  # aligned with classes

    def scores(self, x: np.ndarray) -> np.ndarray:
        return np.array([predict(m, x) for m in self.models])

    def predict_label(self, x: np.ndarray) -> str:
        # argmax takes the first maximum, i.e. the lexicographically
        # smallest class label since classes are sorted
        return self.classes[int(self.scores(x).argmax())]


def _gram(x: np.ndarray) -> np.ndarray:
    """Dense Gram matrix via chunked elementwise products (BLAS-free so the
    summation order never depends on thread count)."""
    n = x.shape[0]
    out = np.empty((n, n))
    for lo in range(0, n, 256):
        hi = min(lo + 256, n)
        out[lo:hi] = (x[lo:hi, None, :] * x[None, :, :]).sum(axis=2)
    return out


def _solve_smo(
    kernel: np.ndarray,
    z: np.ndarray,
    p: np.ndarray,
    c: float,
    tol: float,
    max_iter: int,
    history: list | None = None,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Generic SMO loop; returns (alpha, gradient, converged)."""
    m = kernel.shape[0]
    alpha = np.zeros(m)
    grad = p.astype(np.float64).copy()

    converged = False
    for it in range(max_iter):
        v = -z * grad
        up = ((z > 0) & (alpha < c)) | ((z < 0) & (alpha > 0))
        low = ((z > 0) & (alpha > 0)) | ((z < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.where(up, v, -np.inf).argmax())
        j = int(np.where(low, v, np.inf).argmin())
        violation = v[i] - v[j]
        if history is not None:
            history.append(
                {"iter": it, "violation": float(violation),
                 "alpha_min": float(alpha.min()), "alpha_max": float(alpha.max())}
            )
        if violation <= tol:
            converged = True
            break

        # feasible direction: da_i = z_i s, da_j = -z_j s with s > 0
        qbar = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        g = z[i] * grad[i] - z[j] * grad[j]  # directional derivative = -violation
        s = -g / max(qbar, _TAU)
        cap_i = (c - alpha[i]) if z[i] > 0 else alpha[i]
        cap_j = (c - alpha[j]) if z[j] < 0 else alpha[j]
        s = min(s, cap_i, cap_j)
        alpha[i] += z[i] * s
        alpha[j] -= z[j] * s
        for t in (i, j):
            if alpha[t] < _TAU:
                alpha[t] = 0.0
            elif c - alpha[t] < _TAU:
                alpha[t] = c
        grad += z * (kernel[:, i] - kernel[:, j]) * s
    return alpha, grad, converged


def _recover_bias(alpha: np.ndarray, grad: np.ndarray, z: np.ndarray, c: float) -> float:
    """b from free support vectors, else midpoint of the KKT interval."""
    zg = z * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return -float(zg[free].mean())
    ub_mask = ((z > 0) & (alpha <= 0)) | ((z < 0) & (alpha >= c))
    lb_mask = ((z > 0) & (alpha >= c)) | ((z < 0) & (alpha <= 0))
    ub = float(zg[ub_mask].min()) if ub_mask.any() else np.inf
    lb = float(zg[lb_mask].max()) if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return -lb if np.isfinite(lb) else 0.0
    if not np.isfinite(lb):
        return -ub
    return -(ub + lb) / 2.0


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if len(data) == 0:
        raise DataError("empty training set")
    xs, ys = zip(*data)
    dims = {len(np.atleast_1d(x)) for x in xs}
    if len(dims) != 1:
        raise DataError(f"inconsistent sample dimensions: {sorted(dims)}")
    x = np.array([np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in xs])
    y = np.array(ys, dtype=np.float64)
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        raise NumericError("training data contains non-finite values")
    return x, y


def train_svr(
    data,
    epsilon: float,
    c_reg: float,
    tol: float = 1e-6,
    max_passes: int = 10_000,
    seed: int = 0,
    history: list | None = None,
) -> SvmModel:
    """Epsilon-insensitive linear regression.

    Minimizes 1/2 ||w||^2 + c_reg * sum(xi + xi*) subject to every target
    lying within epsilon + slack of f(x).
    """
    if c_reg <= 0:
        raise DataError(f"c_reg must be positive, got {c_reg}")
    if epsilon < 0:
        raise DataError(f"epsilon must be non-negative, got {epsilon}")
    x, y = _as_arrays(data)
    n = x.shape[0]
    kernel = np.tile(_gram(x), (2, 2))
    z = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    alpha, grad, converged = _solve_smo(kernel, z, p, c_reg, tol, max_passes, history)
    if not converged:
        # max_passes is a hard budget, not an error; the model is still the
        # best iterate found
        pass
    beta = alpha[:n] - alpha[n:]
    w = (beta[:, None] * x).sum(axis=0)
    b = _recover_bias(alpha, grad, z, c_reg)
    return SvmModel(w=w, b=b, epsilon=epsilon, c_reg=c_reg, mode="regression")


def train_classifier(
    data,
    c_reg: float,
    tol: float = 1e-6,
    max_passes: int = 10_000,
    seed: int = 0,
    history: list | None = None,
) -> SvmModel:
    """Soft-margin linear SVM over labels in {-1, +1}."""
    if c_reg <= 0:
        raise DataError(f"c_reg must be positive, got {c_reg}")
    x, y = _as_arrays(data)
    labels = set(np.unique(y).tolist())
    if not labels <= {-1.0, 1.0}:
        raise DataError(f"classification labels must be +/-1, got {sorted(labels)}")
    if len(labels) < 2:
        raise DataError("single-class training set")
    kernel = _gram(x)
    p = -np.ones(x.shape[0])
    alpha, grad, _ = _solve_smo(kernel, y, p, c_reg, tol, max_passes, history)
    w = ((alpha * y)[:, None] * x).sum(axis=0)
    b = _recover_bias(alpha, grad, y, c_reg)
    return SvmModel(w=w, b=b, epsilon=0.0, c_reg=c_reg, mode="classification")


def predict(model: SvmModel, x) -> float:
    """Raw decision value <w, x> + b."""
    vec = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if vec.shape != model.w.shape:
        raise DataError(f"dimension mismatch: x has {vec.shape}, w has {model.w.shape}")
    return float((model.w * vec).sum() + model.b)


def train_multiclass(
    data,
    c_reg: float,
    tol: float = 1e-6,
    max_passes: int = 10_000,
    seed: int = 0,
) -> MulticlassModel:
    """One-vs-rest bundle over string class labels."""
    if len(data) == 0:
        raise DataError("empty training set")
    classes = sorted({label for _, label in data})
    if len(classes) < 2:
        raise DataError(f"need at least 2 classes, got {classes}")
    models = []
    for cls in classes:
        binary = [(x, 1.0 if label == cls else -1.0) for x, label in data]
        models.append(train_classifier(binary, c_reg, tol, max_passes, seed))
    return MulticlassModel(classes=classes, models=models)


def primal_objective(model: SvmModel, data) -> float:
    """Objective value of the training problem at this model.

    Slacks are reconstructed as the loss excesses, which is exactly their
    optimal value for a fixed (w, b).
    """
    x, y = _as_arrays(data)
    f = (x * model.w).sum(axis=1) + model.b
    if model.mode == "regression":
        slack = np.maximum(0.0, np.abs(y - f) - model.epsilon)
    else:
        slack = np.maximum(0.0, 1.0 - y * f)
    return float(0.5 * (model.w * model.w).sum() + model.c_reg * slack.sum())


def reconstructed_slacks(model: SvmModel, data) -> tuple[np.ndarray, np.ndarray]:
    """Optimal (xi, xi*) for a regression model at its training points."""
    x, y = _as_arrays(data)
    f = (x * model.w).sum(axis=1) + model.b
    xi = np.maximum(0.0, (y - f) - model.epsilon)
    xi_star = np.maximum(0.0, (f - y) - model.epsilon)
    return xi, xi_star

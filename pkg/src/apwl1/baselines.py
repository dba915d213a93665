"""Comparison methods: zero-attracting LMS, its reweighted variant, and a
batch LASSO solved by projected gradient on the l1 ball."""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .projections import WeightedL1Ball, project_weighted_l1_ball

__all__ = ["LmsConfig", "zalms_step", "rzalms_step", "lms_run", "lasso_solve", "LassoResult"]


@dataclass(frozen=True)
class LmsConfig:
    """Step size ``mu``, zero-attractor strength ``rho``, and ``eta_inv``
    (``1/eta``) for the reweighted attractor ``rho sgn(h)/(1 + eta_inv |h|)``."""

    mu: float
    rho: float = 0.0
    eta_inv: float = 10.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not self.eta_inv >= 0:
            raise ValueError(f"eta_inv must be >= 0, got {self.eta_inv}")


def _check(h, x):
    h = np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    if h.shape != x.shape or h.ndim != 1:
        raise ValueError(f"dimension mismatch: h {h.shape}, x {x.shape}")
    return h, x


def zalms_step(h, x, y, cfg):
    # np.sign(0) == 0, which keeps exact zeros in place
    h, x = _check(h, x)
    e = y - h @ x
    return h + cfg.mu * e * x - cfg.rho * np.sign(h)


def rzalms_step(h, x, y, cfg):
    h, x = _check(h, x)
    e = y - h @ x
    return h + cfg.mu * e * x - cfg.rho * np.sign(h) / (1.0 + cfg.eta_inv * np.abs(h))


def lms_run(X, y, cfg, truth, h0=None, reweighted=True):
    """Run (R)ZA-LMS over the rows of ``X``.

    Returns the final estimate and the squared error against ``truth``
    (a vector or an ``(N, L)`` array) after every update. Divergent
    settings produce inf/nan errors rather than raising.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    T = np.asarray(truth, dtype=float)
    if T.ndim == 1:
        T = np.broadcast_to(T, X.shape)
    T = np.ascontiguousarray(T)
    h0 = np.zeros(X.shape[1]) if h0 is None else np.asarray(h0, dtype=float)
    eta_inv = cfg.eta_inv if reweighted else 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        return _kernels.lms_run(X, y, T, h0, float(cfg.mu), float(cfg.rho), float(eta_inv))


@dataclass
class LassoResult:
    h: np.ndarray
    objective: np.ndarray
    iterations: int
    step: float


def _op_norm2(X, n_iter=100, seed=0):
    """Squared spectral norm of X by power iteration on X^T X."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        u = X.T @ (X @ v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        lam_new = float(v @ u)
        v = u / nu
        if abs(lam_new - lam) <= 1e-12 * max(lam_new, 1.0):
            lam = lam_new
            break
        lam = lam_new
    # a slight overestimate keeps the step below 1/L_f
    return lam * (1.0 + 1e-6)


def lasso_solve(X, y, delta, max_iter=5000, tol=1e-10, h0=None):
    """Minimize ``||X h - y||^2`` over ``||h||_1 <= delta`` by projected gradient.

    The step is ``1/(2 ||X||_op^2)``, the inverse Lipschitz constant of the
    gradient of the squared residual. Stops when the relative decrease of
    the objective falls below ``tol`` or after ``max_iter`` iterations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite data passed to lasso_solve")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    L = X.shape[1]
    ball = WeightedL1Ball.unweighted(L, delta)
    lip = 2.0 * _op_norm2(X)
    h = np.zeros(L) if h0 is None else project_weighted_l1_ball(h0, ball)
    r = X @ h - y
    f = float(r @ r)
    if lip == 0.0:
        return LassoResult(h, np.array([f]), 0, 0.0)
    step = 1.0 / lip
    obj = [f]
    it = 0
    for it in range(1, max_iter + 1):
        h_new = project_weighted_l1_ball(h - step * 2.0 * (X.T @ r), ball)
        r_new = X @ h_new - y
        f_new = float(r_new @ r_new)
        h, r = h_new, r_new
        obj.append(f_new)
        if f - f_new <= tol * max(f, 1e-300):
            f = f_new
            break
        f = f_new
    return LassoResult(h, np.asarray(obj), it, step)

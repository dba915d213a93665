"""Adaptive projections onto hyperslabs and weighted l1 balls (APWL1 / APL1).

Each step projects the current estimate onto the last ``q`` hyperslabs,
averages the projections, extrapolates by ``kappa * M_n`` and projects the
result onto a weighted l1 ball whose weights are recomputed from the
current estimate. With ``weighting="unweighted"`` the ball is the plain
l1 ball (APL1).

The API is functional: :func:`init` builds a :class:`FilterState` and
:func:`step` returns a new state without touching the old one.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .projections import ProjectionError, as_estimate, BALL_MEMBERSHIP_RTOL

__all__ = [
    "ChangeDetector",
    "FilterConfig",
    "FilterState",
    "FilterRun",
    "init",
    "step",
    "run",
    "compute_extrapolation_bound",
    "update_ball_weights",
    "eps_prime_schedule",
    "detect_change",
    "window_indices",
]

WEIGHTINGS = ("weighted", "unweighted")
SCHEDULES = ("decaying", "decaying-with-reset")


@dataclass(frozen=True)
class ChangeDetector:
    """Flags a step norm larger than ``threshold`` times the median of the
    previous ``window`` step norms; after a detection it stays silent for
    ``window`` samples."""

    threshold: float = 5.0
    window: int = 50

    def __post_init__(self):
        if self.threshold <= 0 or self.window < 1:
            raise ValueError("detector needs threshold > 0 and window >= 1")


@dataclass(frozen=True)
class FilterConfig:
    L: int
    q: int = 1
    eps: float = 0.0
    delta: float = 1.0
    kappa: float = 0.5
    weighting: str = "weighted"
    eps_prime_base: float = 0.01
    eps_prime_schedule: str = "decaying"
    detector: ChangeDetector = field(default_factory=ChangeDetector)
    omega_rule: str = "uniform"

    def __post_init__(self):
        if int(self.L) < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if int(self.q) < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not 0 < self.kappa < 2:
            raise ValueError(f"kappa must lie in (0, 2), got {self.kappa}")
        if not self.eps_prime_base > 0:
            raise ValueError(f"eps_prime_base must be > 0, got {self.eps_prime_base}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.eps_prime_schedule not in SCHEDULES:
            raise ValueError(f"eps_prime_schedule must be one of {SCHEDULES}")
        if self.omega_rule != "uniform":
            raise ValueError("only the uniform omega rule is supported")

    @property
    def weighted(self):
        return self.weighting == "weighted"


@dataclass(frozen=True, eq=False)
class FilterState:
    """Everything the recursion carries from one sample to the next.

    The window arrays are a ring buffer with ``q`` rows; slot ``t % q``
    holds sample ``t``. Only the first ``min(n, q)`` rows are meaningful.
    ``w`` and ``eps_prime`` are the values for time ``n``.
    """

    config: FilterConfig
    n: int
    h: np.ndarray
    X_win: np.ndarray
    y_win: np.ndarray
    xx_win: np.ndarray
    t_win: np.ndarray
    w: np.ndarray
    eps_prime: float
    reset_epoch: int = 0
    step_norms: tuple = ()
    since_change: int | None = None
    changes: tuple = ()
    last_M: float = float("nan")
    last_mu: float = float("nan")

    @property
    def window_size(self):
        return min(self.n, self.config.q)


@dataclass
class FilterRun:
    h: np.ndarray          # (N+1, L): h_0 .. h_N
    M: np.ndarray          # (N,) extrapolation bound used at each step
    mu: np.ndarray         # (N,)
    errors: np.ndarray | None
    changes: tuple
    state: FilterState


def update_ball_weights(h, eps_prime):
    """``w_i = 1 / (|h_i| + eps_prime)``."""
    if not eps_prime > 0:
        raise ValueError(f"eps_prime must be > 0, got {eps_prime}")
    return 1.0 / (np.abs(np.asarray(h, dtype=float)) + eps_prime)


def eps_prime_schedule(n, base, mode="decaying", reset_epoch=None):
    """Decaying offset ``base + 1/(n - n0 + 1)``; ``n0`` is 0 unless a
    change was detected, in which case it is the reset epoch."""
    if not base > 0:
        raise ValueError(f"eps_prime base must be > 0, got {base}")
    if mode == "decaying":
        n0 = 0
    elif mode == "decaying-with-reset":
        n0 = 0 if reset_epoch is None else int(reset_epoch)
    else:
        raise ValueError(f"unknown eps_prime schedule {mode!r}")
    return base + 1.0 / (n - n0 + 1)


def compute_extrapolation_bound(h, projections, omegas):
    """Ratio of the averaged squared projection distances to the squared
    distance of the averaged projection; 1 when the average equals ``h``.
    Convexity of the squared norm makes the value at least 1."""
    if len(projections) == 0:
        raise ValueError("need at least one projection")
    if len(projections) != len(omegas):
        raise ValueError("projections and omegas differ in length")
    omegas = np.asarray(omegas, dtype=float)
    if abs(omegas.sum() - 1.0) > 1e-12 or np.any(omegas <= 0) or np.any(omegas > 1):
        raise ValueError("omegas must lie in (0, 1] and sum to 1")
    h = np.asarray(h, dtype=float)
    diffs = np.asarray(projections, dtype=float) - h
    num = float(omegas @ np.einsum("ij,ij->i", diffs, diffs))
    disp = omegas @ diffs
    den = float(disp @ disp)
    if den <= _kernels.MN_DENOM_TOL:
        return 1.0
    return num / den


def detect_change(step_norm_history, threshold=5.0, window=50, since_change=None):
    """True when the newest step norm exceeds ``threshold`` times the median
    of the ``window`` step norms before it.

    Returns False while fewer than ``window + 1`` norms are available and
    while ``since_change`` (samples since the last detection) is below
    ``window``.
    """
    hist = step_norm_history
    if len(hist) < window + 1:
        return False
    if since_change is not None and since_change < window:
        return False
    ref = np.median(np.asarray(hist[-window - 1:-1], dtype=float))
    return bool(hist[-1] > threshold * ref)


def init(config, h0=None):
    L, q = int(config.L), int(config.q)
    h = np.zeros(L) if h0 is None else as_estimate(h0, L).copy()
    ep = eps_prime_schedule(0, config.eps_prime_base, config.eps_prime_schedule)
    w = update_ball_weights(h, ep) if config.weighted else np.ones(L)
    return FilterState(
        config=config, n=0, h=h,
        X_win=np.zeros((q, L)), y_win=np.zeros(q), xx_win=np.zeros(q),
        t_win=np.full(q, -1, dtype=np.int64),
        w=w, eps_prime=ep,
    )


def window_indices(state):
    """Time indices of the hyperslabs currently held, oldest first."""
    t = state.t_win[: state.window_size]
    return sorted(int(i) for i in t)


def step(state, x, y):
    """Consume one measurement pair and return the next state.

    Raises ``ValueError`` for a wrong-length or zero ``x`` or a non-finite
    ``y``; the slab is then rejected and ``n`` does not advance.
    """
    cfg = state.config
    x = as_estimate(x, cfg.L)
    y = float(y)
    if not np.isfinite(y):
        raise ValueError("measurement y is not finite")
    xx = float(x @ x)
    if xx == 0.0:
        raise ValueError("zero measurement vector; hyperslab rejected")

    n, q = state.n, cfg.q
    slot = n % q
    X_win = state.X_win.copy()
    y_win = state.y_win.copy()
    xx_win = state.xx_win.copy()
    t_win = state.t_win.copy()
    X_win[slot] = x
    y_win[slot] = y
    xx_win[slot] = xx
    t_win[slot] = n
    m = min(n + 1, q)

    h = state.h
    omega = np.full(m, 1.0 / m)
    disp, M = _kernels.slab_combine(h, X_win[:m], y_win[:m], xx_win[:m], cfg.eps, omega)
    mu = cfg.kappa * M
    z = h + mu * disp

    if cfg.weighted:
        w = update_ball_weights(h, state.eps_prime)
    else:
        w = state.w
    if float(w @ np.abs(z)) <= cfg.delta * (1.0 + BALL_MEMBERSHIP_RTOL):
        h_new = z
    else:
        h_new, r = _kernels.wl1_outside(z, w, cfg.delta)
        if r < 0:
            raise ProjectionError("ball projection found no active index")

    norms = state.step_norms + (float(np.linalg.norm(h_new - h)),)
    det = cfg.detector
    norms = norms[-(det.window + 1):]
    since = None if state.since_change is None else state.since_change + 1
    reset_epoch, changes = state.reset_epoch, state.changes
    if cfg.eps_prime_schedule == "decaying-with-reset" and detect_change(
        norms, det.threshold, det.window, since
    ):
        reset_epoch = n + 1
        since = 0
        changes = changes + (n + 1,)

    ep = eps_prime_schedule(n + 1, cfg.eps_prime_base, cfg.eps_prime_schedule, reset_epoch)
    w_next = update_ball_weights(h_new, ep) if cfg.weighted else state.w
    return replace(
        state, n=n + 1, h=h_new,
        X_win=X_win, y_win=y_win, xx_win=xx_win, t_win=t_win,
        w=w_next, eps_prime=ep, reset_epoch=reset_epoch,
        step_norms=norms, since_change=since, changes=changes,
        last_M=M, last_mu=mu,
    )


def run(config, X, y, h0=None, truth=None):
    """Feed the rows of ``X`` and entries of ``y`` through the filter.

    ``truth`` may be a fixed vector or an ``(N, L)`` array; if given, the
    squared error of each new estimate against the truth of the sample
    that produced it is returned in ``FilterRun.errors``. Rows rejected by
    :func:`step` leave the estimate in place.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N = X.shape[0]
    state = init(config, h0)
    H = np.empty((N + 1, config.L))
    H[0] = state.h
    Ms = np.full(N, np.nan)
    mus = np.full(N, np.nan)
    for k in range(N):
        try:
            state = step(state, X[k], y[k])
        except ValueError:
            if not np.any(X[k]):
                H[k + 1] = state.h
                continue
            raise
        H[k + 1] = state.h
        Ms[k] = state.last_M
        mus[k] = state.last_mu
    errors = None
    if truth is not None:
        T = np.asarray(truth, dtype=float)
        errors = np.sum((H[1:] - T) ** 2, axis=1)
    return FilterRun(H, Ms, mus, errors, state.changes, state)

"""Metric projections onto hyperslabs and weighted l1 balls.

All functions are pure and return new arrays.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import ProjectionError

__all__ = [
    "Hyperslab",
    "WeightedL1Ball",
    "ProjectionError",
    "as_estimate",
    "project_hyperslab",
    "project_halfspace_nonneg",
    "project_weighted_l1_ball",
    "distance_to_hyperslab",
    "ball_contains",
]

# Relative slack on the radius for the "already inside" test.
BALL_MEMBERSHIP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Hyperslab:
    """The set ``{h : |h @ x - y| <= eps}``."""

    x: np.ndarray
    y: float
    eps: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "eps", float(self.eps))
        if not self.eps >= 0:
            raise ValueError(f"hyperslab half-width must be >= 0, got {self.eps}")
        if not (np.all(np.isfinite(x)) and np.isfinite(self.y)):
            raise ValueError("hyperslab data must be finite")

    @property
    def xnorm2(self):
        return float(self.x @ self.x)

    def contains(self, h, tol=0.0):
        return abs(float(np.asarray(h) @ self.x) - self.y) <= self.eps + tol


@dataclass(frozen=True, eq=False)
class WeightedL1Ball:
    """The set ``{h : sum_i w_i |h_i| <= delta}`` with ``w > 0``, ``delta > 0``."""

    w: np.ndarray
    delta: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "delta", float(self.delta))
        if not self.delta > 0 or not np.isfinite(self.delta):
            raise ValueError(f"ball radius must be positive and finite, got {self.delta}")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("ball weights must be positive and finite")

    @classmethod
    def unweighted(cls, L, delta):
        return cls(np.ones(L), delta)

    def norm(self, h):
        """Weighted l1 norm of ``h``."""
        return float(self.w @ np.abs(h))


def as_estimate(h, L=None):
    """Validate an estimate vector: 1-D, float, finite, optionally of length L."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1:
        raise ValueError(f"estimate must be a 1-D vector, got shape {h.shape}")
    if L is not None and h.shape[0] != L:
        raise ValueError(f"dimension mismatch: expected length {L}, got {h.shape[0]}")
    if not np.all(np.isfinite(h)):
        raise ValueError("estimate contains non-finite entries")
    return h


def _slab_args(h, slab):
    h = as_estimate(h, slab.x.shape[0])
    xx = slab.xnorm2
    if xx == 0.0:
        raise ValueError("hyperslab has a zero measurement vector; projection undefined")
    return h, xx


def project_hyperslab(h, slab):
    """Project ``h`` onto ``slab``.

    Three cases: below the slab, inside it (identity), above it. The move
    is along ``slab.x`` to the nearer of the two bounding hyperplanes.
    """
    h, xx = _slab_args(h, slab)
    r = float(h @ slab.x)
    if slab.y - slab.eps > r:
        return h + ((slab.y - slab.eps - r) / xx) * slab.x
    if slab.y + slab.eps < r:
        return h + ((slab.y + slab.eps - r) / xx) * slab.x
    return h.copy()


def distance_to_hyperslab(h, slab):
    h, xx = _slab_args(h, slab)
    excess = abs(float(h @ slab.x) - slab.y) - slab.eps
    return max(0.0, excess) / np.sqrt(xx)


def project_halfspace_nonneg(x, ball):
    """Project a nonnegative vector onto ``{u : w @ u <= delta}``.

    The result can have negative entries; those coordinates are the ones
    the ball projection drops.
    """
    x = as_estimate(x, ball.w.shape[0])
    if np.any(x < 0):
        raise ValueError("halfspace step expects a nonnegative vector")
    excess = max(0.0, float(x @ ball.w) - ball.delta)
    return x - (excess / float(ball.w @ ball.w)) * ball.w


def ball_contains(h, ball, tol=0.0):
    h = np.asarray(h, dtype=float)
    if h.shape != ball.w.shape:
        raise ValueError(f"dimension mismatch: {h.shape} vs {ball.w.shape}")
    return ball.norm(h) <= ball.delta + tol


def project_weighted_l1_ball(h, ball, return_support=False):
    """Exact Euclidean projection of ``h`` onto a weighted l1 ball.

    Works in the nonnegative orthant on ``|h|``: sort ``|h_i| / w_i`` in
    non-ascending order, shrink the active prefix until every active
    coordinate of the halfspace projection is positive, then scatter back
    and restore signs. Cost is dominated by the sort.

    Parameters
    ----------
    h : array_like, shape (L,)
    ball : WeightedL1Ball
    return_support : bool
        Also return the size of the active set (``L`` if ``h`` is inside).

    Raises
    ------
    ProjectionError
        If the active-set search finds no qualifying index, which cannot
        happen for a valid ball.
    """
    h = as_estimate(h, ball.w.shape[0])
    inside = ball.norm(h) <= ball.delta * (1.0 + BALL_MEMBERSHIP_RTOL)
    if inside:
        out, r = h.copy(), h.shape[0]
    else:
        out, r = _kernels.wl1_outside(h, ball.w, ball.delta)
        if r < 0:
            raise ProjectionError(
                "weighted l1 projection: no index satisfies the active-set inequality"
            )
    if return_support:
        return out, int(r)
    return out

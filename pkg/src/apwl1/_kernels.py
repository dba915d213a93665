"""Hot inner loops.

Every kernel exists twice: a loop-form body compiled with numba and a
vectorized numpy body. ``USE_NUMBA`` picks which one the public names are
bound to; both stay importable so tests and the benchmark can compare them.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# Below this squared norm the combined slab displacement is treated as zero.
MN_DENOM_TOL = 1e-12


class ProjectionError(RuntimeError):
    """The active-set search of the weighted l1 projection found no index."""


# --------------------------------------------------------------------------
# weighted l1 ball projection, for points known to lie outside the ball
# --------------------------------------------------------------------------

@njit
def _wl1_outside_nb(h, w, delta):
    n = h.shape[0]
    a = np.abs(h)
    ratio = a / w
    order = np.argsort(-ratio, kind="mergesort")
    rs = np.empty(n)
    csum_wa = np.empty(n)
    csum_ww = np.empty(n)
    acc_wa = 0.0
    acc_ww = 0.0
    for k in range(n):
        i = order[k]
        rs[k] = ratio[i]
        acc_wa += w[i] * a[i]
        acc_ww += w[i] * w[i]
        csum_wa[k] = acc_wa
        csum_ww[k] = acc_ww

    r = n
    thresh = 0.0
    for _ in range(n):
        thresh = (csum_wa[r - 1] - delta) / csum_ww[r - 1]
        # ratios are non-ascending: qualifying indices form a prefix
        lo = 0
        hi = r
        while lo < hi:
            mid = (lo + hi) // 2
            if rs[mid] > thresh:
                lo = mid + 1
            else:
                hi = mid
        if lo == 0:
            return np.empty(0), -1
        if lo == r:
            break
        r = lo

    out = np.zeros(n)
    for k in range(r):
        i = order[k]
        p = a[i] - thresh * w[i]
        out[i] = p if h[i] >= 0.0 else -p
    return out, r


def _wl1_outside_np(h, w, delta):
    a = np.abs(h)
    ratio = a / w
    order = np.argsort(-ratio, kind="stable")
    rs = ratio[order]
    neg_rs = -rs
    csum_wa = np.cumsum(w[order] * a[order])
    csum_ww = np.cumsum(w[order] ** 2)

    r = h.shape[0]
    thresh = 0.0
    for _ in range(h.shape[0]):
        thresh = (csum_wa[r - 1] - delta) / csum_ww[r - 1]
        j = int(np.searchsorted(neg_rs[:r], -thresh, side="left"))
        if j == 0:
            return np.empty(0), -1
        if j == r:
            break
        r = j

    out = np.zeros_like(h)
    act = order[:r]
    out[act] = np.sign(h[act]) * (a[act] - thresh * w[act])
    return out, r


# --------------------------------------------------------------------------
# parallel hyperslab projections: combined point and extrapolation bound
# --------------------------------------------------------------------------

@njit
def _slab_combine_nb(h, X, y, xnorm2, eps, omega):
    m, n = X.shape
    disp = np.zeros(n)
    num = 0.0
    for j in range(m):
        r = 0.0
        for i in range(n):
            r += X[j, i] * h[i]
        if y[j] - eps > r:
            beta = (y[j] - eps - r) / xnorm2[j]
        elif y[j] + eps < r:
            beta = (y[j] + eps - r) / xnorm2[j]
        else:
            continue
        num += omega[j] * beta * beta * xnorm2[j]
        c = omega[j] * beta
        for i in range(n):
            disp[i] += c * X[j, i]
    den = 0.0
    for i in range(n):
        den += disp[i] * disp[i]
    # a single slab has omega = 1, so the ratio is exactly 1
    if den <= MN_DENOM_TOL or m == 1:
        return disp, 1.0
    return disp, num / den


def _slab_combine_np(h, X, y, xnorm2, eps, omega):
    r = X @ h
    beta = np.where(
        y - eps > r, (y - eps - r) / xnorm2,
        np.where(y + eps < r, (y + eps - r) / xnorm2, 0.0),
    )
    num = float(np.sum(omega * beta * beta * xnorm2))
    disp = (omega * beta) @ X
    den = float(disp @ disp)
    if den <= MN_DENOM_TOL or len(y) == 1:
        return disp, 1.0
    return disp, num / den


# --------------------------------------------------------------------------
# zero-attracting LMS over a whole record
# --------------------------------------------------------------------------

@njit
def _lms_run_nb(X, y, truth, h0, mu, rho, eta_inv):
    N, n = X.shape
    h = h0.copy()
    err = np.empty(N)
    for k in range(N):
        e = y[k]
        for i in range(n):
            e -= X[k, i] * h[i]
        for i in range(n):
            hi = h[i]
            if hi > 0.0:
                s = 1.0
            elif hi < 0.0:
                s = -1.0
            else:
                s = 0.0
            h[i] = hi + mu * e * X[k, i] - rho * s / (1.0 + eta_inv * abs(hi))
        acc = 0.0
        for i in range(n):
            d = h[i] - truth[k, i]
            acc += d * d
        err[k] = acc
    return h, err


def _lms_run_np(X, y, truth, h0, mu, rho, eta_inv):
    h = h0.copy()
    err = np.empty(X.shape[0])
    for k in range(X.shape[0]):
        e = y[k] - X[k] @ h
        h = h + mu * e * X[k] - rho * np.sign(h) / (1.0 + eta_inv * np.abs(h))
        d = h - truth[k]
        err[k] = d @ d
    return h, err


if USE_NUMBA:
    wl1_outside = _wl1_outside_nb
    slab_combine = _slab_combine_nb
    lms_run = _lms_run_nb
else:
    wl1_outside = _wl1_outside_np
    slab_combine = _slab_combine_np
    lms_run = _lms_run_np

BACKEND = "numba" if USE_NUMBA else "numpy"

"""Synthetic sparse regression streams ``y_n = x_n @ h_*(n) + v_n``.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``. A
trial's generator is derived from ``(seed, trial)`` via the sequence's
spawn key, and inside a stream the truth, regressors and noise draw from
separate children, so changing one never shifts the others.
"""
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "ScenarioSpec",
    "MeasurementStream",
    "trial_seed_sequence",
    "gen_sparse_vector",
    "gen_reconstruction_stream",
    "gen_sysid_stream",
    "gen_timevarying_truth",
    "make_stream",
]

KINDS = ("reconstruction", "sysid", "timevarying")
AMPLITUDES = ("unit", "gaussian")
SENSING = ("gaussian", "bernoulli")

TIMEVARYING_L = 100
TIMEVARYING_CHANGE = 501  # first 1-based time index after the change
# 1-based coefficient positions
_TV_BEFORE = (1, 2, 3, 4, 5)
_TV_AFTER = (1, 3, 5, 7, 9, 11, 13, 15)


@dataclass(frozen=True)
class ScenarioSpec:
    L: int = 100
    S: int = 5
    kind: str = "sysid"
    noise_var: float = 0.1
    amplitude_dist: str = "unit"
    seed: int = 0
    sensing: str = "gaussian"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.amplitude_dist not in AMPLITUDES:
            raise ValueError(f"amplitude_dist must be one of {AMPLITUDES}")
        if self.sensing not in SENSING:
            raise ValueError(f"sensing must be one of {SENSING}")
        if self.kind == "timevarying" and self.L != TIMEVARYING_L:
            raise ValueError(f"the time-varying scenario is defined for L={TIMEVARYING_L}")
        if not 1 <= self.S <= self.L:
            raise ValueError(f"need 1 <= S <= L, got S={self.S}, L={self.L}")
        if not self.noise_var >= 0:
            raise ValueError("noise_var must be >= 0")

    @property
    def noise_std(self):
        return float(np.sqrt(self.noise_var))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        casts = {"L": int, "S": int, "noise_var": float, "seed": int}
        return cls(**{k: casts.get(k, str)(v) for k, v in d.items()})


def trial_seed_sequence(seed, trial=None):
    if trial is None:
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(int(seed), spawn_key=(int(trial),))


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


def gen_sparse_vector(L, S, amplitude_dist="unit", seed=0):
    """Length-``L`` vector with exactly ``S`` nonzeros at uniformly random
    distinct positions, valued 1 or standard normal."""
    if not 1 <= S <= L:
        raise ValueError(f"need 1 <= S <= L, got S={S}, L={L}")
    rng = _as_generator(seed)
    h = np.zeros(L)
    pos = rng.choice(L, size=S, replace=False)
    if amplitude_dist == "unit":
        h[pos] = 1.0
    elif amplitude_dist == "gaussian":
        amp = rng.standard_normal(S)
        # a zero draw would break the l0 count
        while np.any(amp == 0.0):
            amp[amp == 0.0] = rng.standard_normal(int(np.sum(amp == 0.0)))
        h[pos] = amp
    else:
        raise ValueError(f"unknown amplitude distribution {amplitude_dist!r}")
    return h


def gen_timevarying_truth(n):
    """Truth of the abrupt-change scenario at 1-based time ``n``.

    Up to ``n = 500`` coefficients 1..5 are one. From ``n = 501`` on,
    coefficients 2 and 4 are zero and 7, 9, 11, 13, 15 are one as well.
    Storage is 0-based, so coefficient ``k`` lives at index ``k - 1``.
    """
    h = np.zeros(TIMEVARYING_L)
    support = _TV_BEFORE if n < TIMEVARYING_CHANGE else _TV_AFTER
    h[np.asarray(support) - 1] = 1.0
    return h


class MeasurementStream:
    """Single-consumer iterator over ``(x_n, y_n)`` pairs.

    ``ground_truth(k)`` gives the truth for 0-based sample ``k``; ``take(N)``
    returns the next ``N`` samples as arrays and is equivalent to ``N``
    calls of ``next()``.
    """

    def __init__(self, spec, seed_seq):
        self.spec = spec
        truth_ss, x_ss, v_ss = seed_seq.spawn(3)
        self._x_rng = np.random.Generator(np.random.PCG64(x_ss))
        self._v_rng = np.random.Generator(np.random.PCG64(v_ss))
        if spec.kind == "timevarying":
            self._h = None
        else:
            self._h = gen_sparse_vector(
                spec.L, spec.S, spec.amplitude_dist,
                np.random.Generator(np.random.PCG64(truth_ss)),
            )
        self._k = 0
        self._tail = np.zeros(spec.L)  # sysid: x_{k-1}

    @property
    def position(self):
        return self._k

    def ground_truth(self, k):
        if self._h is None:
            return gen_timevarying_truth(k + 1)
        return self._h.copy()

    def truth_matrix(self, start, stop):
        """Stacked truths for samples ``start .. stop-1``."""
        if self._h is None:
            return np.array([gen_timevarying_truth(k + 1) for k in range(start, stop)])
        return np.broadcast_to(self._h, (stop - start, self.spec.L)).copy()

    def _draw_inputs(self, N):
        spec = self.spec
        if spec.kind == "reconstruction":
            if spec.sensing == "bernoulli":
                return self._x_rng.choice((-1.0, 1.0), size=(N, spec.L))
            return self._x_rng.standard_normal((N, spec.L))
        u = self._x_rng.standard_normal(N)
        # row k = [u_k, u_{k-1}, ..., u_{k-L+1}], zero before time 0
        seq = np.concatenate([self._tail[::-1], u])
        L = spec.L
        X = np.lib.stride_tricks.sliding_window_view(seq, L)[1:, ::-1].copy()
        self._tail = X[-1].copy()
        return X

    def take(self, N):
        N = int(N)
        X = self._draw_inputs(N)
        T = self.truth_matrix(self._k, self._k + N)
        v = self._v_rng.standard_normal(N) * self.spec.noise_std
        y = np.einsum("ij,ij->i", X, T) + v
        self._k += N
        return X, y, T, v

    def __iter__(self):
        return self

    def __next__(self):
        X, y, _, _ = self.take(1)
        return X[0], float(y[0])

    next = __next__


def make_stream(spec, trial=None):
    return MeasurementStream(spec, trial_seed_sequence(spec.seed, trial))


def gen_reconstruction_stream(spec, trial=None):
    if spec.kind != "reconstruction":
        spec = ScenarioSpec(**{**spec.to_dict(), "kind": "reconstruction"})
    return make_stream(spec, trial)


def gen_sysid_stream(spec, trial=None):
    if spec.kind == "reconstruction":
        spec = ScenarioSpec(**{**spec.to_dict(), "kind": "sysid"})
    return make_stream(spec, trial)

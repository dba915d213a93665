"""Experiment driver: ensembles, MSE traces, sweeps, grid search, export.

Configurations live in INI files::

    [experiment]
    n_iters = 450
    n_trials = 100
    seed = 0
    eval_iter = 450

    [scenario]
    L = 100
    S = 5
    kind = sysid
    noise_var = 0.1
    amplitude_dist = unit

    [algorithm:APWL1-q25]
    kind = apwl1
    q = 25

    [algorithm:RZA-LMS]
    kind = rzalms
    mu = grid
    rho = grid

Algorithm kinds are ``apwl1``, ``apl1``, ``zalms``, ``rzalms``, ``lasso``
and ``oracle``. Parameters left out (or set to ``auto``) take the
defaults listed in ``ALGO_DEFAULTS``; ``delta = auto`` means ``S`` for
APWL1 and ``||h_*||_1`` for APL1 and LASSO, and ``eps = auto`` means
``eps_factor * sigma``. An LMS ``mu`` or ``rho`` of ``grid`` is chosen by
:func:`grid_search_lms` before the ensemble runs.
"""
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import filter as apf
from .baselines import LmsConfig, lasso_solve, lms_run
from .datagen import ScenarioSpec, make_stream
from .projections import ProjectionError

log = logging.getLogger(__name__)

DB_FLOOR = -150.0
MU_GRID = tuple(np.logspace(-4, -1, 13))
RHO_GRID = tuple(np.logspace(-6, -2, 17))
# trial indices used for LMS tuning are offset so tuning and evaluation
# data never overlap
TUNING_TRIAL_OFFSET = 1_000_000

ALGO_KINDS = ("apwl1", "apl1", "zalms", "rzalms", "lasso", "oracle")
ALGO_DEFAULTS = {
    "apwl1": dict(q=25, eps="auto", eps_factor=1.3, eps_scale=1.0, delta="auto",
                  delta_scale=1.0, kappa=0.5, eps_prime=0.01, schedule="decaying",
                  detector_threshold=5.0, detector_window=50),
    "zalms": dict(mu="grid", rho="grid", mu_scale=1.0, rho_scale=1.0),
    "rzalms": dict(mu="grid", rho="grid", eta_inv=10.0, mu_scale=1.0, rho_scale=1.0),
    "lasso": dict(delta="auto", delta_scale=1.0, every=25, max_iter=2000, tol=1e-9),
    "oracle": dict(),
}
ALGO_DEFAULTS["apl1"] = dict(ALGO_DEFAULTS["apwl1"])

# sweepable parameter -> per-kind scale key
SWEEP_KEYS = {
    "delta": {"apwl1": "delta_scale", "apl1": "delta_scale", "lasso": "delta_scale"},
    "eps": {"apwl1": "eps_scale", "apl1": "eps_scale"},
    "mu": {"apwl1": "kappa", "apl1": "kappa", "zalms": "mu_scale", "rzalms": "mu_scale"},
    "rho": {"zalms": "rho_scale", "rzalms": "rho_scale"},
}


class ConfigError(ValueError):
    pass


def _parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("auto", "grid"):
        return low
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _fmt_value(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class AlgorithmSpec:
    tag: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise ConfigError(f"algorithm {self.tag!r}: unknown kind {self.kind!r}")
        unknown = set(self.params) - set(ALGO_DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"algorithm {self.tag!r}: unknown parameters {sorted(unknown)}")

    def get(self, key):
        return self.params.get(key, ALGO_DEFAULTS[self.kind][key])

    def with_params(self, **kw):
        return replace(self, params={**self.params, **kw})


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSpec
    algorithms: tuple
    n_iters: int = 450
    n_trials: int = 100
    eval_iter: int = 450
    seed: int = 0
    out: str = "results"
    mse_eval_points: tuple = ()

    def __post_init__(self):
        if self.n_trials < 1 or self.n_iters < 1:
            raise ConfigError("n_trials and n_iters must be >= 1")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        tags = [a.tag for a in self.algorithms]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"duplicate algorithm tags: {tags}")
        for t in tags:
            if "," in t:
                raise ConfigError(f"algorithm tag may not contain a comma: {t!r}")

    def algorithm(self, tag):
        for a in self.algorithms:
            if a.tag == tag:
                return a
        raise KeyError(tag)

    def replace_algorithm(self, algo):
        return replace(self, algorithms=tuple(algo if a.tag == algo.tag else a
                                              for a in self.algorithms))

    # -- serialization -----------------------------------------------------

    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["experiment"] = {
            "n_iters": str(self.n_iters), "n_trials": str(self.n_trials),
            "eval_iter": str(self.eval_iter), "seed": str(self.seed), "out": self.out,
        }
        if self.mse_eval_points:
            cp["experiment"]["mse_eval_points"] = ",".join(map(str, self.mse_eval_points))
        cp["scenario"] = {k: _fmt_value(v) for k, v in self.scenario.to_dict().items()
                          if k != "seed"}
        for a in self.algorithms:
            sec = {"kind": a.kind}
            sec.update({k: _fmt_value(v) for k, v in sorted(a.params.items())})
            cp[f"algorithm:{a.tag}"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        if "scenario" not in cp:
            raise ConfigError("config lacks a [scenario] section")
        exp = cp["experiment"] if "experiment" in cp else {}
        try:
            seed = int(exp.get("seed", 0))
        except ValueError as exc:
            raise ConfigError(f"bad seed: {exc}") from exc
        sc = {k: v for k, v in cp["scenario"].items()}
        sc["seed"] = seed
        try:
            scenario = ScenarioSpec.from_dict(sc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [scenario]: {exc}") from exc
        algos = []
        for name in cp.sections():
            if not name.startswith("algorithm:"):
                continue
            sec = dict(cp[name])
            kind = sec.pop("kind", None)
            if kind is None:
                raise ConfigError(f"[{name}] lacks 'kind'")
            algos.append(AlgorithmSpec(name.split(":", 1)[1],
                                       kind.strip(), {k: _parse_value(v) for k, v in sec.items()}))
        try:
            pts = exp.get("mse_eval_points", "")
            n_iters = int(exp.get("n_iters", 450))
            return cls(
                scenario=scenario, algorithms=tuple(algos),
                n_iters=n_iters, n_trials=int(exp.get("n_trials", 100)),
                eval_iter=int(exp.get("eval_iter", min(450, n_iters))), seed=seed,
                out=exp.get("out", "results"),
                mse_eval_points=tuple(int(p) for p in pts.split(",") if p.strip()),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad [experiment] value: {exc}") from exc

    @classmethod
    def load(cls, path):
        return cls.from_ini(Path(path).read_text())

    def config_hash(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


@dataclass
class TrialResult:
    trial: int
    errors: dict          # tag -> (n_iters,) squared errors ||h_n - h_*(n)||^2
    truth_norm2: np.ndarray
    invalid: dict         # tag -> reason
    min_M: dict           # tag -> smallest extrapolation bound seen (filters only)


@dataclass
class MseTrace:
    tag: str
    db: np.ndarray
    n_valid: int
    meta: dict


# -- per-trial machinery ----------------------------------------------------

def _resolve_filter(algo, scenario, h_star):
    kind = algo.kind
    sigma = scenario.noise_std
    eps = algo.get("eps")
    eps = algo.get("eps_factor") * sigma if eps == "auto" else float(eps)
    eps *= float(algo.get("eps_scale"))
    delta = algo.get("delta")
    if delta == "auto":
        delta = float(np.count_nonzero(h_star)) if kind == "apwl1" else float(np.abs(h_star).sum())
    delta = float(delta) * float(algo.get("delta_scale"))
    return apf.FilterConfig(
        L=scenario.L, q=int(algo.get("q")), eps=eps, delta=delta,
        kappa=float(algo.get("kappa")),
        weighting="weighted" if kind == "apwl1" else "unweighted",
        eps_prime_base=float(algo.get("eps_prime")),
        eps_prime_schedule=str(algo.get("schedule")),
        detector=apf.ChangeDetector(float(algo.get("detector_threshold")),
                                    int(algo.get("detector_window"))),
    )


def _resolve_lms(algo):
    mu, rho = algo.get("mu"), algo.get("rho")
    if mu == "grid" or rho == "grid":
        raise ConfigError(f"algorithm {algo.tag!r} still has grid parameters; "
                          "run grid_search_lms or resolve_grid first")
    return LmsConfig(float(mu) * float(algo.get("mu_scale")),
                     float(rho) * float(algo.get("rho_scale")),
                     float(algo.get("eta_inv")) if algo.kind == "rzalms" else 0.0)


def _lasso_errors(algo, scenario, X, y, T):
    h_star = T[0]
    delta = algo.get("delta")
    delta = float(np.abs(h_star).sum()) if delta == "auto" else float(delta)
    delta *= float(algo.get("delta_scale"))
    every = int(algo.get("every"))
    N, L = X.shape
    h = np.zeros(L)
    err = np.empty(N)
    for k in range(N):
        if (k + 1) % every == 0 or k == N - 1:
            h = lasso_solve(X[: k + 1], y[: k + 1], delta, max_iter=int(algo.get("max_iter")),
                            tol=float(algo.get("tol")), h0=h).h
        d = h - T[k]
        err[k] = d @ d
    return err


def _trial_data(config, trial):
    stream = make_stream(config.scenario, trial)
    X, y, T, _ = stream.take(config.n_iters)
    return X, y, T


def _run_algorithm(algo, scenario, X, y, T):
    """Return (errors, min_M) for one algorithm on one trial."""
    if algo.kind in ("apwl1", "apl1"):
        cfg = _resolve_filter(algo, scenario, T[0])
        r = apf.run(cfg, X, y, truth=T)
        return r.errors, float(np.nanmin(r.M))
    if algo.kind in ("zalms", "rzalms"):
        _, err = lms_run(X, y, _resolve_lms(algo), T, reweighted=algo.kind == "rzalms")
        return err, None
    if algo.kind == "lasso":
        return _lasso_errors(algo, scenario, X, y, T), None
    return np.zeros(len(y)), None


def run_trial(config, trial_index):
    """Run every configured algorithm on the stream of one trial.

    All algorithms consume the identical ``(x_n, y_n)`` sequence, drawn
    from ``(config.seed, trial_index)``. A failing algorithm is recorded in
    ``invalid`` instead of aborting the trial.
    """
    X, y, T = _trial_data(config, trial_index)
    errors, invalid, min_M = {}, {}, {}
    for algo in config.algorithms:
        try:
            err, mm = _run_algorithm(algo, config.scenario, X, y, T)
        except ConfigError:
            raise
        except (ValueError, ProjectionError, FloatingPointError) as exc:
            invalid[algo.tag] = f"{type(exc).__name__}: {exc}"
            errors[algo.tag] = np.full(config.n_iters, np.nan)
            continue
        if not np.all(np.isfinite(err)):
            invalid[algo.tag] = "non-finite error sequence"
        errors[algo.tag] = err
        if mm is not None:
            min_M[algo.tag] = mm
    return TrialResult(trial_index, errors, np.sum(T * T, axis=1), invalid, min_M)


def normalized_db(mean_normalized_error):
    """dB of the ensemble-mean normalized squared deviation, floored at
    ``DB_FLOOR``. The one place the MSE convention is fixed."""
    m = np.asarray(mean_normalized_error, dtype=float)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(m)
    return np.maximum(db, DB_FLOOR)


def reduce_trials(config, results):
    """Average normalized errors over valid trials in trial-index order."""
    results = sorted(results, key=lambda r: r.trial)
    traces = []
    for algo in config.algorithms:
        acc = np.zeros(config.n_iters)
        n_valid = 0
        for r in results:
            if algo.tag in r.invalid:
                continue
            acc += r.errors[algo.tag] / r.truth_norm2
            n_valid += 1
        if n_valid == 0:
            reasons = sorted({r.invalid[algo.tag] for r in results})
            raise RuntimeError(f"all trials invalid for {algo.tag!r}: {reasons}")
        traces.append(MseTrace(algo.tag, normalized_db(acc / n_valid), n_valid, {
            "config_hash": config.config_hash(), "seed": config.seed,
            "n_trials": len(results), "n_valid": n_valid,
            "min_M": min((r.min_M[algo.tag] for r in results if algo.tag in r.min_M),
                         default=None),
        }))
    return traces


def _run_trial_star(args):
    return run_trial(*args)


def run_trials(config, trials=None, n_jobs=1):
    trials = range(config.n_trials) if trials is None else trials
    if n_jobs == 1:
        return [run_trial(config, t) for t in trials]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_trial_star, [(config, t) for t in trials]))


def run_ensemble(config, n_jobs=1, resolve=True):
    """Ensemble MSE traces (dB) for every configured algorithm.

    LMS parameters marked ``grid`` are tuned first on trials disjoint from
    the evaluation trials.
    """
    if resolve:
        config = resolve_grid(config)
    return reduce_trials(config, run_trials(config, n_jobs=n_jobs))


# -- baseline tuning --------------------------------------------------------

def grid_search_lms(config, tag, mus=MU_GRID, rhos=RHO_GRID, eval_iter=None,
                    n_trials=None, trial_offset=TUNING_TRIAL_OFFSET):
    """Pick ``(mu, rho)`` minimizing the ensemble MSE at ``eval_iter``.

    Returns ``(best_mu, best_rho, table)`` where ``table`` rows are
    ``(mu, rho, mse_db)``; divergent settings get ``inf``.
    """
    algo = config.algorithm(tag)
    if algo.kind not in ("zalms", "rzalms"):
        raise ConfigError(f"{tag!r} is not an LMS baseline")
    eval_iter = config.eval_iter if eval_iter is None else eval_iter
    n_trials = config.n_trials if n_trials is None else n_trials
    if not 1 <= eval_iter <= config.n_iters:
        raise ConfigError("eval_iter outside the run")
    sub = replace(config, n_iters=eval_iter)
    data = [_trial_data(sub, trial_offset + t) for t in range(n_trials)]
    fixed_mu, fixed_rho = algo.get("mu"), algo.get("rho")
    mus = mus if fixed_mu == "grid" else (float(fixed_mu),)
    rhos = rhos if fixed_rho == "grid" else (float(fixed_rho),)
    eta = float(algo.get("eta_inv")) if algo.kind == "rzalms" else 0.0
    table = []
    best = (math.inf, mus[0], rhos[0])
    for mu in mus:
        for rho in rhos:
            cfg = LmsConfig(float(mu), float(rho), eta)
            acc = 0.0
            for X, y, T in data:
                _, err = lms_run(X, y, cfg, T, reweighted=algo.kind == "rzalms")
                acc += err[-1] / float(T[-1] @ T[-1])
            score = acc / n_trials
            db = float(normalized_db(score)) if np.isfinite(score) else math.inf
            table.append((float(mu), float(rho), db))
            if np.isfinite(score) and score < best[0]:
                best = (score, float(mu), float(rho))
    if not np.isfinite(best[0]):
        raise RuntimeError(f"every grid point diverged for {tag!r}")
    log.info("grid search %s: mu=%g rho=%g", tag, best[1], best[2])
    return best[1], best[2], table


def resolve_grid(config, **kw):
    """Replace ``grid`` LMS parameters by their tuned values."""
    for algo in config.algorithms:
        if algo.kind in ("zalms", "rzalms") and "grid" in (algo.get("mu"), algo.get("rho")):
            mu, rho, _ = grid_search_lms(config, algo.tag, **kw)
            config = config.replace_algorithm(algo.with_params(mu=mu, rho=rho))
    return config


# -- sensitivity ------------------------------------------------------------

def sensitivity_sweep(config, parameter, deviations, eval_iter=None, tags=None, n_jobs=1):
    """Rerun the ensemble with ``parameter`` scaled by ``1 + deviation``.

    ``parameter`` is one of ``delta``, ``eps``, ``mu``, ``rho``; for the
    projection filters ``mu`` scales ``kappa``. Baseline grid parameters
    are tuned once, at zero deviation. Returns one row per deviation and
    affected algorithm; rows whose scaled configuration is invalid carry
    ``valid=False`` and ``mse_db=None``.
    """
    if parameter not in SWEEP_KEYS:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEP_KEYS)}")
    eval_iter = config.eval_iter if eval_iter is None else eval_iter
    if not 1 <= eval_iter <= config.n_iters:
        raise ConfigError("eval_iter outside the run")
    config = resolve_grid(config)
    keys = SWEEP_KEYS[parameter]
    targets = [a for a in config.algorithms if a.kind in keys and (tags is None or a.tag in tags)]
    if not targets:
        raise ConfigError(f"no configured algorithm has parameter {parameter!r}")
    rows = []
    for dev in deviations:
        factor = 1.0 + float(dev)
        cfg = replace(config, algorithms=tuple(
            a.with_params(**{keys[a.kind]: float(a.get(keys[a.kind])) * factor})
            for a in targets))
        try:
            _validate_scaled(cfg)
            traces = {t.tag: t for t in reduce_trials(cfg, run_trials(cfg, n_jobs=n_jobs))}
        except (ValueError, RuntimeError) as exc:
            for a in targets:
                rows.append(dict(deviation=float(dev), tag=a.tag, factor=factor,
                                 mse_db=None, valid=False, reason=str(exc)))
            continue
        for a in targets:
            rows.append(dict(deviation=float(dev), tag=a.tag, factor=factor,
                             mse_db=float(traces[a.tag].db[eval_iter - 1]), valid=True,
                             reason=""))
    return rows


def _validate_scaled(config):
    h_probe = np.ones(config.scenario.L)
    for a in config.algorithms:
        if a.kind in ("apwl1", "apl1"):
            _resolve_filter(a, config.scenario, h_probe)
        elif a.kind in ("zalms", "rzalms"):
            _resolve_lms(a)
        elif a.kind == "lasso" and not float(a.get("delta_scale")) > 0:
            raise ConfigError("lasso delta must stay positive")


# -- export -----------------------------------------------------------------

def git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def export_results(traces, path, config=None, gnuplot=True, stem="mse"):
    """Write ``<stem>.csv`` (dB per iteration), ``<stem>.json`` metadata and
    optionally ``<stem>.gp``. Returns the list of written paths."""
    if not traces:
        raise ValueError("nothing to export")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    n = len(traces[0].db)
    if any(len(t.db) != n for t in traces):
        raise ValueError("traces differ in length")
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["iteration"] + [t.tag for t in traces])
        for i in range(n):
            wr.writerow([i + 1] + [repr(float(t.db[i])) for t in traces])
    meta = {
        "traces": [{"tag": t.tag, **t.meta} for t in traces],
        "git": git_describe(),
    }
    if config is not None:
        meta["config"] = config.to_ini()
        meta["seed"] = config.seed
        meta["config_hash"] = config.config_hash()
        meta["algorithms"] = {a.tag: {"kind": a.kind, **a.params} for a in config.algorithms}
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    written = [csv_path, json_path]
    if gnuplot:
        gp = out / f"{stem}.gp"
        plots = ", ".join(
            f"'{csv_path.name}' using 1:{k + 2} with lines title '{t.tag}'"
            for k, t in enumerate(traces))
        gp.write_text(
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set xlabel 'iteration'\nset ylabel 'MSE (dB)'\n"
            f"set terminal pngcairo size 900,600\nset output '{stem}.png'\n"
            f"plot {plots}\n")
        written.append(gp)
    return written


def read_csv_matrix(path):
    """Inverse of the CSV part of :func:`export_results`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return header, data


def write_sweep_table(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["deviation", "factor", "tag", "mse_db", "valid"])
        for r in rows:
            wr.writerow([repr(r["deviation"]), repr(r["factor"]), r["tag"],
                         "" if r["mse_db"] is None else repr(r["mse_db"]), int(r["valid"])])
    return path

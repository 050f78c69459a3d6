"""Seeded Monte-Carlo benchmark harness.

Generates a random dictionary and spike signals, runs the requested solvers
across a cartesian sweep of sparsity levels and noise powers, and aggregates
squared errors against the theoretical bounds and the oracle estimator.

Reproducibility contract: every trial derives its own generator from a
cryptographic digest of (root seed, k, sigma, trial index), so any single
trial can be re-run in isolation and results are byte-identical regardless
of how trials are scheduled across workers.
"""

import hashlib
import json
import math
import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from . import guarantees
from .errors import ConfigError, SparseLabError
from .linalg import SparseSignal, SupportSet, least_squares_on_support, normalize_columns, top_k_support
from .metrics import rip_monte_carlo
from .pursuit import (
    Algorithm,
    FixedIterations,
    PracticalLogRule,
    PursuitConfig,
    cosamp,
    iht,
    oracle_estimator,
    subspace_pursuit,
)

CSV_COLUMNS = (
    "k",
    "sigma",
    "algorithm",
    "trials",
    "mse",
    "median_se",
    "p99_se",
    "oracle_mse",
    "prob_bound",
    "bound_violation_rate",
    "condition_met",
)

_SOLVERS = {Algorithm.SP: subspace_pursuit, Algorithm.COSAMP: cosamp, Algorithm.IHT: iht}

_THRESHOLDS = {
    Algorithm.SP: guarantees.SP_CONDITION,
    Algorithm.COSAMP: guarantees.COSAMP_CONDITION,
    Algorithm.IHT: guarantees.IHT_CONDITION,
}


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    n_atoms: int
    k_values: tuple
    sigma_values: tuple
    trials_per_point: int
    seed: int
    algorithms: tuple
    a: float = 1.0
    halting: str = "practical"
    max_iterations_cap: int = 100
    signal_model: str = "spikes"
    workers: int = 1
    delta_mode: str = "threshold"
    delta_mc_trials: int = 2000

    def validate(self):
        if self.m < 1 or self.n_atoms < self.m:
            raise ConfigError(f"need 1 <= m <= n_atoms, got m={self.m}, n_atoms={self.n_atoms}")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("k_values must be a nonempty list of positive integers")
        if not self.sigma_values or any(s < 0 for s in self.sigma_values):
            raise ConfigError("sigma_values must be a nonempty list of nonnegative reals")
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be >= 1")
        if not self.algorithms:
            raise ConfigError("algorithms list is empty")
        if self.a <= 0:
            raise ConfigError("probability exponent a must be positive")
        kmax = max(self.k_values)
        if Algorithm.COSAMP in self.algorithms and 4 * kmax > self.m:
            raise ConfigError(f"cosamp needs 4*max(k) <= m, got k={kmax}, m={self.m}")
        if any(alg in self.algorithms for alg in (Algorithm.SP, Algorithm.IHT)) and 3 * kmax > self.m:
            raise ConfigError(f"sp/iht need 3*max(k) <= m, got k={kmax}, m={self.m}")
        if kmax > self.m:
            raise ConfigError(f"max(k) = {kmax} exceeds m = {self.m}")
        _parse_halting(self.halting)
        _parse_signal_model(self.signal_model)
        if self.halting == "practical" and any(s == 0 for s in self.sigma_values):
            raise ConfigError("the practical halting rule needs sigma > 0; use halting = fixed:<n>")
        if self.max_iterations_cap < 1:
            raise ConfigError("max_iterations_cap must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.delta_mode not in ("threshold", "monte_carlo"):
            raise ConfigError(f"unknown delta_mode {self.delta_mode!r}")
        if self.delta_mc_trials < 1:
            raise ConfigError("delta_mc_trials must be >= 1")
        return self


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    k: int
    sigma: float
    algorithm: str
    squared_error: float
    oracle_squared_error: float
    support_recovered: bool
    iterations_run: int
    error: str | None = None


@dataclass(frozen=True)
class AggregateRow:
    k: int
    sigma: float
    algorithm: str
    trials: int
    mse: float
    median_se: float
    p99_se: float
    oracle_mse: float
    prob_bound: float
    bound_violation_rate: float
    condition_met: bool


def _parse_halting(spec):
    if spec == "practical":
        return spec
    if spec.startswith("fixed:"):
        try:
            count = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad halting spec {spec!r}; expected fixed:<count>") from None
        if count < 1:
            raise ConfigError("fixed halting count must be >= 1")
        return spec
    raise ConfigError(f"unknown halting {spec!r}; expected 'practical' or 'fixed:<count>'")


def _parse_signal_model(spec):
    if spec == "spikes":
        return spec
    if spec.startswith("compressible:"):
        try:
            p = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad signal model {spec!r}; expected compressible:<exponent>") from None
        if p <= 0:
            raise ConfigError("compressible decay exponent must be positive")
        return spec
    raise ConfigError(f"unknown signal model {spec!r}")


_CONFIG_KEYS = {
    "m": int,
    "n_atoms": int,
    "k_values": lambda s: tuple(int(tok) for tok in s.split(",")),
    "sigma_values": lambda s: tuple(float(tok) for tok in s.split(",")),
    "trials_per_point": int,
    "seed": int,
    "algorithms": lambda s: tuple(Algorithm(tok.strip().lower()) for tok in s.split(",")),
    "a": float,
    "halting": str,
    "max_iterations_cap": int,
    "signal_model": str,
    "workers": int,
    "delta_mode": str,
    "delta_mc_trials": int,
}

_REQUIRED_KEYS = ("m", "n_atoms", "k_values", "sigma_values", "trials_per_point", "seed", "algorithms")


def parse_config(path):
    """Read a flat key = value config file into an ExperimentConfig."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (tok.strip() for tok in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                raw[key] = _CONFIG_KEYS[key](value)
            except (ValueError, KeyError):
                raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key!r}") from None
    missing = [key for key in _REQUIRED_KEYS if key not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(missing)}")
    return ExperimentConfig(**raw).validate()


def _digest_seed(*parts):
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def trial_seed(root_seed, k, sigma, trial_index):
    """Stable per-trial seed; repr of sigma keeps float identity exact."""
    return _digest_seed(root_seed, "trial", k, repr(float(sigma)), trial_index)


def dictionary_seed(root_seed):
    return _digest_seed(root_seed, "dictionary")


def generate_dictionary(m, n_atoms, seed):
    """Random dictionary with i.i.d. standard normal entries, columns normalized."""
    rng = np.random.default_rng(seed)
    return normalize_columns(rng.standard_normal((m, n_atoms)))


def _spikes_from_rng(rng, n_atoms, k):
    support = np.sort(rng.choice(n_atoms, size=k, replace=False))
    eps = rng.integers(0, 2, size=k) * 2 - 1
    magnitudes = 1.0 + np.abs(rng.standard_normal(k))
    values = np.zeros(n_atoms)
    values[support] = 10.0 * eps * magnitudes
    return values, SupportSet(tuple(int(i) for i in support))


def _compressible_from_rng(rng, n_atoms, k, p):
    magnitudes = (np.arange(n_atoms) + 1.0) ** (-p)
    signs = rng.integers(0, 2, size=n_atoms) * 2 - 1
    values = np.empty(n_atoms)
    values[rng.permutation(n_atoms)] = signs * magnitudes
    return values, top_k_support(values, k)


def generate_signal(n_atoms, k, seed):
    """Spike signal: uniform size-k support, entries 10 eps (1 + |n|).

    eps is a fair sign and n a standard normal draw, so every nonzero entry
    has magnitude at least 10.
    """
    values, support = _spikes_from_rng(np.random.default_rng(seed), n_atoms, k)
    return SparseSignal(values, support, k)


def _halting_for(spec, sigma):
    if spec == "practical":
        return PracticalLogRule(sigma=sigma)
    return FixedIterations(int(spec.split(":", 1)[1]))


def run_trial(D, k, sigma, algorithms, seed, halting="practical", max_iterations_cap=100, signal_model="spikes"):
    """One signal and noise draw; every requested algorithm sees the same y.

    Returns one TrialRecord per algorithm (in the order given). A solver
    failure is recorded as the error category on that record rather than
    aborting the sweep.
    """
    rng = np.random.default_rng(seed)
    if signal_model == "spikes":
        x_values, true_support = _spikes_from_rng(rng, D.n_atoms, k)
    else:
        p = float(signal_model.split(":", 1)[1])
        x_values, true_support = _compressible_from_rng(rng, D.n_atoms, k, p)
    e = sigma * rng.standard_normal(D.m)
    y = D.entries @ x_values + e

    oracle_result = oracle_estimator(D, y, true_support)
    oracle_sq = float(np.sum((x_values - oracle_result.estimate.values) ** 2))

    records = []
    cfg = PursuitConfig(
        k=k,
        halting=_halting_for(halting, sigma),
        max_iterations_cap=max_iterations_cap,
        trace_enabled=False,
    )
    for algorithm in algorithms:
        if algorithm is Algorithm.ORACLE:
            records.append(
                TrialRecord(
                    trial_index=seed,
                    k=k,
                    sigma=sigma,
                    algorithm=algorithm.value,
                    squared_error=oracle_sq,
                    oracle_squared_error=oracle_sq,
                    support_recovered=True,
                    iterations_run=0,
                )
            )
            continue
        try:
            result = _SOLVERS[algorithm](D, y, cfg)
            sq = float(np.sum((x_values - result.estimate.values) ** 2))
            records.append(
                TrialRecord(
                    trial_index=seed,
                    k=k,
                    sigma=sigma,
                    algorithm=algorithm.value,
                    squared_error=sq,
                    oracle_squared_error=oracle_sq,
                    support_recovered=result.estimate.support == true_support,
                    iterations_run=result.iterations_run,
                )
            )
        except SparseLabError as exc:
            records.append(
                TrialRecord(
                    trial_index=seed,
                    k=k,
                    sigma=sigma,
                    algorithm=algorithm.value,
                    squared_error=math.nan,
                    oracle_squared_error=oracle_sq,
                    support_recovered=False,
                    iterations_run=0,
                    error=exc.category,
                )
            )
    return records


_WORKER_CTX = {}


def _worker_init(entries, cfg):
    _WORKER_CTX["D"] = normalize_columns(entries)
    _WORKER_CTX["cfg"] = cfg


def _worker_run(task):
    point_index, trial_index, k, sigma = task
    cfg = _WORKER_CTX["cfg"]
    records = run_trial(
        _WORKER_CTX["D"],
        k,
        sigma,
        cfg.algorithms,
        trial_seed(cfg.seed, k, sigma, trial_index),
        halting=cfg.halting,
        max_iterations_cap=cfg.max_iterations_cap,
        signal_model=cfg.signal_model,
    )
    records = [replace(r, trial_index=trial_index) for r in records]
    return point_index, trial_index, records


def _delta_for(cfg, D, algorithm, k):
    """delta plugged into the bound columns for one (algorithm, k) pair."""
    if cfg.delta_mode == "threshold":
        return _THRESHOLDS.get(algorithm, 0.0)
    order = {Algorithm.SP: 3 * k, Algorithm.COSAMP: 4 * k, Algorithm.IHT: 3 * k}.get(algorithm, k)
    order = min(order, D.n_atoms)
    est = rip_monte_carlo(
        D, order, trials=cfg.delta_mc_trials, seed=_digest_seed(cfg.seed, "rip", algorithm.value, order)
    )
    return est.delta


def _aggregate_point(cfg, D, k, sigma, algorithm, records):
    clean = [r for r in records if r.error is None]
    errs = np.asarray([r.squared_error for r in clean])
    oracle = np.asarray([r.oracle_squared_error for r in records])
    delta = _delta_for(cfg, D, algorithm, k)
    if algorithm is Algorithm.ORACLE:
        prob_bound = guarantees.oracle_mse_bound(k, delta, sigma) if delta < 1 else math.inf
        condition_met = delta < 1
    else:
        params = guarantees.GuaranteeParams(
            a=cfg.a, n_atoms=cfg.n_atoms, k=k, sigma=sigma, delta=min(delta, math.nextafter(1, 0))
        )
        report = guarantees.bound_report(algorithm.value, params, second_delta=None)
        prob_bound = report.probabilistic_bound
        condition_met = guarantees.condition_check(algorithm.value, delta)
    if errs.size:
        mse = float(np.mean(errs))
        median_se = float(np.median(errs))
        p99_se = float(np.percentile(errs, 99))
        violation_rate = float(np.mean(errs > prob_bound))
    else:
        mse = median_se = p99_se = violation_rate = math.nan
    return AggregateRow(
        k=k,
        sigma=sigma,
        algorithm=algorithm.value,
        trials=len(clean),
        mse=mse,
        median_se=median_se,
        p99_se=p99_se,
        oracle_mse=float(np.mean(oracle)),
        prob_bound=prob_bound,
        bound_violation_rate=violation_rate,
        condition_met=condition_met,
    )


def run_experiment(cfg, workers=None):
    """Full sweep over k_values x sigma_values.

    Returns (aggregate rows, trial records), both in a deterministic order
    that does not depend on worker scheduling.
    """
    cfg.validate()
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    D = generate_dictionary(cfg.m, cfg.n_atoms, dictionary_seed(cfg.seed))
    points = [(k, sigma) for k in cfg.k_values for sigma in cfg.sigma_values]
    tasks = [
        (pi, t, k, sigma)
        for pi, (k, sigma) in enumerate(points)
        for t in range(cfg.trials_per_point)
    ]
    results = {}
    if cfg.workers <= 1:
        _worker_init(D.entries, cfg)
        for task in tasks:
            pi, t, records = _worker_run(task)
            results[(pi, t)] = records
    else:
        with multiprocessing.Pool(
            processes=cfg.workers, initializer=_worker_init, initargs=(D.entries, cfg)
        ) as pool:
            for pi, t, records in pool.imap_unordered(_worker_run, tasks, chunksize=8):
                results[(pi, t)] = records

    all_records = []
    rows = []
    for pi, (k, sigma) in enumerate(points):
        point_records = []
        for t in range(cfg.trials_per_point):
            point_records.extend(results[(pi, t)])
        all_records.extend(point_records)
        for algorithm in cfg.algorithms:
            alg_records = [r for r in point_records if r.algorithm == algorithm.value]
            rows.append(_aggregate_point(cfg, D, k, sigma, algorithm, alg_records))
    return rows, all_records


def _format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(rows, format, path):
    """Write aggregate rows as CSV or JSONL with a stable column order."""
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", newline="") as fh:
        if format == "csv":
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(getattr(row, col)) for col in CSV_COLUMNS) + "\n")
        else:
            for row in rows:
                fh.write(json.dumps({col: getattr(row, col) for col in CSV_COLUMNS}) + "\n")


def read_results_csv(path):
    """Round-trip reader for emit_results(..., "csv", ...)."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ",".join(CSV_COLUMNS):
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            cells = line.strip().split(",")
            rows.append(
                AggregateRow(
                    k=int(cells[0]),
                    sigma=float(cells[1]),
                    algorithm=cells[2],
                    trials=int(cells[3]),
                    mse=float(cells[4]),
                    median_se=float(cells[5]),
                    p99_se=float(cells[6]),
                    oracle_mse=float(cells[7]),
                    prob_bound=float(cells[8]),
                    bound_violation_rate=float(cells[9]),
                    condition_met=cells[10] == "true",
                )
            )
    return rows


def emit_trials(records, path):
    """Write per-trial records as JSON lines."""
    fields = (
        "trial_index",
        "k",
        "sigma",
        "algorithm",
        "squared_error",
        "oracle_squared_error",
        "support_recovered",
        "iterations_run",
        "error",
    )
    with open(path, "w", newline="") as fh:
        for r in records:
            fh.write(json.dumps({f: getattr(r, f) for f in fields}) + "\n")

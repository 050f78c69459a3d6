"""Greedy-like sparse recovery with full iteration traces.

Three solvers share the same skeleton: correlate the residual with the
dictionary, grow a candidate support, estimate coefficients, prune back to k
atoms. They differ in how many atoms they add, whether a merged support is
re-solved, and what the final answer is:

  subspace_pursuit  adds k atoms, re-solves least squares on the pruned
                    support each iteration and for the final answer;
  cosamp            adds 2k atoms, keeps the pruned coefficients as they are
                    (no re-solve), final answer is the last pruned vector;
  iht               takes a unit gradient step and hard-thresholds.

The asymmetry between the SP and CoSaMP final steps is deliberate.
recurrence_diagnostics replays a trace against the per-iteration error
inequalities that drive each solver's accuracy guarantee.
"""

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import guarantees, metrics
from .errors import Divergence, IterationBudgetExceeded
from .linalg import (
    Dictionary,
    SparseSignal,
    SupportSet,
    least_squares_on_support,
    top_k_support,
)

DIVERGENCE_FACTOR = 1e6


class Algorithm(enum.Enum):
    SP = "sp"
    COSAMP = "cosamp"
    IHT = "iht"
    ORACLE = "oracle"


@dataclass(frozen=True)
class FixedIterations:
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("iteration count must be >= 1")


@dataclass(frozen=True)
class PracticalLogRule:
    """Halt after ceil(log2(x_norm / (sqrt(k) sigma))) iterations.

    x_norm defaults to ||y||_2 at solve time, the estimate available to a
    solver that does not know the true signal; pass the true norm for
    bound-faithful runs.
    """

    sigma: float
    x_norm: float | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("the log halting rule needs sigma > 0")
        if self.x_norm is not None and self.x_norm <= 0:
            raise ValueError("x_norm must be positive when given")


@dataclass(frozen=True)
class PursuitConfig:
    k: int
    halting: FixedIterations | PracticalLogRule
    max_iterations_cap: int = 100
    trace_enabled: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations_cap < 1:
            raise ValueError("iteration cap must be >= 1")
        if isinstance(self.halting, FixedIterations) and self.halting.count > self.max_iterations_cap:
            raise IterationBudgetExceeded(
                f"fixed iteration count {self.halting.count} exceeds cap {self.max_iterations_cap}"
            )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    support_before: SupportSet
    delta_support: SupportSet | None
    merged_support: SupportSet | None
    pruned_support: SupportSet
    coefficients: np.ndarray
    estimate_values: np.ndarray
    residual_norm: float
    estimate_error: float | None


@dataclass(frozen=True)
class PursuitResult:
    estimate: SparseSignal
    iterations_run: int
    trace: tuple | None
    algorithm: Algorithm


def practical_iteration_count(x_norm_estimate, k, sigma, cap=100):
    """ceil(log2(x_norm / (sqrt(k) sigma))), clamped to [1, cap]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if x_norm_estimate <= 0:
        return 1
    raw = math.ceil(math.log2(x_norm_estimate / (math.sqrt(k) * sigma)))
    return int(min(max(raw, 1), cap))


def _iterations_for(cfg, y):
    h = cfg.halting
    if isinstance(h, FixedIterations):
        return h.count
    x_norm = h.x_norm if h.x_norm is not None else float(np.linalg.norm(y))
    if x_norm <= 0:
        return 1
    return practical_iteration_count(x_norm, cfg.k, h.sigma, cfg.max_iterations_cap)


def _check_dims(D, k, factor):
    if factor * k > D.m:
        raise ValueError(f"need {factor}*k <= m, got k = {k}, m = {D.m}")


def _prune(merged, coef, k):
    """Atom indices of the k largest-magnitude coefficients on `merged`."""
    keep = top_k_support(coef, k).as_array()
    arr = merged.as_array()[keep]
    return SupportSet(tuple(int(i) for i in np.sort(arr))), np.sort(keep)


def _dense(n, support, values):
    x = np.zeros(n)
    x[support.as_array()] = values
    return x


def _error_vs(x_true, n, support, values):
    if x_true is None:
        return None
    return float(np.linalg.norm(x_true.values - _dense(n, support, values)))


def subspace_pursuit(D, y, cfg, x_true=None):
    """Recover a k-sparse representation of y by subspace pursuit.

    Per iteration: pick the k atoms most correlated with the residual, merge
    with the current support, solve least squares on the merged support,
    prune to the k largest coefficients, and recompute the residual by
    projecting onto the pruned support. The final answer re-solves least
    squares on the last support.

    Parameters
    ----------
    D : Dictionary
    y : array_like, shape (m,)
    cfg : PursuitConfig
    x_true : SparseSignal, optional
        Ground truth; when given, traces carry the per-iteration error.

    Returns
    -------
    PursuitResult
    """
    _check_dims(D, cfg.k, 3)
    y = np.asarray(y, dtype=np.float64)
    n_iters = _iterations_for(cfg, y)
    n = D.n_atoms
    support = SupportSet(())
    y_r = y
    coef = np.zeros(0)
    trace = [] if cfg.trace_enabled else None
    for ell in range(1, n_iters + 1):
        corr = D.entries.T @ y_r
        delta_support = top_k_support(corr, cfg.k)
        merged = support.union(delta_support)
        coef_merged = least_squares_on_support(D, merged, y)
        pruned, _ = _prune(merged, coef_merged, cfg.k)
        coef = least_squares_on_support(D, pruned, y)
        y_r = y - D.columns(pruned) @ coef
        if trace is not None:
            trace.append(
                IterationRecord(
                    iteration=ell,
                    support_before=support,
                    delta_support=delta_support,
                    merged_support=merged,
                    pruned_support=pruned,
                    coefficients=coef_merged,
                    estimate_values=coef,
                    residual_norm=float(np.linalg.norm(y_r)),
                    estimate_error=_error_vs(x_true, n, pruned, coef),
                )
            )
        support = pruned
    # the residual step already solved least squares on the final support
    estimate = SparseSignal(_dense(n, support, coef), support, cfg.k)
    return PursuitResult(
        estimate=estimate,
        iterations_run=n_iters,
        trace=tuple(trace) if trace is not None else None,
        algorithm=Algorithm.SP,
    )


def cosamp(D, y, cfg, x_true=None):
    """Recover a k-sparse representation of y by compressive sampling MP.

    Per iteration: pick the 2k atoms most correlated with the residual,
    merge, solve least squares on the merged support, prune to the k largest
    coefficients, and keep those coefficient values as the estimate (no
    re-solve). The residual is y minus the estimate's contribution.
    """
    _check_dims(D, cfg.k, 4)
    y = np.asarray(y, dtype=np.float64)
    n_iters = _iterations_for(cfg, y)
    n = D.n_atoms
    support = SupportSet(())
    y_r = y
    est_values = np.zeros(0)
    trace = [] if cfg.trace_enabled else None
    for ell in range(1, n_iters + 1):
        corr = D.entries.T @ y_r
        delta_support = top_k_support(corr, 2 * cfg.k)
        merged = support.union(delta_support)
        coef_merged = least_squares_on_support(D, merged, y)
        pruned, kept_positions = _prune(merged, coef_merged, cfg.k)
        est_values = coef_merged[kept_positions]
        y_r = y - D.columns(pruned) @ est_values
        if trace is not None:
            trace.append(
                IterationRecord(
                    iteration=ell,
                    support_before=support,
                    delta_support=delta_support,
                    merged_support=merged,
                    pruned_support=pruned,
                    coefficients=coef_merged,
                    estimate_values=est_values,
                    residual_norm=float(np.linalg.norm(y_r)),
                    estimate_error=_error_vs(x_true, n, pruned, est_values),
                )
            )
        support = pruned
    estimate = SparseSignal(_dense(n, support, est_values), support, cfg.k)
    return PursuitResult(
        estimate=estimate,
        iterations_run=n_iters,
        trace=tuple(trace) if trace is not None else None,
        algorithm=Algorithm.COSAMP,
    )


def iht(D, y, cfg, x_true=None):
    """Recover a k-sparse representation of y by iterative hard thresholding.

    Per iteration: unit-step gradient update x + D*(y - D x), then keep the
    k largest magnitudes. Raises Divergence when the iterate norm exceeds
    1e6 ||y||_2, which signals that the operator-norm precondition of the
    unit step is violated.
    """
    _check_dims(D, cfg.k, 3)
    y = np.asarray(y, dtype=np.float64)
    n_iters = _iterations_for(cfg, y)
    n = D.n_atoms
    y_norm = float(np.linalg.norm(y))
    support = SupportSet(())
    values = np.zeros(0)
    y_r = y
    trace = [] if cfg.trace_enabled else None
    for ell in range(1, n_iters + 1):
        x_p = _dense(n, support, values)
        x_p += D.entries.T @ y_r
        pruned = top_k_support(x_p, cfg.k)
        values = x_p[pruned.as_array()]
        if float(np.linalg.norm(values)) > DIVERGENCE_FACTOR * y_norm:
            raise Divergence(
                f"iterate norm exceeded {DIVERGENCE_FACTOR:g} * ||y|| at iteration {ell}"
            )
        y_r = y - D.columns(pruned) @ values
        if trace is not None:
            trace.append(
                IterationRecord(
                    iteration=ell,
                    support_before=support,
                    delta_support=None,
                    merged_support=None,
                    pruned_support=pruned,
                    coefficients=values,
                    estimate_values=values,
                    residual_norm=float(np.linalg.norm(y_r)),
                    estimate_error=_error_vs(x_true, n, pruned, values),
                )
            )
        support = pruned
    estimate = SparseSignal(_dense(n, support, values), support, cfg.k)
    return PursuitResult(
        estimate=estimate,
        iterations_run=n_iters,
        trace=tuple(trace) if trace is not None else None,
        algorithm=Algorithm.IHT,
    )


def oracle_estimator(D, y, T):
    """Least squares on the true support; the benchmark every bound targets."""
    coef = least_squares_on_support(D, T, y)
    estimate = SparseSignal(_dense(D.n_atoms, T, coef), T, max(T.cardinality, 1))
    return PursuitResult(estimate=estimate, iterations_run=0, trace=None, algorithm=Algorithm.ORACLE)


@dataclass(frozen=True)
class DiagnosticCheck:
    iteration: int
    name: str
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    algorithm: Algorithm
    k: int
    delta: float
    noise_correlation: float
    noise_mode: metrics.CorrelationMode
    condition_met: bool
    checks: tuple

    @property
    def all_hold(self):
        return all(c.holds for c in self.checks)


def _holds(lhs, rhs):
    # the inequalities are exact in real arithmetic; allow float rounding only
    return bool(lhs <= rhs + 1e-12 * max(1.0, abs(rhs)))


def _restricted_norm(x_true, support):
    idx = support.as_array()
    if idx.size == 0:
        return 0.0
    return float(np.linalg.norm(x_true.values[idx]))


def _sp_checks(records, x_true, delta, nc):
    d = float(delta)
    sq = (1 - d) ** 2
    cb = (1 - d) ** 3
    a_merge = 2 * d / sq if sq else math.inf
    b_merge = 2 / sq if sq else math.inf
    a_prune = (1 + d) / (1 - d) if d != 1 else math.inf
    b_prune = 4 / (1 - d) if d != 1 else math.inf
    rho = 2 * d * (1 + d) / cb if cb else math.inf
    tau = (6 - 6 * d + 4 * d * d) / cb if cb else math.inf
    T = x_true.support
    checks = []
    for r in records:
        miss_prev = _restricted_norm(x_true, T.difference(r.support_before))
        miss_merged = _restricted_norm(x_true, T.difference(r.merged_support))
        miss_pruned = _restricted_norm(x_true, T.difference(r.pruned_support))
        pairs = (
            ("merged_support_miss", miss_merged, a_merge * miss_prev + b_merge * nc),
            ("pruned_support_miss", miss_pruned, a_prune * miss_merged + b_prune * nc),
            ("composed_recurrence", miss_pruned, rho * miss_prev + tau * nc),
        )
        for name, lhs, rhs in pairs:
            checks.append(DiagnosticCheck(r.iteration, name, lhs, rhs, _holds(lhs, rhs)))
    return checks


def _estimate_recurrence_checks(records, x_true, rho, tau, nc, n):
    checks = []
    prev = np.zeros(n)
    for r in records:
        cur = _dense(n, r.pruned_support, r.estimate_values)
        lhs = float(np.linalg.norm(x_true.values - cur))
        rhs = rho * float(np.linalg.norm(x_true.values - prev)) + tau * nc
        checks.append(
            DiagnosticCheck(r.iteration, "estimate_recurrence", lhs, rhs, _holds(lhs, rhs))
        )
        prev = cur
    return checks


def recurrence_diagnostics(
    trace,
    x_true,
    e,
    D,
    algorithm,
    delta=None,
    noise_correlation=None,
    noise_mode=metrics.CorrelationMode.EXACT,
    budget=metrics.ENUMERATION_BUDGET,
):
    """Check the per-iteration error inequalities against a recorded trace.

    For SP verifies, at every iteration, the merged-support miss bound, the
    pruned-support miss bound, and their composition; for CoSaMP and IHT the
    estimate-error recurrence. `delta` is the order-3k (SP, IHT) or order-4k
    (CoSaMP) constant; when omitted it is computed exactly by enumeration
    (subject to `budget`), and the worst-case noise correlation is computed
    in the requested mode. The inequalities are only guarantees when the
    family's condition holds (see condition_met); checks are evaluated and
    reported regardless.

    Returns
    -------
    DiagnosticsReport
    """
    algorithm = Algorithm(algorithm) if not isinstance(algorithm, Algorithm) else algorithm
    if algorithm is Algorithm.ORACLE:
        raise ValueError("the oracle estimator has no iteration recurrence")
    if not trace:
        raise ValueError("empty trace; record with trace_enabled=True")
    k = x_true.k
    order = 4 * k if algorithm is Algorithm.COSAMP else 3 * k
    if delta is None:
        delta = metrics.rip_exact(D, order, budget=budget).delta
    if noise_correlation is None:
        noise_correlation = metrics.worst_case_noise_correlation(D, e, k, mode=noise_mode).value
    nc = float(noise_correlation)
    d = float(delta)
    if algorithm is Algorithm.SP:
        checks = _sp_checks(trace, x_true, d, nc)
    elif algorithm is Algorithm.COSAMP:
        sq = (1 - d) ** 2
        rho = 4 * d / sq if sq else math.inf
        tau = (14 - 6 * d) / sq if sq else math.inf
        checks = _estimate_recurrence_checks(trace, x_true, rho, tau, nc, D.n_atoms)
    else:
        rho, tau, _ = guarantees.iht_constants(d)
        checks = _estimate_recurrence_checks(trace, x_true, rho, tau, nc, D.n_atoms)
    return DiagnosticsReport(
        algorithm=algorithm,
        k=k,
        delta=d,
        noise_correlation=nc,
        noise_mode=noise_mode,
        condition_met=guarantees.condition_check(algorithm.value, d),
        checks=tuple(checks),
    )


def _support_json(s):
    return None if s is None else [int(i) for i in s.indices]


def write_trace(path, result, D, x_true=None, noise=None, sigma=None):
    """Serialize a traced pursuit run as JSON lines.

    The first line is a header with the full problem instance (dictionary,
    ground truth, noise) so diagnostics can replay the file standalone; each
    following line is one iteration.
    """
    if result.trace is None:
        raise ValueError("result has no trace; solve with trace_enabled=True")
    header = {
        "record": "header",
        "algorithm": result.algorithm.value,
        "k": result.estimate.k,
        "m": D.m,
        "n_atoms": D.n_atoms,
        "iterations_run": result.iterations_run,
        "dictionary": [[float(v) for v in row] for row in D.entries],
        "x_true": None
        if x_true is None
        else {
            "values": [float(v) for v in x_true.values],
            "support": _support_json(x_true.support),
            "k": x_true.k,
        },
        "noise": None if noise is None else [float(v) for v in np.asarray(noise)],
        "sigma": None if sigma is None else float(sigma),
    }
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(header) + "\n")
        for r in result.trace:
            fh.write(
                json.dumps(
                    {
                        "record": "iteration",
                        "iteration": r.iteration,
                        "support_before": _support_json(r.support_before),
                        "delta_support": _support_json(r.delta_support),
                        "merged_support": _support_json(r.merged_support),
                        "pruned_support": _support_json(r.pruned_support),
                        "coefficients": [float(v) for v in r.coefficients],
                        "estimate_values": [float(v) for v in r.estimate_values],
                        "residual_norm": r.residual_norm,
                        "estimate_error": r.estimate_error,
                    }
                )
                + "\n"
            )


@dataclass(frozen=True)
class TraceBundle:
    algorithm: Algorithm
    k: int
    dictionary: Dictionary
    records: tuple
    x_true: SparseSignal | None
    noise: np.ndarray | None
    sigma: float | None
    iterations_run: int


def _support_from_json(lst):
    return None if lst is None else SupportSet(tuple(int(i) for i in lst))


def read_trace(path):
    """Load a trace file written by write_trace."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("record") != "header":
        raise ValueError(f"{path}: missing trace header line")
    h = lines[0]
    D = Dictionary(np.asarray(h["dictionary"], dtype=np.float64))
    x_true = None
    if h["x_true"] is not None:
        x_true = SparseSignal(
            np.asarray(h["x_true"]["values"], dtype=np.float64),
            _support_from_json(h["x_true"]["support"]),
            int(h["x_true"]["k"]),
        )
    records = []
    for obj in lines[1:]:
        if obj.get("record") != "iteration":
            raise ValueError(f"{path}: unexpected record {obj.get('record')!r}")
        records.append(
            IterationRecord(
                iteration=int(obj["iteration"]),
                support_before=_support_from_json(obj["support_before"]),
                delta_support=_support_from_json(obj["delta_support"]),
                merged_support=_support_from_json(obj["merged_support"]),
                pruned_support=_support_from_json(obj["pruned_support"]),
                coefficients=np.asarray(obj["coefficients"], dtype=np.float64),
                estimate_values=np.asarray(obj["estimate_values"], dtype=np.float64),
                residual_norm=float(obj["residual_norm"]),
                estimate_error=None if obj["estimate_error"] is None else float(obj["estimate_error"]),
            )
        )
    noise = None if h["noise"] is None else np.asarray(h["noise"], dtype=np.float64)
    return TraceBundle(
        algorithm=Algorithm(h["algorithm"]),
        k=int(h["k"]),
        dictionary=D,
        records=tuple(records),
        x_true=x_true,
        noise=noise,
        sigma=None if h["sigma"] is None else float(h["sigma"]),
        iterations_run=int(h["iterations_run"]),
    )

"""Sparse recovery laboratory: greedy solvers, isometry diagnostics, benchmarks."""

from .errors import (
    BudgetExceeded,
    ConfigError,
    Divergence,
    IterationBudgetExceeded,
    NonFinite,
    PoleViolation,
    RankDeficient,
    SparseLabError,
    ZeroColumn,
)
from .guarantees import (
    BoundReport,
    GuaranteeParams,
    bound_report,
    condition_check,
    cosamp_constants,
    ds_constant,
    iht_constants,
    near_oracle_bound,
    nearly_sparse_bound,
    nearly_sparse_oracle_bound,
    oracle_mse_bound,
    oracle_mse_exact,
    sp_constants,
    success_probability,
)
from .linalg import (
    Dictionary,
    Measurement,
    SparseSignal,
    SupportSet,
    best_k_approx,
    export_dictionary_csv,
    import_dictionary_csv,
    least_squares_on_support,
    normalize_columns,
    top_k_support,
)
from .metrics import (
    CorrelationMode,
    NoiseCorrelation,
    RipEstimate,
    RipMethod,
    mutual_coherence,
    rip_exact,
    rip_monte_carlo,
    worst_case_noise_correlation,
)
from .pursuit import (
    Algorithm,
    DiagnosticsReport,
    FixedIterations,
    IterationRecord,
    PracticalLogRule,
    PursuitConfig,
    PursuitResult,
    cosamp,
    iht,
    oracle_estimator,
    practical_iteration_count,
    read_trace,
    recurrence_diagnostics,
    subspace_pursuit,
    write_trace,
)
from .experiment import (
    ExperimentConfig,
    TrialRecord,
    generate_dictionary,
    generate_signal,
    parse_config,
    run_experiment,
    run_trial,
    trial_seed,
)

__all__ = [name for name in dir() if not name.startswith("_")]

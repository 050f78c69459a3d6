"""Dictionary quality measures.

Mutual coherence, restricted-isometry constants (exact by enumeration or a
sampled lower bound), and the worst-case correlation of a dictionary with a
noise vector. The isometry defect of a support T is

    delta_T = max(lambda_max(G_T) - 1, 1 - lambda_min(G_T)),

the spectral deviation of the Gram submatrix G_T from the identity, and the
order-k constant is the maximum of delta_T over all supports of size k.
"""

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, NonFinite
from .linalg import SupportSet, top_k_support

ENUMERATION_BUDGET = 2 * 10**6

# per-chunk gather budget in matrix elements; keeps memory flat for large k
_CHUNK_ELEMENTS = 2 * 10**7


class RipMethod(enum.Enum):
    EXACT_ENUMERATION = "exact_enumeration"
    MONTE_CARLO_LOWER_BOUND = "monte_carlo_lower_bound"


class CorrelationMode(enum.Enum):
    EXACT = "exact"
    SQRT_K_MAX_BOUND = "sqrt_k_max_bound"


@dataclass(frozen=True)
class RipEstimate:
    k: int
    delta: float
    method: RipMethod
    supports_checked: int
    seed: int | None = None


@dataclass(frozen=True)
class NoiseCorrelation:
    k: int
    value: float
    mode: CorrelationMode
    argmax_support: SupportSet | None = None


def mutual_coherence(D):
    """Largest absolute inner product between distinct columns of D."""
    if D.n_atoms < 2:
        raise ValueError("coherence needs at least two atoms")
    g = np.abs(D.gram())
    np.fill_diagonal(g, 0.0)
    return float(g.max())


def _deviation_matrix(D):
    """Gram matrix minus identity; diagonal keeps the tiny normalization residue."""
    E = D.gram()
    E[np.diag_indices_from(E)] -= 1.0
    return E


def _support_deltas(E, idx):
    """Isometry defect of each support row in idx, via batched eigenvalues."""
    sub = E[idx[:, :, None], idx[:, None, :]]
    w = np.linalg.eigvalsh(sub)
    return np.maximum(w[:, -1], -w[:, 0])


def _combination_chunks(n, k, chunk):
    it = itertools.combinations(range(n), k)
    while True:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(it, chunk)), dtype=np.int64
        )
        if flat.size == 0:
            return
        yield flat.reshape(-1, k)


def _chunk_rows(k):
    return max(1024, _CHUNK_ELEMENTS // (k * k))


def rip_exact(D, k, budget=ENUMERATION_BUDGET):
    """Exact order-k restricted-isometry constant by support enumeration.

    Every one of the C(N, k) supports is accounted for. Supports whose
    Gershgorin row-sum bound cannot beat the running maximum are skipped
    without an eigendecomposition; the bound is a rigorous upper bound on
    the spectral radius of G_T - I, so the returned maximum is exact.

    Parameters
    ----------
    D : Dictionary
    k : int, 1 <= k <= N
    budget : int or None
        Maximum C(N, k) accepted; None disables the check.

    Raises
    ------
    BudgetExceeded
        When C(N, k) exceeds `budget` (use rip_monte_carlo instead).
    """
    n = D.n_atoms
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    total = math.comb(n, k)
    if budget is not None and total > budget:
        raise BudgetExceeded(
            f"C({n},{k}) = {total} supports exceeds budget {budget}; "
            "use rip_monte_carlo or raise the budget"
        )
    E = _deviation_matrix(D)
    absE = np.abs(E)
    best = 0.0
    first = True
    for idx in _combination_chunks(n, k, _chunk_rows(k)):
        if first:
            best = max(best, float(_support_deltas(E, idx).max()))
            first = False
            continue
        # max row sum of |G_T - I| bounds the spectral radius of G_T - I;
        # keep a small slack so float rounding can never drop the argmax
        bound = absE[idx[:, :, None], idx[:, None, :]].sum(axis=2).max(axis=1)
        keep = bound > best - 1e-9
        if np.any(keep):
            best = max(best, float(_support_deltas(E, idx[keep]).max()))
    return RipEstimate(k=k, delta=best, method=RipMethod.EXACT_ENUMERATION, supports_checked=total)


def rip_monte_carlo(D, k, trials, seed):
    """Lower bound on the order-k constant from uniformly sampled supports.

    Evaluates the same per-support defect as rip_exact on `trials` supports
    drawn uniformly (with replacement) from all size-k subsets; the result
    never exceeds the exact constant. Deterministic given `seed`.
    """
    n = D.n_atoms
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    E = _deviation_matrix(D)
    best = 0.0
    left = trials
    chunk = min(_chunk_rows(k), max(1, _CHUNK_ELEMENTS // (8 * n)))
    while left > 0:
        b = min(chunk, left)
        keys = rng.random((b, n))
        idx = np.argpartition(keys, kth=k - 1, axis=1)[:, :k]
        idx.sort(axis=1)
        best = max(best, float(_support_deltas(E, idx).max()))
        left -= b
    return RipEstimate(
        k=k,
        delta=best,
        method=RipMethod.MONTE_CARLO_LOWER_BOUND,
        supports_checked=trials,
        seed=seed,
    )


def worst_case_noise_correlation(
    D, e, k, mode=CorrelationMode.EXACT, use_enumeration=False, budget=ENUMERATION_BUDGET
):
    """Worst correlation of any size-k column subset with the vector e.

    Exact mode returns max over |T| = k of ||D_T* e||_2 together with the
    maximizing support. The maximizer is the set of k largest |<d_i, e>|,
    so the default path sorts squared correlations instead of enumerating;
    pass use_enumeration=True to force the brute-force oracle (subject to
    `budget`). SQRT_K_MAX_BOUND returns sqrt(k) * max_i |<d_i, e>|, an upper
    bound on the exact value.
    """
    e = np.asarray(e, dtype=np.float64)
    if not np.all(np.isfinite(e)):
        raise NonFinite("noise vector must be finite")
    n = D.n_atoms
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= {n}, got {k}")
    corr = D.entries.T @ e
    if mode is CorrelationMode.SQRT_K_MAX_BOUND:
        value = math.sqrt(k) * float(np.max(np.abs(corr))) if k else 0.0
        return NoiseCorrelation(k=k, value=value, mode=mode)
    if k == 0:
        return NoiseCorrelation(k=0, value=0.0, mode=mode, argmax_support=SupportSet(()))
    if not use_enumeration:
        support = top_k_support(corr, k)
        value = float(np.linalg.norm(corr[support.as_array()]))
        return NoiseCorrelation(k=k, value=value, mode=mode, argmax_support=support)
    total = math.comb(n, k)
    if budget is not None and total > budget:
        raise BudgetExceeded(f"C({n},{k}) = {total} supports exceeds budget {budget}")
    sq = corr**2
    best = -1.0
    best_support = None
    for idx in _combination_chunks(n, k, _chunk_rows(k)):
        sums = sq[idx].sum(axis=1)
        pos = int(np.argmax(sums))
        # strict comparison keeps the first maximizer in combination order
        if float(sums[pos]) > best:
            best = float(sums[pos])
            best_support = SupportSet(tuple(int(i) for i in idx[pos]))
    return NoiseCorrelation(
        k=k, value=math.sqrt(best), mode=CorrelationMode.EXACT, argmax_support=best_support
    )

"""Dense linear-algebra substrate for sparse recovery.

Dictionaries with unit-norm columns, index supports, restricted least
squares, projections and residuals, and top-k magnitude selection. All
operations are pure functions; the types are immutable after construction
and safe to share across parallel workers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, RankDeficient, ZeroColumn

NORMALIZATION_RTOL = 1e-10
RANK_RCOND = 1e-12
ORTHOGONALITY_ATOL = 1e-8
ZERO_COLUMN_TOL = 1e-14


@dataclass(frozen=True)
class Dictionary:
    """An m x N measurement matrix with unit-norm columns."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("dictionary entries must be a 2-d matrix")
        if not np.all(np.isfinite(entries)):
            raise NonFinite("dictionary entries must be finite")
        m, n = entries.shape
        if m > n:
            raise ValueError(f"need m <= N, got m={m}, N={n}")
        norms = np.linalg.norm(entries, axis=0)
        bad = np.where(np.abs(norms - 1.0) > NORMALIZATION_RTOL)[0]
        if bad.size:
            raise ValueError(
                f"column {bad[0]} has norm {norms[bad[0]]!r}; "
                "construct via normalize_columns"
            )
        entries = entries.copy()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n_atoms(self):
        return self.entries.shape[1]

    def columns(self, support):
        """Submatrix D_T for a SupportSet (or index array) T."""
        return self.entries[:, np.asarray(support.indices if isinstance(support, SupportSet) else support)]

    def gram(self):
        return self.entries.T @ self.entries


@dataclass(frozen=True, order=True)
class SupportSet:
    """A strictly increasing tuple of atom indices in [0, N)."""

    indices: tuple = field(default=())

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("support indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ValueError("support indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_iterable(cls, it):
        """Build from any iterable; sorts and rejects duplicates."""
        idx = sorted(int(i) for i in it)
        if any(b == a for a, b in zip(idx, idx[1:])):
            raise ValueError("duplicate support index")
        return cls(tuple(idx))

    @property
    def cardinality(self):
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return int(i) in set(self.indices)

    def as_array(self):
        return np.asarray(self.indices, dtype=np.int64)

    def union(self, other):
        return SupportSet(tuple(sorted(set(self.indices) | set(other.indices))))

    def intersect(self, other):
        return SupportSet(tuple(sorted(set(self.indices) & set(other.indices))))

    def difference(self, other):
        return SupportSet(tuple(sorted(set(self.indices) - set(other.indices))))

    def complement(self, n_atoms):
        return SupportSet(tuple(sorted(set(range(n_atoms)) - set(self.indices))))


@dataclass(frozen=True)
class SparseSignal:
    """A length-N vector with explicit support and intended cardinality k."""

    values: np.ndarray
    support: SupportSet
    k: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).copy()
        if values.ndim != 1:
            raise ValueError("signal values must be a 1-d vector")
        if not np.all(np.isfinite(values)):
            raise NonFinite("signal values must be finite")
        if self.support.cardinality > self.k:
            raise ValueError("support larger than intended cardinality k")
        if self.support.indices and self.support.indices[-1] >= values.size:
            raise ValueError("support index out of range")
        off = np.ones(values.size, dtype=bool)
        off[self.support.as_array()] = False
        if np.any(values[off] != 0.0):
            raise ValueError("values must be zero off the support")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_atoms(self):
        return self.values.size

    def on_support(self):
        return self.values[self.support.as_array()]


@dataclass(frozen=True)
class Measurement:
    """An observed vector y = D x + e with optional noise bookkeeping."""

    y: np.ndarray
    noise: np.ndarray | None = None
    sigma: float | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).copy()
        if not np.all(np.isfinite(y)):
            raise NonFinite("measurement must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def normalize_columns(matrix):
    """Scale every column of `matrix` to unit Euclidean norm.

    Parameters
    ----------
    matrix : array_like, shape (m, N)

    Returns
    -------
    Dictionary

    Raises
    ------
    ZeroColumn
        If any column norm falls below 1e-14.
    NonFinite
        On NaN or Inf entries.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("input matrix contains NaN or Inf")
    norms = np.linalg.norm(matrix, axis=0)
    small = np.where(norms < ZERO_COLUMN_TOL)[0]
    if small.size:
        raise ZeroColumn(int(small[0]), float(norms[small[0]]))
    return Dictionary(matrix / norms)


def least_squares_on_support(D, T, y):
    """Solve min_c ||y - D_T c||_2 by orthogonal factorization.

    Returns the coefficient vector of length |T| (empty T gives an empty
    vector). Raises RankDeficient when the smallest singular value of D_T
    relative to the largest is below 1e-12, or when |T| > m.
    """
    k = T.cardinality if isinstance(T, SupportSet) else len(T)
    if k == 0:
        return np.zeros(0)
    if k > D.m:
        raise RankDeficient(f"|T| = {k} exceeds measurement dimension m = {D.m}")
    sub = D.columns(T)
    coef, _, rank, _ = np.linalg.lstsq(sub, np.asarray(y, dtype=np.float64), rcond=RANK_RCOND)
    if rank < k:
        raise RankDeficient(f"D_T has numerical rank {rank} < |T| = {k}")
    return coef


def project(y, D, T):
    """Orthogonal projection of y onto span(D_T)."""
    coef = least_squares_on_support(D, T, y)
    return D.columns(T) @ coef


def residual(y, D, T):
    """y minus its projection onto span(D_T); orthogonal to every column of D_T."""
    y = np.asarray(y, dtype=np.float64)
    return y - project(y, D, T)


def top_k_support(v, k):
    """Indices of the k largest-magnitude entries of v.

    Ties are broken toward the lower index so results are deterministic.
    """
    v = np.asarray(v)
    if not 0 <= k <= v.size:
        raise ValueError(f"need 0 <= k <= {v.size}, got {k}")
    if k == 0:
        return SupportSet(())
    # stable sort on -|v| keeps the earlier index first among equal magnitudes
    order = np.argsort(-np.abs(v), kind="stable")
    return SupportSet(tuple(sorted(int(i) for i in order[:k])))


def best_k_approx(x, k):
    """Best k-term approximation: keep the k dominant entries, zero the rest."""
    x = np.asarray(x, dtype=np.float64)
    support = top_k_support(x, k)
    values = np.zeros_like(x)
    idx = support.as_array()
    values[idx] = x[idx]
    return SparseSignal(values, support, k)


def export_dictionary_csv(D, path):
    """Write a dictionary as CSV: header line "m,N", then m row-major rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{D.m},{D.n_atoms}\n")
        for row in D.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def import_dictionary_csv(path):
    """Read a dictionary written by export_dictionary_csv."""
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            m, n = (int(tok) for tok in header.split(","))
        except ValueError:
            raise ValueError(f"{path}: malformed header {header!r}, expected 'm,N'") from None
        entries = np.loadtxt(fh, delimiter=",", ndmin=2)
    if entries.shape != (m, n):
        raise ValueError(f"{path}: header says {m}x{n} but body is {entries.shape}")
    return Dictionary(entries)

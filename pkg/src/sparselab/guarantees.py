"""Closed-form recovery constants, conditions, and error bounds.

Each pursuit algorithm has a per-iteration recurrence

    err_l <= rho * err_{l-1} + tau * ||D_{T_e}* e||_2

whose coefficients depend on a restricted-isometry constant delta, a
contraction condition guaranteeing rho <= 1/2, and a final accuracy constant
C with err <= C * ||D_{T_e}* e||_2. Under white Gaussian noise the adversarial
term is replaced by a high-probability bound, giving the near-oracle form
C^2 * 2(1+a) * log(N) * K * sigma^2. log is the natural logarithm throughout
(it comes from the Gaussian maximal inequality).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleViolation, RankDeficient
from .linalg import best_k_approx

SP_CONDITION = 0.139
COSAMP_CONDITION = 0.1
IHT_CONDITION = 1 / math.sqrt(32)

_FAMILIES = ("sp", "cosamp", "iht", "ds")


@dataclass(frozen=True)
class GuaranteeParams:
    """Inputs shared by the probabilistic bounds."""

    a: float
    n_atoms: int
    k: int
    sigma: float
    delta: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("probability exponent a must be positive")
        if self.n_atoms < 2:
            raise ValueError("need at least two atoms")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta!r}")


@dataclass(frozen=True)
class BoundReport:
    algorithm: str
    condition_met: bool
    constant: float
    probabilistic_bound: float
    success_probability: float
    deterministic_bound: float | None = None


def _check_delta(delta):
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta!r}")


def sp_constants(delta3k):
    """Recurrence coefficients (rho, tau) and accuracy constant for SP.

    rho = 2 d (1+d) / (1-d)^3, tau = (6 - 6d + 4d^2) / (1-d)^3,
    C = 2 (7 - 9d + 7d^2 - d^3) / (1-d)^4, evaluated at d = delta3k.
    """
    _check_delta(delta3k)
    d = float(delta3k)
    rho = 2 * d * (1 + d) / (1 - d) ** 3
    tau = (6 - 6 * d + 4 * d * d) / (1 - d) ** 3
    c = 2 * (7 - 9 * d + 7 * d * d - d**3) / (1 - d) ** 4
    return rho, tau, c


def cosamp_constants(delta4k):
    """rho = 4d/(1-d)^2, tau = (14-6d)/(1-d)^2, C = (29-14d+d^2)/(1-d)^2."""
    _check_delta(delta4k)
    d = float(delta4k)
    rho = 4 * d / (1 - d) ** 2
    tau = (14 - 6 * d) / (1 - d) ** 2
    c = (29 - 14 * d + d * d) / (1 - d) ** 2
    return rho, tau, c


def iht_constants(delta3k):
    """rho = sqrt(8) * d; tau and C do not depend on d: tau = 4, C = 9."""
    if delta3k < 0:
        raise ValueError("delta must be nonnegative")
    return math.sqrt(8) * float(delta3k), 4.0, 9.0


def ds_constant(delta3k):
    """Accuracy constant 4 / (1 - 2d) of the Dantzig-selector style bound."""
    if delta3k < 0:
        raise ValueError("delta must be nonnegative")
    if delta3k >= 0.5:
        raise PoleViolation(f"4/(1-2d) has a pole at d = 1/2; got d = {delta3k!r}")
    return 4.0 / (1.0 - 2.0 * float(delta3k))


def _family(algorithm):
    name = getattr(algorithm, "value", algorithm)
    name = str(name).lower()
    if name not in _FAMILIES:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {_FAMILIES}")
    return name


def condition_check(algorithm, delta, second_delta=None):
    """Whether the contraction condition of the given family holds.

    sp: delta_3K <= 0.139; cosamp: delta_4K <= 0.1; iht: delta_3K <= 1/sqrt(32);
    ds: delta_2K + delta_3K <= 1 (pass both values, order irrelevant).
    """
    name = _family(algorithm)
    if name == "sp":
        return bool(delta <= SP_CONDITION)
    if name == "cosamp":
        return bool(delta <= COSAMP_CONDITION)
    if name == "iht":
        return bool(delta <= IHT_CONDITION)
    if second_delta is None:
        raise ValueError("the ds condition needs both delta_2K and delta_3K")
    return bool(delta + second_delta <= 1.0)


def near_oracle_bound(c, params):
    """High-probability squared-error bound C^2 * 2(1+a) * ln(N) * K * sigma^2."""
    return c * c * 2.0 * (1.0 + params.a) * math.log(params.n_atoms) * params.k * params.sigma**2


def success_probability(a, n_atoms):
    """1 - 1 / (sqrt(pi (1+a) ln N) * N^a), the bounds' coverage probability."""
    if a <= 0:
        raise ValueError("probability exponent a must be positive")
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    return 1.0 - 1.0 / (math.sqrt(math.pi * (1.0 + a) * math.log(n_atoms)) * n_atoms**a)


def oracle_mse_bound(k, delta_k, sigma):
    """K sigma^2 / (1 - delta_K), the closed-form oracle MSE bound."""
    if delta_k >= 1:
        raise PoleViolation(f"oracle bound has a pole at delta = 1; got {delta_k!r}")
    if delta_k < 0:
        raise ValueError("delta must be nonnegative")
    return k * sigma * sigma / (1.0 - float(delta_k))


def oracle_mse_exact(D, T, sigma):
    """trace{(D_T* D_T)^-1} sigma^2, the exact oracle mean squared error."""
    sub = D.columns(T)
    if sub.shape[1] == 0:
        return 0.0
    if sub.shape[1] > D.m:
        raise RankDeficient(f"|T| = {sub.shape[1]} exceeds m = {D.m}")
    eigs = np.linalg.eigvalsh(sub.T @ sub)
    if eigs[0] <= 0 or eigs[0] / eigs[-1] < 1e-24:
        raise RankDeficient("Gram matrix of D_T is numerically singular")
    return float(np.sum(1.0 / eigs)) * sigma * sigma


def bound_report(algorithm, params, noise_correlation=None, second_delta=None):
    """Assemble constants, bounds, and condition flags for one algorithm.

    `params.delta` is the family's relevant constant (delta_3K for sp/iht/ds,
    delta_4K for cosamp). Bounds are evaluated even when the condition fails;
    condition_met = False marks them as non-guarantees.
    """
    name = _family(algorithm)
    if name == "sp":
        c = sp_constants(params.delta)[2]
    elif name == "cosamp":
        c = cosamp_constants(params.delta)[2]
    elif name == "iht":
        c = iht_constants(params.delta)[2]
    else:
        c = ds_constant(params.delta)
    det = None if noise_correlation is None else c * float(noise_correlation)
    return BoundReport(
        algorithm=name,
        condition_met=condition_check(name, params.delta, second_delta),
        constant=c,
        probabilistic_bound=near_oracle_bound(c, params),
        success_probability=success_probability(params.a, params.n_atoms),
        deterministic_bound=det,
    )


def _tail_norms(x, k):
    x = np.asarray(x, dtype=np.float64)
    tail = x - best_k_approx(x, k).values
    return float(np.linalg.norm(tail)), float(np.sum(np.abs(tail)))


def nearly_sparse_bound(c, delta_k, params, x, noise_correlation):
    """Error bounds when x is only approximately k-sparse.

    Returns (deterministic, probabilistic):

      deterministic = C (nc + (1+d) t2 + (1+d)/sqrt(K) t1)
      probabilistic = 2 C^2 (sqrt((1+a) ln(N) K) sigma + t2 + t1/sqrt(K))^2

    where t2, t1 are the l2/l1 norms of x minus its best k-term approximation
    and nc fills the worst-case noise-correlation slot.
    """
    _check_delta(delta_k)
    t2, t1 = _tail_norms(x, params.k)
    rk = math.sqrt(params.k)
    det = c * (float(noise_correlation) + (1 + delta_k) * t2 + (1 + delta_k) / rk * t1)
    prob = (
        2.0
        * c
        * c
        * (math.sqrt((1 + params.a) * math.log(params.n_atoms) * params.k) * params.sigma + t2 + t1 / rk) ** 2
    )
    return det, prob


def nearly_sparse_oracle_bound(delta_k, k, sigma, x):
    """Oracle MSE bound for approximately k-sparse x.

    (1/(1-d)) ((1 + sqrt(1+d)) t2 + sqrt(1+d)/sqrt(K) t1 + sqrt(K) sigma)^2.
    """
    _check_delta(delta_k)
    t2, t1 = _tail_norms(x, k)
    d = float(delta_k)
    inner = (1 + math.sqrt(1 + d)) * t2 + math.sqrt(1 + d) / math.sqrt(k) * t1 + math.sqrt(k) * sigma
    return inner * inner / (1.0 - d)

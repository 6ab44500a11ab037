"""
Closed-form security metrics of the commitment protocol.

Three quantities are evaluated for a parameter set:

- P_b: probability that Bob identifies Alice's state without doubt by
  splitting the pulse into M weak copies and testing every basis
  (brute-force attack);
- the cloning-machine condition: Bob cannot gain by cloning N <= M-1 pieces
  of the pulse into M copies when the squared cloning fidelity stays below
  the overlap with the half-way state;
- p_a: probability that Alice announces a neighbor of the state she sent
  and Bob's single-photon detector stays silent while his main detector
  fires.

All functions return raw probabilities; percent formatting happens in the
report layer.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .exceptions import DomainError
from .polarization import ProtocolParams, halfway_overlap, require_int

logger = logging.getLogger(__name__)

MAX_M = 64
QCM_LOG_TOLERANCE = 1e-12
PRIOR_KINDS = ("uniform",)


@dataclass(frozen=True)
class SecurityReport:
    """One row of the security table"""

    M: int
    mean_photons: float
    p_a: float
    p_b: float
    qcm_secure: bool
    worst_N: Optional[int] = None
    rs1: Optional[float] = None
    mu: Optional[float] = None

    def __post_init__(self):
        for name in ("p_a", "p_b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.qcm_secure and self.worst_N is not None:
            raise DomainError("worst_N must be absent for a secure row")
        if not self.qcm_secure and (self.worst_N is None or not 1 <= self.worst_N <= self.M - 1):
            raise DomainError(f"worst_N must lie in [1, {self.M - 1}] for an insecure row")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class QCMMargin:
    """Both sides of the cloning condition for one N"""

    N: int
    lhs: float
    rhs: float
    log_lhs: float
    log_rhs: float
    holds: bool


def both_click_probability(n, delta):
    """
    Probability that both outputs of a PBS fire for a pulse of n photons
    at angle delta from the basis: (1 - e^{-n cos^2}) (1 - e^{-n sin^2}).

    Accepts scalars or numpy arrays.
    """
    delta = np.asarray(delta, dtype=float)
    result = np.expm1(-n * np.cos(delta) ** 2) * np.expm1(-n * np.sin(delta) ** 2)
    return float(result) if result.ndim == 0 else result


def brute_force_bracket(n, delta):
    """
    The brute-force bracket in its cosh form:
    1 - 2 e^{-n/2} cosh[(n/2) cos(2 delta)] + e^{-n}.

    Equal to both_click_probability(n, delta); kept for cross-checks.
    """
    delta = np.asarray(delta, dtype=float)
    result = 1.0 - 2.0 * np.exp(-n / 2) * np.cosh((n / 2) * np.cos(2 * delta)) + np.exp(-n)
    return float(result) if result.ndim == 0 else result


def brute_force_probability(params: ProtocolParams, mean_photons: Optional[float] = None) -> float:
    """
    Probability that the brute-force attack identifies Alice's state.

    Bob splits the pulse into M pieces of <n>/M photons and measures piece i
    in basis theta_i. He succeeds when the correct basis fires on its
    expected output and every other basis fires on both outputs.

    Args:
        params: Protocol parameters (prior taken from params.prior)
        mean_photons: Override of the derived <n>

    Returns:
        P_b in [0, 1]
    """
    n = params.mean_photons if mean_photons is None else mean_photons
    if n < 0:
        raise DomainError(f"mean_photons must be >= 0, got {n}")
    per_piece = n / params.M

    theta = np.array(params.angles)
    factors = both_click_probability(per_piece, theta[:, None] - theta[None, :])
    np.fill_diagonal(factors, 1.0)
    per_choice = np.prod(factors, axis=1)

    prefactor = -math.expm1(-per_piece)
    return float(prefactor * np.dot(np.array(params.prior), per_choice))


def cloning_fidelity(M: int, N: int) -> float:
    """
    Squared fidelity [MN/(MN+M-N)]^2 of Gaussian N -> M polarization cloning.

    Both field components are cloned, so the single-mode fidelity is squared.

    Raises:
        DomainError: Unless 1 <= N <= M
    """
    M = require_int(M, "M")
    N = require_int(N, "N")
    if not 1 <= N <= M:
        raise DomainError(f"N must lie in [1, M={M}], got {N}")
    return (M * N / (M * N + M - N)) ** 2


def _check_N(params: ProtocolParams, N) -> int:
    N = require_int(N, "N")
    if not 1 <= N <= params.M - 1:
        raise DomainError(f"N must lie in [1, {params.M - 1}], got {N}")
    return N


def qcm_margin(params: ProtocolParams, N: int, mean_photons: Optional[float] = None) -> QCMMargin:
    """Evaluate both sides of the cloning condition, directly and in log space."""
    N = _check_N(params, N)
    n = params.mean_photons if mean_photons is None else mean_photons
    M = params.M

    log_lhs = -4.0 * (n / N) * math.sin(math.pi / (8 * M)) ** 2
    log_rhs = 2.0 * (math.log(M * N) - math.log(M * N + M - N))
    return QCMMargin(
        N=N,
        lhs=halfway_overlap(n / N, M),
        rhs=cloning_fidelity(M, N),
        log_lhs=log_lhs,
        log_rhs=log_rhs,
        holds=log_lhs >= log_rhs - QCM_LOG_TOLERANCE,
    )


def qcm_condition_holds(params: ProtocolParams, N: int, mean_photons: Optional[float] = None) -> bool:
    """
    Whether cloning N pieces into M copies fails to beat the half-way overlap.

    Raises:
        DomainError: Unless 1 <= N <= M-1
    """
    return qcm_margin(params, N, mean_photons).holds


def qcm_margins(params: ProtocolParams, mean_photons: Optional[float] = None) -> List[QCMMargin]:
    return [qcm_margin(params, N, mean_photons) for N in range(1, params.M)]


def qcm_secure(params: ProtocolParams, mean_photons: Optional[float] = None) -> Tuple[bool, Optional[int]]:
    """
    Check the cloning condition for every N in [1, M-1].

    Returns:
        (True, None) when all hold, else (False, smallest violating N)
    """
    for N in range(1, params.M):
        if not qcm_condition_holds(params, N, mean_photons):
            return False, N
    return True, None


def alice_cheat_probability(params: ProtocolParams, mean_photons: Optional[float] = None) -> float:
    """
    Probability that Alice gets a neighbor of her real state accepted.

    p_a = {1 - exp[-mu <n> cos^2(theta)]} exp[-<n> sin^2(theta)], theta = pi/(2M)

    Args:
        params: Protocol parameters
        mean_photons: Override of the derived <n>

    Returns:
        p_a in [0, 1]
    """
    n = params.mean_photons if mean_photons is None else mean_photons
    if n < 0:
        raise DomainError(f"mean_photons must be >= 0, got {n}")
    theta = params.spacing
    return -math.expm1(-params.mu * n * math.cos(theta) ** 2) * math.exp(-n * math.sin(theta) ** 2)


def honest_accept_probability(
    params: ProtocolParams,
    dark_count_prob: float = 0.0,
    mean_photons: Optional[float] = None,
) -> float:
    """
    Probability that Bob confirms an honest reveal.

    [1 - (1 - d) e^{-mu <n>}] (1 - d); equals 1 - exp(-mu <n>) without dark counts.
    """
    if not 0.0 <= dark_count_prob < 1.0:
        raise DomainError(f"dark_count_prob must lie in [0, 1), got {dark_count_prob}")
    n = params.mean_photons if mean_photons is None else mean_photons
    main = dark_count_prob - (1.0 - dark_count_prob) * math.expm1(-params.mu * n)
    return main * (1.0 - dark_count_prob)


def security_report(params: ProtocolParams) -> SecurityReport:
    """Evaluate all metrics for one parameter set."""
    secure, worst_N = qcm_secure(params)
    return SecurityReport(
        M=params.M,
        mean_photons=params.mean_photons,
        p_a=alice_cheat_probability(params),
        p_b=brute_force_probability(params),
        qcm_secure=secure,
        worst_N=worst_N,
        rs1=params.rs1,
        mu=params.mu,
    )


def _check_M_range(M_range: Iterable[int]) -> List[int]:
    values = [require_int(M, "M") for M in M_range]
    if not values:
        raise DomainError("M range is empty")
    for M in values:
        if not 2 <= M <= MAX_M:
            raise DomainError(f"M must lie in [2, {MAX_M}], got {M}")
    return sorted(values)


def security_table(
    rs1: float,
    mu: float,
    M_range: Iterable[int],
    prior_kind: str = "uniform",
    workers: int = 1,
) -> List[SecurityReport]:
    """
    Build one SecurityReport per M.

    Args:
        rs1: Neighbor overlap
        mu: Main detector efficiency
        M_range: Values of M, each in [2, 64]
        prior_kind: Only "uniform" is built in
        workers: Threads used to evaluate rows

    Returns:
        Reports ordered by ascending M
    """
    if prior_kind not in PRIOR_KINDS:
        raise DomainError(f"unknown prior kind {prior_kind!r}; expected one of {PRIOR_KINDS}")
    Ms = _check_M_range(M_range)
    params_list = [ProtocolParams.uniform(M, rs1, mu) for M in Ms]

    logger.debug(f"Evaluating {len(Ms)} row(s) at rs1={rs1}, mu={mu}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(security_report, params_list))
    return [security_report(p) for p in params_list]


def max_secure_M(rs1: float, mu: float = 0.75, m_max: int = MAX_M) -> Optional[int]:
    """
    Largest M such that every M' in [2, M] passes the cloning condition.

    Returns:
        That M, or None when even M = 2 is insecure
    """
    best = None
    for M in range(2, m_max + 1):
        secure, _ = qcm_secure(ProtocolParams.uniform(M, rs1, mu))
        if not secure:
            break
        best = M
    return best

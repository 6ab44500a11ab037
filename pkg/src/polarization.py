"""
Linear-polarization coherent states.

A pulse is a two-mode coherent state |alpha, beta> with real amplitudes
alpha = sqrt(n) cos(theta) and beta = sqrt(n) sin(theta). The M committed
states sit on the non-cyclic grid theta_m = m * pi / (2M), m = 0..M-1, so
neighbors are pi/(2M) apart and all angles fit in [0, pi/2).

All angles are radians. Degrees only appear at the CLI boundary.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import DomainError

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2
PRIOR_SUM_TOLERANCE = 1e-9


def require_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _check_M(M) -> int:
    M = require_int(M, "M")
    if M < 2:
        raise DomainError(f"M must be at least 2, got {M}")
    return M


def _fold_angle(angle: float) -> float:
    # polarization direction is defined mod pi; reflect (pi/2, pi) back into
    # [0, pi/2], which keeps the horizontal/vertical photon split unchanged
    folded = angle % math.pi
    if folded > HALF_PI:
        folded = math.pi - folded
    return min(max(folded, 0.0), HALF_PI)


@dataclass(frozen=True)
class PolarizationPulse:
    """
    Two-mode coherent state with a linear polarization.

    Attributes:
        mean_photons: <n> = alpha^2 + beta^2
        angle: Polarization angle from horizontal, radians in [0, pi/2]
    """

    mean_photons: float
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.mean_photons) or self.mean_photons < 0:
            raise DomainError(f"mean_photons must be finite and >= 0, got {self.mean_photons}")
        if not 0.0 <= self.angle <= HALF_PI:
            raise DomainError(f"angle must lie in [0, pi/2], got {self.angle}")

    @classmethod
    def from_amplitudes(cls, alpha: float, beta: float) -> "PolarizationPulse":
        """Build a pulse from real mode amplitudes (alpha, beta)."""
        mean_photons = alpha * alpha + beta * beta
        angle = _fold_angle(math.atan2(beta, alpha)) if mean_photons > 0 else 0.0
        return cls(mean_photons=mean_photons, angle=angle)

    @property
    def amplitudes(self) -> Tuple[float, float]:
        root = math.sqrt(self.mean_photons)
        return root * math.cos(self.angle), root * math.sin(self.angle)

    @property
    def horizontal_photons(self) -> float:
        return self.mean_photons * math.cos(self.angle) ** 2

    @property
    def vertical_photons(self) -> float:
        return self.mean_photons * math.sin(self.angle) ** 2

    def scaled(self, factor: float) -> "PolarizationPulse":
        """Attenuate (or amplify) the pulse, keeping its polarization."""
        if factor < 0:
            raise DomainError(f"scale factor must be >= 0, got {factor}")
        return PolarizationPulse(self.mean_photons * factor, self.angle)

    def split(self, parts: int) -> Tuple["PolarizationPulse", ...]:
        """
        Split the pulse on a balanced beamsplitter network.

        Each output carries mean_photons / parts at the same polarization
        angle; coherent states stay coherent and keep their polarization.

        Args:
            parts: Number of output pulses (>= 1)

        Returns:
            Tuple of `parts` pulses
        """
        parts = require_int(parts, "parts")
        if parts < 1:
            raise DomainError(f"parts must be >= 1, got {parts}")
        piece = PolarizationPulse(self.mean_photons / parts, self.angle)
        return (piece,) * parts


@dataclass(frozen=True)
class ProtocolParams:
    """
    Agreed protocol parameters.

    Attributes:
        M: Number of polarization states (bit string of floor(log2 M) bits)
        rs1: Overlap between neighboring states, in (0, 1)
        mu: Quantum efficiency of Bob's non-single-photon detector, in (0, 1]
        prior: Alice's choice probabilities; uniform when not given
    """

    M: int
    rs1: float
    mu: float = 0.75
    prior: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self):
        _check_M(self.M)
        if not 0.0 < self.rs1 < 1.0:
            raise DomainError(f"rs1 must lie in (0, 1), got {self.rs1}")
        if not 0.0 < self.mu <= 1.0:
            raise DomainError(f"mu must lie in (0, 1], got {self.mu}")

        if self.prior is None:
            object.__setattr__(self, "prior", (1.0 / self.M,) * self.M)
        else:
            prior = tuple(float(p) for p in self.prior)
            if len(prior) != self.M:
                raise DomainError(f"prior must have {self.M} entries, got {len(prior)}")
            if any(p < 0 or not math.isfinite(p) for p in prior):
                raise DomainError("prior entries must be finite and >= 0")
            if abs(math.fsum(prior) - 1.0) > PRIOR_SUM_TOLERANCE:
                raise DomainError(f"prior must sum to 1, got {math.fsum(prior)}")
            object.__setattr__(self, "prior", prior)

    @classmethod
    def uniform(cls, M: int, rs1: float, mu: float = 0.75) -> "ProtocolParams":
        return cls(M=M, rs1=rs1, mu=mu)

    @property
    def mean_photons(self) -> float:
        """Mean photon number Alice must send, derived from (M, rs1)."""
        return mean_photons_from_rs1(self.M, self.rs1)

    @property
    def spacing(self) -> float:
        """Angular distance between neighboring states, pi/(2M)."""
        return math.pi / (2 * self.M)

    @property
    def angles(self) -> Tuple[float, ...]:
        return tuple(state_angle(self, m) for m in range(self.M))


def check_choice(params: ProtocolParams, choice: int) -> int:
    """Return `choice` as an int, raising DomainError unless 0 <= choice < M."""
    choice = require_int(choice, "choice")
    if not 0 <= choice < params.M:
        raise DomainError(f"choice must lie in [0, {params.M}), got {choice}")
    return choice


def state_angle(params: ProtocolParams, index: int) -> float:
    """
    Polarization angle of constellation state `index`.

    Args:
        params: Protocol parameters
        index: State index, 0 <= index < M

    Returns:
        index * pi / (2M) in radians

    Raises:
        DomainError: If index is out of range
    """
    index = require_int(index, "index")
    if not 0 <= index < params.M:
        raise DomainError(f"state index must lie in [0, {params.M}), got {index}")
    return index * math.pi / (2 * params.M)


def neighbors(M: int, index: int) -> Tuple[int, ...]:
    """Neighbor indices on the non-cyclic grid (one for edge states)."""
    M = _check_M(M)
    index = require_int(index, "index")
    if not 0 <= index < M:
        raise DomainError(f"state index must lie in [0, {M}), got {index}")
    return tuple(i for i in (index - 1, index + 1) if 0 <= i < M)


def rotate(pulse: PolarizationPulse, theta: float) -> PolarizationPulse:
    """
    Apply the polarization rotator R(theta) to a pulse.

    Args:
        pulse: Input pulse
        theta: Rotation angle in radians

    Returns:
        Rotated pulse; angles leaving [0, pi/2] are folded back without
        changing the horizontal/vertical photon split
    """
    c, s = math.cos(theta), math.sin(theta)
    x, y = math.cos(pulse.angle), math.sin(pulse.angle)
    # R(theta) on the unit polarization vector; plain floats so that
    # rotating a state back onto the horizontal axis gives an exact zero
    x, y = c * x - s * y, s * x + c * y
    mean_photons = pulse.mean_photons * (x * x + y * y)
    return PolarizationPulse(mean_photons, _fold_angle(math.atan2(y, x)))


def neighbor_overlap(mean_photons: float, theta: float) -> float:
    """
    Squared overlap between a state and its copy rotated by theta.

    |<a,b|R(theta)|a,b>|^2 = exp[-4 <n> sin^2(theta/2)]; underflows to 0.0.

    Raises:
        DomainError: If mean_photons is negative
    """
    if mean_photons < 0:
        raise DomainError(f"mean_photons must be >= 0, got {mean_photons}")
    return math.exp(-4.0 * mean_photons * math.sin(theta / 2) ** 2)


def coherent_overlap(first: PolarizationPulse, second: PolarizationPulse) -> float:
    """Squared overlap of two coherent states from their explicit amplitudes."""
    a1, b1 = first.amplitudes
    a2, b2 = second.amplitudes
    return math.exp(-((a1 - a2) ** 2) - (b1 - b2) ** 2)


def halfway_overlap(mean_photons: float, M: int) -> float:
    """Overlap with the state halfway to a neighbor, exp[-4 <n> sin^2(pi/(8M))]."""
    M = _check_M(M)
    return neighbor_overlap(mean_photons, math.pi / (4 * M))


def mean_photons_from_rs1(M: int, rs1: float) -> float:
    """
    Mean photon number for which neighbors overlap by rs1.

    <n> = -ln(rs1) / (4 sin^2(pi/(4M)))

    Raises:
        DomainError: If M < 2 or rs1 is outside (0, 1)
    """
    M = _check_M(M)
    if not 0.0 < rs1 < 1.0:
        raise DomainError(f"rs1 must lie in (0, 1), got {rs1}")
    return -math.log(rs1) / (4.0 * math.sin(math.pi / (4 * M)) ** 2)


def rs1_from_mean_photons(M: int, mean_photons: float) -> float:
    """Neighbor overlap for a given mean photon number; inverse of mean_photons_from_rs1."""
    M = _check_M(M)
    if mean_photons < 0:
        raise DomainError(f"mean_photons must be >= 0, got {mean_photons}")
    return math.exp(-4.0 * mean_photons * math.sin(math.pi / (4 * M)) ** 2)


def string_bits(M: int) -> int:
    """Number of committed bits, floor(log2 M)."""
    return _check_M(M).bit_length() - 1


def choice_from_bits(bits: str, M: int) -> int:
    """
    Map a committed bit string to its constellation index (big-endian).

    Raises:
        DomainError: On wrong length or non-binary characters
    """
    width = string_bits(M)
    if len(bits) != width or any(c not in "01" for c in bits):
        raise DomainError(f"expected a {width}-bit binary string for M={M}, got {bits!r}")
    return int(bits, 2)


def bits_from_choice(choice: int, M: int) -> str:
    """Bit string committed by constellation index `choice`."""
    width = string_bits(M)
    choice = require_int(choice, "choice")
    if not 0 <= choice < 2 ** width:
        raise DomainError(f"index {choice} does not encode a {width}-bit string")
    return format(choice, f"0{width}b")

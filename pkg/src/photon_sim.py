"""
Photon-level Monte Carlo model of Bob's receiver.

Bob's setup is a polarization rotator followed by a PBS. The output where
the revealed state should emerge (horizontal after rotation) goes to a
non-single-photon detector of efficiency mu; the other output goes to a
single-photon detector (SPD). A coherent state of n photons makes a
detector of efficiency eta click with probability 1 - exp(-eta n), and the
two PBS outputs are independent coherent states, so only click/no-click
is sampled.

Trials are split into fixed-size chunks and chunk i draws from
SeedSequence(seed, spawn_key=(i,)). Aggregate counts therefore depend only
on (seed, trials, chunk_trials), never on the number of workers.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .exceptions import DomainError
from .polarization import PolarizationPulse, ProtocolParams, rotate, state_angle

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_TRIALS = 1 << 14
SEED_LIMIT = 2 ** 64


def detector_click_probability(mean_photons, efficiency: float = 1.0, dark_count_prob: float = 0.0):
    """
    Click probability of a detector hit by a coherent state.

    1 - (1 - p_dark) exp(-eta n); accepts scalars or numpy arrays.
    """
    return dark_count_prob - (1.0 - dark_count_prob) * np.expm1(-efficiency * np.asarray(mean_photons))


@dataclass(frozen=True)
class MeasurementSetup:
    """
    Rotator + PBS + two detectors.

    Attributes:
        rotator_angle: Rotator setting in radians (the revealed state's angle)
        main_detector_efficiency: mu of the detector on the expected output
        spd_efficiency: Efficiency of the single-photon detector
        dark_count_prob: Per-measurement dark count probability of each detector
    """

    rotator_angle: float
    main_detector_efficiency: float = 1.0
    spd_efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        for name in ("main_detector_efficiency", "spd_efficiency"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {value}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise DomainError(f"dark_count_prob must lie in [0, 1), got {self.dark_count_prob}")

    def click_probabilities(self, pulse: PolarizationPulse) -> Tuple[float, float]:
        """Return (main, spd) click probabilities for a pulse."""
        aligned = rotate(pulse, -self.rotator_angle)
        main = detector_click_probability(
            aligned.horizontal_photons, self.main_detector_efficiency, self.dark_count_prob
        )
        spd = detector_click_probability(
            aligned.vertical_photons, self.spd_efficiency, self.dark_count_prob
        )
        return float(main), float(spd)


@dataclass(frozen=True)
class DetectionRecord:
    """Outcome of measuring one pulse"""

    main_click: bool
    spd_click: bool

    @property
    def confirmed(self) -> bool:
        return self.main_click and not self.spd_click


@dataclass(frozen=True)
class SimConfig:
    """
    Monte Carlo settings.

    Attributes:
        trials: Number of independent trials (>= 1)
        seed: 64-bit unsigned seed
        workers: Threads used to evaluate chunks
        chunk_trials: Trials per RNG substream
    """

    trials: int
    seed: int = 0
    workers: int = 1
    chunk_trials: int = DEFAULT_CHUNK_TRIALS

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < SEED_LIMIT:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1 or self.chunk_trials < 1:
            raise DomainError("workers and chunk_trials must be >= 1")

    def chunks(self) -> List[Tuple[int, int]]:
        """(index, size) of every chunk, in order."""
        full, rest = divmod(self.trials, self.chunk_trials)
        sizes = [self.chunk_trials] * full + ([rest] if rest else [])
        return list(enumerate(sizes))

    def chunk_rng(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(index,))))


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Binomial estimate of an event probability"""

    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def std_error(self) -> float:
        rate = self.rate
        return math.sqrt(rate * (1.0 - rate) / self.trials)

    def sigma(self, expected: float) -> float:
        """Binomial standard error of the expected probability."""
        return math.sqrt(expected * (1.0 - expected) / self.trials)

    def agrees_with(self, expected: float, sigmas: float = 3.0) -> bool:
        """True when |rate - expected| is within `sigmas` binomial standard errors."""
        return abs(self.rate - expected) <= sigmas * self.sigma(expected)


Kernel = Callable[[np.random.Generator, int], np.ndarray]


def run_chunks(cfg: SimConfig, kernel: Kernel) -> np.ndarray:
    """
    Evaluate a counting kernel on every chunk and sum the counts.

    Args:
        cfg: Simulation config
        kernel: Function (rng, size) -> integer count vector

    Returns:
        Summed count vector (int64)
    """
    chunks = cfg.chunks()

    def work(chunk: Tuple[int, int]) -> np.ndarray:
        index, size = chunk
        counts = np.asarray(kernel(cfg.chunk_rng(index), size), dtype=np.int64)
        logger.debug(f"Chunk {index + 1}/{len(chunks)}: {counts.tolist()}")
        return counts

    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(chunk) for chunk in chunks]
    return np.sum(results, axis=0, dtype=np.int64)


def measure(pulse: PolarizationPulse, setup: MeasurementSetup, rng: np.random.Generator) -> DetectionRecord:
    """
    Measure one pulse with Bob's setup.

    Args:
        pulse: Incoming pulse
        setup: Rotator setting and detector parameters
        rng: Random stream

    Returns:
        Which detectors clicked
    """
    p_main, p_spd = setup.click_probabilities(pulse)
    u = rng.random(2)
    return DetectionRecord(main_click=bool(u[0] < p_main), spd_click=bool(u[1] < p_spd))


def simulate_malus(pulse: PolarizationPulse, setup: MeasurementSetup, cfg: SimConfig) -> Tuple[MonteCarloEstimate, MonteCarloEstimate]:
    """Empirical click rates of the main and SPD outputs for a fixed pulse."""
    p_main, p_spd = setup.click_probabilities(pulse)

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, 2))
        return np.array([np.count_nonzero(u[:, 0] < p_main), np.count_nonzero(u[:, 1] < p_spd)])

    main, spd = run_chunks(cfg, kernel)
    return MonteCarloEstimate(int(main), cfg.trials), MonteCarloEstimate(int(spd), cfg.trials)


def simulate_honest_verification(
    params: ProtocolParams,
    choice: int,
    cfg: SimConfig,
    dark_count_prob: float = 0.0,
    spd_efficiency: float = 1.0,
    mean_photons: Optional[float] = None,
) -> Tuple[MonteCarloEstimate, MonteCarloEstimate]:
    """
    Honest sessions: Alice sends and reveals theta_choice.

    Args:
        params: Protocol parameters
        choice: Alice's state index
        cfg: Simulation config
        dark_count_prob: Dark count probability of both detectors
        spd_efficiency: SPD efficiency
        mean_photons: Override of the derived <n>

    Returns:
        (accept, false_alarm) estimates: accept means main click and SPD
        silent; false alarm means the SPD fired
    """
    angle = state_angle(params, choice)
    n = params.mean_photons if mean_photons is None else mean_photons
    setup = MeasurementSetup(
        rotator_angle=angle,
        main_detector_efficiency=params.mu,
        spd_efficiency=spd_efficiency,
        dark_count_prob=dark_count_prob,
    )
    p_main, p_spd = setup.click_probabilities(PolarizationPulse(n, angle))
    logger.info(f"Honest verification: M={params.M}, choice={choice}, trials={cfg.trials}")

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random((size, 2))
        main = u[:, 0] < p_main
        spd = u[:, 1] < p_spd
        return np.array([np.count_nonzero(main & ~spd), np.count_nonzero(spd)])

    accepted, alarms = run_chunks(cfg, kernel)
    return MonteCarloEstimate(int(accepted), cfg.trials), MonteCarloEstimate(int(alarms), cfg.trials)


def identify_by_brute_force(records: List[DetectionRecord]) -> Optional[int]:
    """
    Bob's decision rule after testing one split pulse per basis.

    A basis where both outputs fired is excluded. Identification succeeds
    only when exactly one basis survives and its expected output fired
    while its other output stayed dark.

    Returns:
        The identified index, or None when the outcome is ambiguous
    """
    survivors = [i for i, r in enumerate(records) if not (r.main_click and r.spd_click)]
    if len(survivors) != 1:
        return None
    guess = survivors[0]
    return guess if records[guess].confirmed else None


def brute_force_trial(pulse: PolarizationPulse, params: ProtocolParams, rng: np.random.Generator) -> Optional[int]:
    """
    One brute-force attack on a captured pulse.

    The pulse is split into M pieces and piece i is measured in basis
    theta_i with ideal single-photon detectors on both outputs.
    """
    records = [
        measure(piece, MeasurementSetup(rotator_angle=state_angle(params, i)), rng)
        for i, piece in enumerate(pulse.split(params.M))
    ]
    return identify_by_brute_force(records)


def simulate_brute_force_attack(
    params: ProtocolParams,
    cfg: SimConfig,
    mean_photons: Optional[float] = None,
) -> MonteCarloEstimate:
    """
    Monte Carlo estimate of the brute-force identification probability.

    Vectorized form of brute_force_trial: Alice's choice is drawn from the
    prior, every basis sees <n>/M photons, detectors are ideal.

    Args:
        params: Protocol parameters
        cfg: Simulation config
        mean_photons: Override of the derived <n>

    Returns:
        Estimate of the probability that Bob names Alice's state correctly
    """
    n = params.mean_photons if mean_photons is None else mean_photons
    M = params.M
    per_piece = n / M
    theta = np.array(params.angles)
    prior = np.array(params.prior)
    logger.info(f"Brute-force attack: M={M}, <n>={n:.6g}, trials={cfg.trials}")

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        choices = rng.choice(M, size=size, p=prior)
        delta = theta[choices][:, None] - theta[None, :]
        p_main = -np.expm1(-per_piece * np.cos(delta) ** 2)
        p_spd = -np.expm1(-per_piece * np.sin(delta) ** 2)

        u = rng.random((size, M, 2))
        main = u[..., 0] < p_main
        spd = u[..., 1] < p_spd

        survivors = ~(main & spd)
        unique = np.count_nonzero(survivors, axis=1) == 1
        guess = np.argmax(survivors, axis=1)
        rows = np.arange(size)
        identified = unique & main[rows, guess] & ~spd[rows, guess]
        correct = identified & (guess == choices)
        return np.array([np.count_nonzero(correct), np.count_nonzero(identified & ~correct)])

    correct, wrong = run_chunks(cfg, kernel)
    if wrong:
        logger.warning(f"Brute-force attack named a wrong state in {wrong} trial(s)")
    return MonteCarloEstimate(int(correct), cfg.trials)


def simulate_cheating_alice(
    params: ProtocolParams,
    cfg: SimConfig,
    mean_photons: Optional[float] = None,
) -> MonteCarloEstimate:
    """
    Monte Carlo estimate of the neighbor-swap cheat.

    Alice sends theta_m and reveals theta_{m+1} (theta_{m-1} for the last
    state). Bob's rotator follows the reveal, his main detector has
    efficiency mu and his SPD is ideal.

    Returns:
        Estimate of the probability that Bob accepts the false reveal
    """
    n = params.mean_photons if mean_photons is None else mean_photons
    M = params.M
    theta = np.array(params.angles)
    prior = np.array(params.prior)
    logger.info(f"Cheating Alice: M={M}, <n>={n:.6g}, mu={params.mu}, trials={cfg.trials}")

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        sent = rng.choice(M, size=size, p=prior)
        revealed = np.where(sent + 1 < M, sent + 1, sent - 1)
        delta = theta[sent] - theta[revealed]
        p_main = -np.expm1(-params.mu * n * np.cos(delta) ** 2)
        p_spd = -np.expm1(-n * np.sin(delta) ** 2)

        u = rng.random((size, 2))
        accepted = (u[:, 0] < p_main) & ~(u[:, 1] < p_spd)
        return np.array([np.count_nonzero(accepted)])

    (accepted,) = run_chunks(cfg, kernel)
    return MonteCarloEstimate(int(accepted), cfg.trials)

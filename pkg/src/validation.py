"""
Monte Carlo validation pipeline.

Runs the photon-level simulator against the closed forms:
1. Brute-force identification probability
2. Neighbor-swap cheat probability
3. Honest acceptance rate
and flags each comparison PASS/FAIL at a fixed number of binomial sigmas.
"""

import logging
from dataclasses import dataclass, asdict
from typing import Any, Dict, List

from .exceptions import DomainError
from .photon_sim import (
    MonteCarloEstimate,
    SimConfig,
    simulate_brute_force_attack,
    simulate_cheating_alice,
    simulate_honest_verification,
)
from .polarization import ProtocolParams, check_choice
from .security_metrics import alice_cheat_probability, brute_force_probability, honest_accept_probability

logger = logging.getLogger(__name__)

MIN_TRIALS = 10_000
DEFAULT_SIGMAS = 3.0


@dataclass(frozen=True)
class ValidationRow:
    """Closed form against Monte Carlo for one quantity"""

    quantity: str
    closed_form: float
    monte_carlo: float
    std_error: float
    successes: int
    trials: int
    passed: bool

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["status"] = self.status
        return data


@dataclass(frozen=True)
class ValidationReport:
    params: ProtocolParams
    cfg: SimConfig
    rows: List[ValidationRow]

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)


class ValidationPipeline:
    """
    Cross-checks the closed-form metrics with independent simulations.
    """

    def __init__(
        self,
        params: ProtocolParams,
        cfg: SimConfig,
        sigmas: float = DEFAULT_SIGMAS,
        choice: int = 0,
        dark_count_prob: float = 0.0,
    ):
        """
        Initialize pipeline.

        Args:
            params: Protocol parameters
            cfg: Simulation config; trials must be at least 10^4
            sigmas: Agreement threshold in binomial standard errors
            choice: State index used for the honest sessions
            dark_count_prob: Dark count probability in the honest sessions

        Raises:
            DomainError: If cfg.trials is below the minimum or choice is not a state index
        """
        if cfg.trials < MIN_TRIALS:
            raise DomainError(f"validation needs at least {MIN_TRIALS} trials, got {cfg.trials}")
        self.params = params
        self.cfg = cfg
        self.sigmas = sigmas
        self.choice = check_choice(params, choice)
        self.dark_count_prob = dark_count_prob

    def _compare(self, quantity: str, expected: float, estimate: MonteCarloEstimate) -> ValidationRow:
        passed = estimate.agrees_with(expected, self.sigmas)
        row = ValidationRow(
            quantity=quantity,
            closed_form=expected,
            monte_carlo=estimate.rate,
            std_error=estimate.sigma(expected),
            successes=estimate.successes,
            trials=estimate.trials,
            passed=passed,
        )
        log = logger.info if passed else logger.warning
        log(f"{quantity}: closed form {expected:.6g}, Monte Carlo {estimate.rate:.6g} -> {row.status}")
        return row

    def run(self) -> ValidationReport:
        """
        Run all three comparisons.

        Returns:
            ValidationReport with one row per quantity
        """
        logger.info(f"Validating M={self.params.M}, rs1={self.params.rs1}, mu={self.params.mu} "
                    f"with {self.cfg.trials} trials (seed {self.cfg.seed})")
        rows = []

        logger.info("Step 1: Brute-force attack")
        rows.append(self._compare(
            "p_b",
            brute_force_probability(self.params),
            simulate_brute_force_attack(self.params, self.cfg),
        ))

        logger.info("Step 2: Neighbor-swap cheat")
        rows.append(self._compare(
            "p_a",
            alice_cheat_probability(self.params),
            simulate_cheating_alice(self.params, self.cfg),
        ))

        logger.info("Step 3: Honest verification")
        accept, _ = simulate_honest_verification(
            self.params, self.choice, self.cfg, dark_count_prob=self.dark_count_prob
        )
        rows.append(self._compare(
            "honest_accept",
            honest_accept_probability(self.params, self.dark_count_prob),
            accept,
        ))

        report = ValidationReport(self.params, self.cfg, rows)
        logger.info(f"Validation {'passed' if report.all_passed else 'FAILED'}")
        return report

"""
Commit/reveal state machines.

Alice (committer) sends one pulse at the angle of her chosen state, then
reveals the index. Bob (verifier) stores the pulse untouched until the
reveal, sets his rotator to the revealed angle and measures:

    main click, SPD silent  -> CONFIRMED
    SPD click               -> SPD_CLICK (Alice lied)
    nothing                 -> NO_DETECTION (rejected; not enough light)

The quantum channel carries the pulse's classical description; quantum
behavior is confined to measurement sampling in photon_sim. A session is
owned by one caller at a time; messages are immutable values.
"""

import uuid
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DomainError, ProtocolOrderError
from .messages import MessageKind, ProtocolMessage, VerdictReason
from .photon_sim import MeasurementSetup, SimConfig, brute_force_trial, measure, run_chunks
from .polarization import PolarizationPulse, ProtocolParams, check_choice, state_angle

logger = logging.getLogger(__name__)

EXPECTED_ORDER = (MessageKind.COMMIT_PULSE, MessageKind.REVEAL, MessageKind.VERDICT)


class Phase(Enum):
    AWAIT_COMMIT = "AWAIT_COMMIT"
    COMMITTED = "COMMITTED"
    REVEALED = "REVEALED"
    CLOSED = "CLOSED"


NEXT_PHASE = {
    Phase.AWAIT_COMMIT: Phase.COMMITTED,
    Phase.COMMITTED: Phase.REVEALED,
    Phase.REVEALED: Phase.CLOSED,
}


class StrategyKind(Enum):
    HONEST = "honest"
    NEIGHBOR_CHEAT = "neighbor_cheat"
    UNDERPOWER = "underpower"


@dataclass(frozen=True)
class AliceStrategy:
    """
    How Alice plays a session.

    Attributes:
        kind: HONEST, NEIGHBOR_CHEAT (reveal a neighbor of the sent state)
            or UNDERPOWER (send fewer photons than agreed)
        factor: Photon-number scale for UNDERPOWER, in (0, 1)
    """

    kind: StrategyKind = StrategyKind.HONEST
    factor: float = 1.0

    def __post_init__(self):
        if self.kind == StrategyKind.UNDERPOWER:
            if not 0.0 < self.factor < 1.0:
                raise DomainError(f"underpower factor must lie in (0, 1), got {self.factor}")
        elif self.factor != 1.0:
            raise DomainError("factor only applies to the underpower strategy")

    @classmethod
    def parse(cls, text: str) -> "AliceStrategy":
        """
        Parse "honest", "neighbor_cheat" or "underpower:<factor>".

        Raises:
            DomainError: On unknown names or bad factors
        """
        name, _, arg = text.strip().lower().partition(":")
        try:
            kind = StrategyKind(name.replace("-", "_"))
        except ValueError:
            valid = ", ".join(k.value for k in StrategyKind)
            raise DomainError(f"unknown strategy {text!r}; expected one of {valid}")
        if kind == StrategyKind.UNDERPOWER:
            try:
                return cls(kind, float(arg) if arg else 0.5)
            except ValueError:
                raise DomainError(f"invalid underpower factor {arg!r}")
        if arg:
            raise DomainError(f"strategy {name!r} takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        if self.kind == StrategyKind.UNDERPOWER:
            return f"{self.kind.value}:{self.factor:g}"
        return self.kind.value


HONEST = AliceStrategy(StrategyKind.HONEST)
NEIGHBOR_CHEAT = AliceStrategy(StrategyKind.NEIGHBOR_CHEAT)


def underpower(factor: float) -> AliceStrategy:
    return AliceStrategy(StrategyKind.UNDERPOWER, factor)


@dataclass(frozen=True)
class VerifierPolicy:
    """
    Bob's receiver settings.

    Attributes:
        dark_count_prob: Dark count probability of both detectors
        spd_efficiency: SPD efficiency
        power_check: Reject pulses below the agreed photon number before
            measuring (intensity monitor); off by default, in which case
            weak pulses are caught statistically as NO_DETECTION
        power_tolerance: Relative shortfall tolerated by the power check
    """

    dark_count_prob: float = 0.0
    spd_efficiency: float = 1.0
    power_check: bool = False
    power_tolerance: float = 0.05


@dataclass(frozen=True)
class SessionState:
    """Bob's view of one session"""

    params: ProtocolParams
    session_id: uuid.UUID
    phase: Phase = Phase.AWAIT_COMMIT
    stored_pulse: Optional[PolarizationPulse] = None
    transcript: Tuple[ProtocolMessage, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if (self.stored_pulse is None) != (self.phase == Phase.AWAIT_COMMIT):
            raise ProtocolOrderError(f"stored pulse inconsistent with phase {self.phase.value}")

    def advance(self, message: ProtocolMessage, **changes) -> "SessionState":
        """Move to the next phase, appending `message` to the transcript."""
        if self.phase not in NEXT_PHASE:
            raise ProtocolOrderError(f"session {self.session_id.hex} is already closed")
        return replace(
            self,
            phase=NEXT_PHASE[self.phase],
            transcript=self.transcript + (message,),
            **changes,
        )


@dataclass(frozen=True)
class SessionResult:
    """Outcome of an end-to-end session"""

    transcript: Tuple[ProtocolMessage, ...]
    state: SessionState
    bob_guess: Optional[int] = None

    @property
    def verdict(self) -> ProtocolMessage:
        return self.transcript[-1]

    @property
    def reason(self) -> VerdictReason:
        return self.verdict.payload.reason

    @property
    def confirmed(self) -> bool:
        return self.verdict.payload.accepted


def new_session(params: ProtocolParams, session_id: Optional[uuid.UUID] = None) -> SessionState:
    return SessionState(params=params, session_id=session_id or uuid.uuid4())


def alice_commit(
    params: ProtocolParams,
    choice: int,
    strategy: AliceStrategy = HONEST,
    session_id: Optional[uuid.UUID] = None,
) -> ProtocolMessage:
    """
    Build Alice's COMMIT_PULSE message.

    Args:
        params: Protocol parameters
        choice: Index of the state actually sent
        strategy: Alice's strategy; UNDERPOWER scales the photon number
        session_id: Session identifier (random when None)

    Returns:
        Commit message carrying the pulse
    """
    choice = check_choice(params, choice)
    pulse = PolarizationPulse(params.mean_photons, state_angle(params, choice))
    if strategy.kind == StrategyKind.UNDERPOWER:
        pulse = pulse.scaled(strategy.factor)
    return ProtocolMessage.commit(session_id or uuid.uuid4(), pulse)


def claimed_choice(params: ProtocolParams, choice: int, strategy: AliceStrategy) -> int:
    """Index Alice will reveal; a cheating Alice names the upper neighbor when it exists."""
    choice = check_choice(params, choice)
    if strategy.kind != StrategyKind.NEIGHBOR_CHEAT:
        return choice
    return choice + 1 if choice + 1 < params.M else choice - 1


def alice_reveal(
    params: ProtocolParams,
    choice: int,
    strategy: AliceStrategy,
    session_id: uuid.UUID,
) -> ProtocolMessage:
    """Build Alice's REVEAL message for the state she committed to."""
    return ProtocolMessage.reveal(session_id, claimed_choice(params, choice, strategy))


def _expect(state: SessionState, message: ProtocolMessage, phase: Phase, kind: MessageKind) -> None:
    if state.phase != phase:
        raise ProtocolOrderError(
            f"{message.kind.name} received in phase {state.phase.value}; expected {kind.name} in {phase.value}"
        )
    if message.kind != kind:
        raise ProtocolOrderError(f"expected {kind.name} in phase {phase.value}, got {message.kind.name}")
    if message.session_id != state.session_id:
        raise ProtocolOrderError(
            f"message for session {message.session_id.hex} sent to session {state.session_id.hex}"
        )


def bob_receive_commit(state: SessionState, message: ProtocolMessage) -> SessionState:
    """
    Store the committed pulse in Bob's quantum memory without measuring it.

    Raises:
        ProtocolOrderError: Unless the session awaits a COMMIT_PULSE
    """
    _expect(state, message, Phase.AWAIT_COMMIT, MessageKind.COMMIT_PULSE)
    logger.debug(f"Session {state.session_id.hex}: pulse stored")
    return state.advance(message, stored_pulse=message.payload.pulse)


def bob_verify(
    state: SessionState,
    reveal: ProtocolMessage,
    rng: np.random.Generator,
    policy: Optional[VerifierPolicy] = None,
) -> Tuple[SessionState, ProtocolMessage]:
    """
    Measure the stored pulse in the revealed basis and issue a verdict.

    Args:
        state: Session in phase COMMITTED
        reveal: Alice's REVEAL message
        rng: Random stream for the measurement
        policy: Receiver settings

    Returns:
        (closed session, VERDICT message)

    Raises:
        ProtocolOrderError: Unless the session is COMMITTED and the message is a REVEAL
        DomainError: If the revealed index is outside [0, M)
    """
    _expect(state, reveal, Phase.COMMITTED, MessageKind.REVEAL)
    policy = policy or VerifierPolicy()
    params = state.params
    angle = state_angle(params, reveal.payload.choice_index)
    state = state.advance(reveal)

    pulse = state.stored_pulse
    if policy.power_check and pulse.mean_photons < params.mean_photons * (1.0 - policy.power_tolerance):
        reason = VerdictReason.UNDERPOWERED
    else:
        setup = MeasurementSetup(
            rotator_angle=angle,
            main_detector_efficiency=params.mu,
            spd_efficiency=policy.spd_efficiency,
            dark_count_prob=policy.dark_count_prob,
        )
        record = measure(pulse, setup, rng)
        if record.spd_click:
            reason = VerdictReason.SPD_CLICK
        elif record.main_click:
            reason = VerdictReason.CONFIRMED
        else:
            reason = VerdictReason.NO_DETECTION

    verdict = ProtocolMessage.verdict(state.session_id, reason)
    logger.debug(f"Session {state.session_id.hex}: verdict {reason.name}")
    return state.advance(verdict), verdict


def bob_brute_force(state: SessionState, rng: np.random.Generator) -> Tuple[SessionState, Optional[int]]:
    """
    Dishonest Bob: attack the stored pulse before the reveal.

    The pulse is consumed by the measurement, so the later verification
    only sees vacuum.

    Returns:
        (session with an empty memory, identified index or None)
    """
    if state.phase != Phase.COMMITTED:
        raise ProtocolOrderError(f"brute-force attack needs a stored pulse, phase is {state.phase.value}")
    guess = brute_force_trial(state.stored_pulse, state.params, rng)
    return replace(state, stored_pulse=state.stored_pulse.scaled(0.0)), guess


def validate_transcript(messages: Sequence[ProtocolMessage]) -> None:
    """
    Check that a transcript is exactly COMMIT_PULSE, REVEAL, VERDICT of one session.

    Raises:
        ProtocolOrderError: Otherwise
    """
    kinds = tuple(m.kind for m in messages)
    if kinds != EXPECTED_ORDER:
        names = ", ".join(k.name for k in kinds) or "nothing"
        raise ProtocolOrderError(f"transcript must be COMMIT_PULSE, REVEAL, VERDICT; got {names}")
    if len({m.session_id for m in messages}) != 1:
        raise ProtocolOrderError("transcript mixes session ids")


def _play(
    params: ProtocolParams,
    strategy: AliceStrategy,
    choice: int,
    rng: np.random.Generator,
    policy: Optional[VerifierPolicy],
    bob_attack: bool,
) -> SessionResult:
    session_id = uuid.UUID(bytes=rng.bytes(16))
    state = new_session(params, session_id)
    state = bob_receive_commit(state, alice_commit(params, choice, strategy, session_id))

    guess = None
    if bob_attack:
        state, guess = bob_brute_force(state, rng)

    state, _ = bob_verify(state, alice_reveal(params, choice, strategy, session_id), rng, policy)
    return SessionResult(transcript=state.transcript, state=state, bob_guess=guess)


def run_session(
    params: ProtocolParams,
    strategy: AliceStrategy,
    choice: int,
    cfg: SimConfig,
    policy: Optional[VerifierPolicy] = None,
    bob_attack: bool = False,
) -> SessionResult:
    """
    Play one full session.

    The session id and every measurement are drawn from a stream seeded by
    cfg.seed, so equal seeds give bit-identical transcripts.

    Args:
        params: Protocol parameters
        strategy: Alice's strategy
        choice: Index of the state Alice sends
        cfg: Simulation config (only the seed is used)
        policy: Bob's receiver settings
        bob_attack: Bob runs the brute-force attack before the reveal

    Returns:
        SessionResult with the three-message transcript
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    result = _play(params, strategy, choice, rng, policy, bob_attack)
    logger.info(f"Session {result.state.session_id.hex} ({strategy}): {result.reason.name}")
    return result


def run_sessions(
    params: ProtocolParams,
    strategy: AliceStrategy,
    choice: Optional[int],
    cfg: SimConfig,
    policy: Optional[VerifierPolicy] = None,
) -> Dict[VerdictReason, int]:
    """
    Play cfg.trials independent sessions and tally the verdicts.

    Args:
        choice: Fixed state index, or None to draw it from the prior per session

    Returns:
        Count per verdict reason (every reason present, possibly 0)
    """
    prior = np.array(params.prior)
    reasons = list(VerdictReason)
    logger.info(f"Running {cfg.trials} session(s): M={params.M}, strategy={strategy}")

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        tally: Counter = Counter()
        for _ in range(size):
            pick = int(rng.choice(params.M, p=prior)) if choice is None else choice
            tally[_play(params, strategy, pick, rng, policy, False).reason] += 1
        return np.array([tally[r] for r in reasons])

    counts = run_chunks(cfg, kernel)
    return {reason: int(count) for reason, count in zip(reasons, counts)}

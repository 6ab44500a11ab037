"""
Protocol messages and their encodings.

Binary layout (little-endian):

    kind      1 byte   1 = COMMIT_PULSE, 2 = REVEAL, 3 = VERDICT
    session  16 bytes  UUID bytes
    payload            COMMIT_PULSE: mean_photons f64, angle f64
                       REVEAL:       choice_index u32
                       VERDICT:      accepted u8 (0/1), reason u8

The JSON mirror is one object per message: kind name, session id as hex
and a payload object. Transcripts are JSON Lines of these objects.
"""

import math
import struct
import uuid
import logging
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from .exceptions import DomainError, MessageDecodeError
from .polarization import HALF_PI, PolarizationPulse
from .utils import jsonl_line, read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

HEADER = struct.Struct("<B16s")
COMMIT_BODY = struct.Struct("<dd")
REVEAL_BODY = struct.Struct("<I")
VERDICT_BODY = struct.Struct("<BB")


class MessageKind(IntEnum):
    COMMIT_PULSE = 1
    REVEAL = 2
    VERDICT = 3


class VerdictReason(IntEnum):
    CONFIRMED = 0
    SPD_CLICK = 1
    NO_DETECTION = 2
    UNDERPOWERED = 3


@dataclass(frozen=True)
class CommitPayload:
    """Classical description of the transmitted pulse"""

    mean_photons: float
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.mean_photons) or self.mean_photons < 0:
            raise DomainError(f"mean_photons must be finite and >= 0, got {self.mean_photons}")
        if not 0.0 <= self.angle <= HALF_PI:
            raise DomainError(f"angle must lie in [0, pi/2], got {self.angle}")

    @property
    def pulse(self) -> PolarizationPulse:
        return PolarizationPulse(self.mean_photons, self.angle)


@dataclass(frozen=True)
class RevealPayload:
    choice_index: int

    def __post_init__(self):
        if isinstance(self.choice_index, bool) or not isinstance(self.choice_index, int):
            raise DomainError(f"choice_index must be an integer, got {self.choice_index!r}")
        if not 0 <= self.choice_index < 2 ** 32:
            raise DomainError(f"choice_index out of range: {self.choice_index}")


@dataclass(frozen=True)
class VerdictPayload:
    accepted: bool
    reason: VerdictReason

    def __post_init__(self):
        if self.accepted != (self.reason == VerdictReason.CONFIRMED):
            raise DomainError(f"accepted={self.accepted} contradicts reason {self.reason.name}")


Payload = Union[CommitPayload, RevealPayload, VerdictPayload]

PAYLOAD_TYPES = {
    MessageKind.COMMIT_PULSE: CommitPayload,
    MessageKind.REVEAL: RevealPayload,
    MessageKind.VERDICT: VerdictPayload,
}


@dataclass(frozen=True)
class ProtocolMessage:
    """One immutable message exchanged between Alice and Bob"""

    kind: MessageKind
    session_id: uuid.UUID
    payload: Payload

    def __post_init__(self):
        expected = PAYLOAD_TYPES[self.kind]
        if not isinstance(self.payload, expected):
            raise DomainError(f"{self.kind.name} needs a {expected.__name__}, got {type(self.payload).__name__}")

    @classmethod
    def commit(cls, session_id: uuid.UUID, pulse: PolarizationPulse) -> "ProtocolMessage":
        return cls(MessageKind.COMMIT_PULSE, session_id, CommitPayload(pulse.mean_photons, pulse.angle))

    @classmethod
    def reveal(cls, session_id: uuid.UUID, choice_index: int) -> "ProtocolMessage":
        return cls(MessageKind.REVEAL, session_id, RevealPayload(int(choice_index)))

    @classmethod
    def verdict(cls, session_id: uuid.UUID, reason: VerdictReason) -> "ProtocolMessage":
        return cls(MessageKind.VERDICT, session_id, VerdictPayload(reason == VerdictReason.CONFIRMED, reason))

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == MessageKind.COMMIT_PULSE:
            payload = {"mean_photons": self.payload.mean_photons, "angle": self.payload.angle}
        elif self.kind == MessageKind.REVEAL:
            payload = {"choice_index": self.payload.choice_index}
        else:
            payload = {"accepted": self.payload.accepted, "reason": self.payload.reason.name}
        return {"kind": self.kind.name, "session_id": self.session_id.hex, "payload": payload}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProtocolMessage":
        """
        Parse the JSON mirror of a message.

        Raises:
            MessageDecodeError: On missing fields, unknown names or bad values
        """
        try:
            kind = MessageKind[data["kind"]]
            session_id = uuid.UUID(hex=data["session_id"])
            body = data["payload"]
            if kind == MessageKind.COMMIT_PULSE:
                payload = CommitPayload(float(body["mean_photons"]), float(body["angle"]))
            elif kind == MessageKind.REVEAL:
                payload = RevealPayload(body["choice_index"])
            else:
                payload = VerdictPayload(bool(body["accepted"]), VerdictReason[body["reason"]])
            return cls(kind, session_id, payload)
        except (KeyError, TypeError, ValueError) as e:
            raise MessageDecodeError(f"Invalid message object {data!r}: {e}")


def encode_message(message: ProtocolMessage) -> bytes:
    """Encode a message in the canonical binary layout."""
    header = HEADER.pack(int(message.kind), message.session_id.bytes)
    payload = message.payload
    if message.kind == MessageKind.COMMIT_PULSE:
        body = COMMIT_BODY.pack(payload.mean_photons, payload.angle)
    elif message.kind == MessageKind.REVEAL:
        body = REVEAL_BODY.pack(payload.choice_index)
    else:
        body = VERDICT_BODY.pack(int(payload.accepted), int(payload.reason))
    return header + body


BODY_FORMATS = {
    MessageKind.COMMIT_PULSE: COMMIT_BODY,
    MessageKind.REVEAL: REVEAL_BODY,
    MessageKind.VERDICT: VERDICT_BODY,
}


def decode_message(data: bytes) -> ProtocolMessage:
    """
    Decode canonical binary bytes.

    Raises:
        MessageDecodeError: On unknown kind, wrong length or invalid field values
    """
    if len(data) < HEADER.size:
        raise MessageDecodeError(f"message too short: {len(data)} bytes")
    raw_kind, raw_session = HEADER.unpack_from(data)
    try:
        kind = MessageKind(raw_kind)
    except ValueError:
        raise MessageDecodeError(f"unknown message kind {raw_kind}")

    body_format = BODY_FORMATS[kind]
    if len(data) != HEADER.size + body_format.size:
        raise MessageDecodeError(
            f"{kind.name} must be {HEADER.size + body_format.size} bytes, got {len(data)}"
        )
    fields = body_format.unpack_from(data, HEADER.size)

    try:
        if kind == MessageKind.COMMIT_PULSE:
            payload = CommitPayload(*fields)
        elif kind == MessageKind.REVEAL:
            payload = RevealPayload(fields[0])
        else:
            accepted, reason = fields
            if accepted not in (0, 1):
                raise DomainError(f"accepted flag must be 0 or 1, got {accepted}")
            payload = VerdictPayload(bool(accepted), VerdictReason(reason))
    except ValueError as e:
        raise MessageDecodeError(f"invalid {kind.name} payload: {e}")
    return ProtocolMessage(kind, uuid.UUID(bytes=raw_session), payload)


def format_transcript(messages: Sequence[ProtocolMessage]) -> str:
    """Render a transcript as JSON Lines text."""
    return "".join(jsonl_line(m.to_dict()) for m in messages)


def write_transcript(messages: Sequence[ProtocolMessage], filepath: Path) -> None:
    """Write a transcript as JSON Lines."""
    write_jsonl((m.to_dict() for m in messages), filepath)


def read_transcript(filepath: Path) -> List[ProtocolMessage]:
    """Read a JSON Lines transcript."""
    try:
        records = read_jsonl(filepath)
    except ValueError as e:
        raise MessageDecodeError(f"{filepath}: {e}")
    return [ProtocolMessage.from_dict(r) for r in records]

"""Heartbeat and poll based failure detection between neighboring FLSs.

Each FLS runs one detector against its display-mesh neighbors.  It emits
a heartbeat every period; a neighbor silent past the timeout becomes
suspect and is polled, and after ``max_polls`` unanswered polls it is
declared failed, once, with a notification addressed to the remaining
neighbors and the orchestrator.  Rotor and light-source failures are
self-detectable and bypass the heartbeat path entirely.

All times are integer milliseconds; ticks may arrive at any granularity
as long as time is monotone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .model import FlsAgent

ORCHESTRATOR = -1  # recipient id for the hub/orchestrator


@dataclass(frozen=True)
class DetectorParams:
    heartbeat_period_ms: int = 1000
    heartbeat_timeout_ms: int = 1500
    max_polls: int = 3
    poll_spacing_ms: int = 500

    def __post_init__(self):
        if self.heartbeat_period_ms <= 0 or self.poll_spacing_ms <= 0:
            raise ValueError("heartbeat period and poll spacing must be positive")
        if self.heartbeat_timeout_ms < self.heartbeat_period_ms:
            raise ValueError("timeout below the heartbeat period would suspect live neighbors")
        if self.max_polls < 1:
            raise ValueError("at least one poll is required before declaring failure")

    @property
    def declaration_delay_ms(self) -> int:
        """Worst-case lag from a neighbor's last heartbeat to its declaration."""
        return self.heartbeat_timeout_ms + self.max_polls * self.poll_spacing_ms


class NeighborStatus(enum.Enum):
    ALIVE = "alive"
    SUSPECT = "suspect"
    DECLARED_FAILED = "declared_failed"


class FailureKind(enum.Enum):
    ROTOR = "rotor"
    LIGHT = "light"
    COMPUTE = "compute"
    BATTERY = "battery"

    @property
    def self_detectable(self) -> bool:
        return self in (FailureKind.ROTOR, FailureKind.LIGHT)


# -- messages -----------------------------------------------------------

@dataclass(frozen=True)
class Heartbeat:
    sender: int
    recipient: int


@dataclass(frozen=True)
class Poll:
    sender: int
    recipient: int


@dataclass(frozen=True)
class PollReply:
    sender: int
    recipient: int


@dataclass(frozen=True)
class FailureNotice:
    """Identity of a failed FLS, for the neighbors and the orchestrator."""

    subject: int
    reporter: int
    recipient: int
    kind: FailureKind | None = None


@dataclass(frozen=True)
class RepelBroadcast:
    """Periodic keep-away message from a rotor-failed FLS during descent."""

    sender: int


# -- directives returned by on_self_failure ------------------------------

@dataclass(frozen=True)
class FlyToTerminus:
    fls_id: int


@dataclass(frozen=True)
class ControlledDescent:
    fls_id: int
    broadcast_period_ms: int = 500


@dataclass
class _NeighborRecord:
    last_heartbeat_ms: int
    status: NeighborStatus = NeighborStatus.ALIVE
    poll_attempts: int = 0
    next_poll_due_ms: int | None = None


@dataclass
class DetectorState:
    """Per-FLS detector. Single-owner: only the owner's event loop touches it."""

    owner_id: int
    params: DetectorParams = field(default_factory=DetectorParams)
    neighbors: dict[int, _NeighborRecord] = field(default_factory=dict)
    _next_heartbeat_ms: int = 0

    def add_neighbor(self, neighbor_id: int, now_ms: int) -> None:
        self.neighbors[neighbor_id] = _NeighborRecord(last_heartbeat_ms=now_ms)

    def reset_neighbor(self, neighbor_id: int, now_ms: int) -> None:
        """Re-arm the entry after the orchestrator confirms a replacement."""
        self.add_neighbor(neighbor_id, now_ms)

    def on_tick(self, now_ms: int) -> list:
        """Advance to ``now_ms``; returns the messages to transmit.

        Emits due heartbeats, turns overdue neighbors into suspects, walks
        the poll ladder, and declares a neighbor failed exactly once after
        the final poll goes unanswered.
        """
        out: list = []
        p = self.params
        while self._next_heartbeat_ms <= now_ms:
            for neighbor_id in self.neighbors:
                out.append(Heartbeat(sender=self.owner_id, recipient=neighbor_id))
            self._next_heartbeat_ms += p.heartbeat_period_ms

        for neighbor_id, rec in self.neighbors.items():
            if rec.status is NeighborStatus.ALIVE:
                if now_ms - rec.last_heartbeat_ms >= p.heartbeat_timeout_ms:
                    rec.status = NeighborStatus.SUSPECT
                    rec.poll_attempts = 1
                    rec.next_poll_due_ms = (
                        rec.last_heartbeat_ms + p.heartbeat_timeout_ms + p.poll_spacing_ms
                    )
                    out.append(Poll(sender=self.owner_id, recipient=neighbor_id))
            if rec.status is NeighborStatus.SUSPECT:
                while rec.next_poll_due_ms is not None and now_ms >= rec.next_poll_due_ms:
                    if rec.poll_attempts >= p.max_polls:
                        rec.status = NeighborStatus.DECLARED_FAILED
                        rec.next_poll_due_ms = None
                        out.extend(self._notices(neighbor_id))
                        break
                    rec.poll_attempts += 1
                    rec.next_poll_due_ms += p.poll_spacing_ms
                    out.append(Poll(sender=self.owner_id, recipient=neighbor_id))
        return out

    def on_heartbeat(self, msg: Heartbeat, now_ms: int) -> None:
        self._record_alive(msg.sender, now_ms)

    def on_poll(self, msg: Poll, now_ms: int) -> PollReply:
        """A poll also proves the poller is alive."""
        self._record_alive(msg.sender, now_ms)
        return PollReply(sender=self.owner_id, recipient=msg.sender)

    def on_poll_reply(self, msg: PollReply, now_ms: int) -> None:
        self._record_alive(msg.sender, now_ms)

    def predict_declaration_ms(self, last_heartbeat_ms: int) -> int:
        """Closed-form declaration time for a neighbor silent after its last heartbeat."""
        return last_heartbeat_ms + self.params.declaration_delay_ms

    def _record_alive(self, sender: int, now_ms: int) -> None:
        rec = self.neighbors.get(sender)
        if rec is None or rec.status is NeighborStatus.DECLARED_FAILED:
            # a declared entry stays down until the orchestrator resets it
            return
        rec.last_heartbeat_ms = now_ms
        rec.status = NeighborStatus.ALIVE
        rec.poll_attempts = 0
        rec.next_poll_due_ms = None

    def _notices(self, failed_id: int) -> list[FailureNotice]:
        notices = [
            FailureNotice(subject=failed_id, reporter=self.owner_id, recipient=n)
            for n in self.neighbors
            if n != failed_id
        ]
        notices.append(
            FailureNotice(subject=failed_id, reporter=self.owner_id, recipient=ORCHESTRATOR)
        )
        return notices


def on_self_failure(kind: FailureKind, fls: FlsAgent, neighbor_ids=()) -> tuple[list, object]:
    """Behavior of an FLS that has just detected its own failure.

    A dead light source leaves the FLS flight-capable, so it heads to a
    terminus at once; a dead rotor forces a descent during which it
    repeatedly broadcasts failed messages to repel the FLSs below it.
    Either way the neighbors and the orchestrator are told immediately.
    Already-failed agents do nothing.
    """
    from .model import Role

    if fls.role is Role.FAILED:
        return [], None
    messages: list = [
        FailureNotice(subject=fls.id, reporter=fls.id, recipient=n, kind=kind)
        for n in neighbor_ids
    ]
    messages.append(
        FailureNotice(subject=fls.id, reporter=fls.id, recipient=ORCHESTRATOR, kind=kind)
    )
    if kind is FailureKind.LIGHT:
        return messages, FlyToTerminus(fls_id=fls.id)
    if kind is FailureKind.ROTOR:
        messages.append(RepelBroadcast(sender=fls.id))
        return messages, ControlledDescent(fls_id=fls.id)
    raise ValueError(f"{kind} is not self-detectable; it is found via heartbeats")

"""Independent oracles used by the test suite.

These deliberately avoid the library's own code paths: the partition
oracle enumerates every admissible grouping, and the detector harness
drives the heartbeat state machine with an explicit message bus.
"""

from __future__ import annotations

import itertools
import math


def pairwise_total(points, group) -> float:
    return sum(math.dist(points[a], points[b]) for a, b in itertools.combinations(group, 2))


def best_partition_cost(points, g: int) -> float:
    """Minimum total intra-group distance over all partitions of the points
    into ceil(n/g) non-empty groups of size at most g (exhaustive)."""
    n = len(points)
    if n == 0:
        return 0.0
    group_count = -(-n // g)
    best = [math.inf]

    def rec(i: int, groups: list[list[int]]):
        if i == n:
            if len(groups) == group_count:
                best[0] = min(best[0], sum(pairwise_total(points, grp) for grp in groups))
            return
        for grp in groups:
            if len(grp) < g:
                grp.append(i)
                rec(i + 1, groups)
                grp.pop()
        if len(groups) < group_count:
            groups.append([i])
            rec(i + 1, groups)
            groups.pop()

    rec(0, [])
    return best[0]


class DetectorHarness:
    """Drives two detectors over a shared instantaneous message bus.

    The observer watches the subject; the subject answers heartbeats and
    polls until it crashes at ``crash_ms``, after which it is silent.
    """

    def __init__(self, params, crash_ms: int | None):
        from flsim.failure_detect import DetectorState

        self.params = params
        self.observer = DetectorState(owner_id=0, params=params)
        self.subject = DetectorState(owner_id=1, params=params)
        self.observer.add_neighbor(1, 0)
        self.subject.add_neighbor(0, 0)
        self.crash_ms = crash_ms
        self.declared_at: int | None = None
        self.notices = []

    def run(self, until_ms: int, tick_ms: int = 100):
        from flsim.failure_detect import FailureNotice, Heartbeat, Poll, PollReply

        for now in range(0, until_ms + 1, tick_ms):
            out = list(self.observer.on_tick(now))
            if self.crash_ms is None or now < self.crash_ms:
                out.extend(self.subject.on_tick(now))
            # deliver instantly, letting replies flow within the same tick
            pending = out
            while pending:
                msg, pending = pending[0], pending[1:]
                alive_subject = self.crash_ms is None or now < self.crash_ms
                if isinstance(msg, Heartbeat):
                    if msg.recipient == 0:
                        self.observer.on_heartbeat(msg, now)
                    elif alive_subject:
                        self.subject.on_heartbeat(msg, now)
                elif isinstance(msg, Poll):
                    if msg.recipient == 1 and alive_subject:
                        pending = pending + [self.subject.on_poll(msg, now)]
                    elif msg.recipient == 0:
                        pending = pending + [self.observer.on_poll(msg, now)]
                elif isinstance(msg, PollReply):
                    if msg.recipient == 0:
                        self.observer.on_poll_reply(msg, now)
                    elif alive_subject:
                        self.subject.on_poll_reply(msg, now)
                elif isinstance(msg, FailureNotice):
                    if msg.reporter == 0 and self.declared_at is None:
                        self.declared_at = now
                    self.notices.append(msg)
        return self.declared_at

import random

import pytest

from flsim.failure_detect import (
    ControlledDescent,
    DetectorParams,
    DetectorState,
    FailureKind,
    FailureNotice,
    FlyToTerminus,
    Heartbeat,
    NeighborStatus,
    Poll,
    PollReply,
    RepelBroadcast,
    ORCHESTRATOR,
    on_self_failure,
)
from flsim.model import FlsAgent, Role
from oracles import DetectorHarness


def test_default_declaration_delay():
    p = DetectorParams()
    assert p.declaration_delay_ms == 1500 + 3 * 500


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(heartbeat_timeout_ms=500, heartbeat_period_ms=1000)
    with pytest.raises(ValueError):
        DetectorParams(max_polls=0)


def test_handshake_keeps_neighbor_alive_forever():
    harness = DetectorHarness(DetectorParams(), crash_ms=None)
    assert harness.run(20_000) is None
    assert harness.observer.neighbors[1].status is NeighborStatus.ALIVE


def test_silent_neighbor_declared_on_schedule():
    # silence from t0=5000: suspect at 6500, polls at 6500/7000/7500,
    # declared at 8000 = t0 + timeout + max_polls*spacing
    state = DetectorState(owner_id=0)
    state.add_neighbor(7, 0)
    state.on_heartbeat(Heartbeat(sender=7, recipient=0), 5000)
    emitted = []
    for now in range(5000, 9001, 100):
        emitted += [(now, m) for m in state.on_tick(now)]
    polls = [(t, m) for t, m in emitted if isinstance(m, Poll)]
    notices = [(t, m) for t, m in emitted if isinstance(m, FailureNotice)]
    assert [t for t, _ in polls] == [6500, 7000, 7500]
    assert [t for t, _ in notices] == [8000]
    assert notices[0][1].recipient == ORCHESTRATOR
    assert state.neighbors[7].status is NeighborStatus.DECLARED_FAILED


def test_poll_reply_recovers_suspect():
    state = DetectorState(owner_id=0)
    state.add_neighbor(7, 0)
    state.on_tick(1600)  # past timeout: suspect, poll sent
    assert state.neighbors[7].status is NeighborStatus.SUSPECT
    state.on_poll_reply(PollReply(sender=7, recipient=0), 1700)
    assert state.neighbors[7].status is NeighborStatus.ALIVE
    assert state.neighbors[7].poll_attempts == 0
    # and no declaration later while heartbeats keep coming
    for now in range(1800, 6000, 100):
        state.on_heartbeat(Heartbeat(sender=7, recipient=0), now)
        for msg in state.on_tick(now):
            assert not isinstance(msg, FailureNotice)


def test_single_notice_per_failure():
    state = DetectorState(owner_id=0)
    state.add_neighbor(7, 0)
    notices = []
    for now in range(0, 20_000, 50):
        notices += [m for m in state.on_tick(now) if isinstance(m, FailureNotice)]
    assert len(notices) == 1
    # declared state is absorbing until the orchestrator resets it
    state.on_heartbeat(Heartbeat(sender=7, recipient=0), 20_050)
    assert state.neighbors[7].status is NeighborStatus.DECLARED_FAILED
    state.reset_neighbor(7, 21_000)
    assert state.neighbors[7].status is NeighborStatus.ALIVE


def test_randomized_schedules_bounded_latency_no_false_positives():
    rng = random.Random(99)
    for _ in range(100):
        tick = 100
        period = tick * rng.randint(1, 10)
        timeout = period + tick * rng.randint(1, 10)
        spacing = tick * rng.randint(1, 6)
        polls = rng.randint(1, 5)
        params = DetectorParams(
            heartbeat_period_ms=period,
            heartbeat_timeout_ms=timeout,
            max_polls=polls,
            poll_spacing_ms=spacing,
        )
        crash = tick * rng.randint(1, 80)
        harness = DetectorHarness(params, crash_ms=crash)
        bound_horizon = crash + timeout + polls * spacing + 4 * period
        declared = harness.run(bound_horizon, tick_ms=tick)
        last_hb = ((crash - 1) // period) * period if crash > 0 else 0
        assert declared is not None
        assert declared <= last_hb + params.declaration_delay_ms
        # a responsive twin with the same schedule is never declared
        alive = DetectorHarness(params, crash_ms=None)
        assert alive.run(bound_horizon, tick_ms=tick) is None


def test_self_failure_light_source():
    fls = FlsAgent(id=4, role=Role.ILLUMINATING)
    messages, directive = on_self_failure(FailureKind.LIGHT, fls, neighbor_ids=[1, 2])
    assert isinstance(directive, FlyToTerminus)
    recipients = {m.recipient for m in messages if isinstance(m, FailureNotice)}
    assert recipients == {1, 2, ORCHESTRATOR}


def test_self_failure_rotor_descends_with_repel():
    fls = FlsAgent(id=4, role=Role.ILLUMINATING)
    messages, directive = on_self_failure(FailureKind.ROTOR, fls)
    assert isinstance(directive, ControlledDescent)
    assert any(isinstance(m, RepelBroadcast) for m in messages)


def test_self_failure_idempotent_when_already_failed():
    fls = FlsAgent(id=4, role=Role.FAILED)
    messages, directive = on_self_failure(FailureKind.ROTOR, fls)
    assert messages == [] and directive is None


def test_self_failure_rejects_silent_kinds():
    fls = FlsAgent(id=4, role=Role.ILLUMINATING)
    with pytest.raises(ValueError):
        on_self_failure(FailureKind.COMPUTE, fls)

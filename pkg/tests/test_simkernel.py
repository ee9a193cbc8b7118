import math
import statistics

import pytest

from flsim.failure_detect import DetectorParams, FailureKind
from flsim.ingest import synth
from flsim.model import BatteryParams, ReliabilityParams
from flsim.simkernel import (
    DarknessLog,
    InfeasibleConfigError,
    SimConfig,
    degraded_onset_detector,
    inject_failures,
    mtdi_samples_ms,
    run,
    run_replications,
)

MIN = 60_000
HOUR = 3_600_000


def example_one_config(**overrides):
    base = dict(
        cloud=synth("grid", 5, 3),
        battery=BatteryParams(beta_s=900, omega_s=300),
        s_threshold_ms=180_000,
        fls_speed=1e9,  # tiny display, effectively instant travel
        horizon_ms=60 * MIN,
    )
    base.update(overrides)
    return SimConfig(**base)


# -- the steady-state charging relay ------------------------------------------


def test_example_one_swaps_every_three_minutes():
    metrics = run(example_one_config())
    expected = [k * 180_000 for k in range(1, 21)]
    assert metrics.swap_times_ms == expected
    assert metrics.min_illuminated == 5
    assert metrics.onset_times_ms == []
    assert set(metrics.swap_gap_samples_ms) == {0}


def test_example_one_stagger_restored_after_full_cycle():
    probes = tuple(15 * MIN + k * 180_000 + 90_000 for k in range(10))
    metrics = run(example_one_config(stagger_probe_ms=probes))
    assert len(metrics.stagger_probes) == 10
    for _, _, remaining in metrics.stagger_probes:
        diffs = [b - a for a, b in zip(remaining, remaining[1:])]
        assert all(abs(d - 180_000) <= 1 for d in diffs)


def test_zero_horizon_is_empty():
    metrics = run(example_one_config(horizon_ms=0))
    assert metrics.total_swaps == 0
    assert metrics.onset_times_ms == []
    assert metrics.empirical_mtdi_samples_ms == []


def test_transit_stays_within_two_per_flock():
    for alpha, s_thr in ((5, 180_000), (300, 4000), (300, 2000)):
        cloud = synth("grid", alpha, 7)
        cfg = SimConfig(
            cloud=cloud,
            battery=BatteryParams(beta_s=600, omega_s=60),
            s_threshold_ms=s_thr,
            horizon_ms=1_400_000,
        )
        metrics = run(cfg)
        assert metrics.conservation_failed == 0
        assert metrics.max_transit <= 2 * metrics.flock_count
        assert metrics.onset_times_ms == []


def test_conservation_checked_at_every_event():
    metrics = run(example_one_config())
    assert metrics.conservation_passed > 0
    assert metrics.conservation_failed == 0


def test_infeasible_charger_capacity_rejected():
    with pytest.raises(InfeasibleConfigError):
        run(example_one_config(charger_slots=1))


def test_battery_cannot_cover_commute_rejected():
    cfg = dict(
        cloud=synth("grid", 4, 2),
        battery=BatteryParams(beta_s=1, omega_s=1),
        s_threshold_ms=1000,
        fls_speed=0.001,  # a cell per 1000 s: any leg exceeds the battery
        horizon_ms=1000,
    )
    with pytest.raises(InfeasibleConfigError):
        run(SimConfig(**cfg))


# -- determinism -----------------------------------------------------------------


def test_identical_seeds_identical_runs():
    cfg = example_one_config(failure_injection=True, mttf_hours=0.5, seed=11,
                             horizon_ms=4 * HOUR, initial_spares=8)
    a = run(cfg)
    b = run(cfg)
    assert a == b


def test_different_seeds_different_failure_traces():
    base = dict(
        cloud=synth("grid", 30, 4),
        battery=BatteryParams(beta_s=900, omega_s=300),
        s_threshold_ms=30_000,
        failure_injection=True,
        mttf_hours=1.0,
        horizon_ms=4 * HOUR,
        initial_spares=8,
    )
    a = run(SimConfig(seed=1, **base))
    b = run(SimConfig(seed=2, **base))
    assert a.onset_times_ms != b.onset_times_ms


def test_replications_merge_in_seed_order():
    cfg = example_one_config()
    results = run_replications(cfg, [3, 1, 2])
    assert [m.seed for m in results] == [1, 2, 3]


# -- failure injection ---------------------------------------------------------


def test_inject_failures_off_and_deterministic():
    assert inject_failures(1, range(10), None, HOUR) == []
    assert inject_failures(1, range(10), math.inf, HOUR) == []
    a = inject_failures(7, range(5), 0.001, HOUR)
    assert a == inject_failures(7, range(5), 0.001, HOUR)
    assert a != inject_failures(8, range(5), 0.001, HOUR)
    assert all(t0 <= t1 for (t0, *_), (t1, *_) in zip(a, a[1:]))


def test_inject_failures_mean_within_three_percent():
    mttf_hours = 720.0
    events = inject_failures(123, range(60), mttf_hours, int(130_000 * HOUR))
    assert len(events) >= 10_000
    per_fls: dict[int, list[int]] = {}
    for t, fls_id, _ in events:
        per_fls.setdefault(fls_id, []).append(t)
    gaps = []
    for times in per_fls.values():
        gaps.append(times[0])
        gaps.extend(b - a for a, b in zip(times, times[1:]))
    mean_hours = statistics.fmean(gaps) / HOUR
    assert abs(mean_hours - mttf_hours) / mttf_hours < 0.03


def test_failure_kinds_cover_taxonomy():
    events = inject_failures(5, range(40), 0.01, 40 * HOUR)
    kinds = {kind for _, _, kind in events}
    assert kinds == set(FailureKind)


# -- onset detection --------------------------------------------------------------


def test_onset_detector_simple_cases():
    log = DarknessLog(dark=[(0, 1000, 5000)], commits={}, group_idle={}, site_group={})
    assert degraded_onset_detector(log, 100) == [1100]
    # shorter than the tolerance: no onset
    log = DarknessLog(dark=[(0, 1000, 1050)], commits={}, group_idle={}, site_group={})
    assert degraded_onset_detector(log, 100) == []
    # covered by an inbound commitment at the probe instant
    log = DarknessLog(
        dark=[(0, 1000, 5000)], commits={0: [(900, 5000)]}, group_idle={}, site_group={}
    )
    assert degraded_onset_detector(log, 100) == []
    # covered by an idle group standby
    log = DarknessLog(
        dark=[(0, 1000, 5000)], commits={}, group_idle={3: [(0, 9000)]}, site_group={0: 3}
    )
    assert degraded_onset_detector(log, 100) == []


def test_mtdi_samples_are_interarrivals():
    assert mtdi_samples_ms([100, 250, 600]) == [150, 350]
    assert mtdi_samples_ms([100]) == []


def test_single_fls_single_failure_single_onset():
    cfg = SimConfig(
        cloud=synth("grid", 1, 1),
        battery=BatteryParams(beta_s=900, omega_s=300),
        s_threshold_ms=900_000,
        fls_speed=1e9,
        failure_injection=True,
        mttf_hours=0.05,  # fails within the first battery cycle
        horizon_ms=10 * MIN,
        seed=4,  # first draw for FLS 0 lands at t=24.5 s
    )
    metrics = run(cfg)
    assert metrics.total_failures >= 1
    assert len(metrics.onset_times_ms) >= 1


def test_ungrouped_empirical_mtdi_matches_naive_model():
    cfg = SimConfig(
        cloud=synth("grid", 50, 4),
        battery=BatteryParams(beta_s=900, omega_s=300),
        s_threshold_ms=18_000,
        failure_injection=True,
        mttf_hours=5.0,
        horizon_ms=30 * HOUR,
        seed=42,
        initial_spares=10,
    )
    metrics = run(cfg)
    assert len(metrics.empirical_mtdi_samples_ms) > 200
    expected_ms = 5.0 / 50 * HOUR
    assert metrics.mean_mtdi_ms == pytest.approx(expected_ms, rel=0.10)


# -- standby substitution ------------------------------------------------------------


def grouped_config(**overrides):
    base = dict(
        cloud=synth("grid", 40, 4),
        battery=BatteryParams(beta_s=900, omega_s=300),
        s_threshold_ms=22_500,
        reliability=ReliabilityParams(mttf_hours=1.0, mttr_s=1.0, group_size=8),
        failure_injection=True,
        horizon_ms=4 * HOUR,
        seed=13,
        initial_spares=10,
    )
    base.update(overrides)
    return SimConfig(**base)


def test_parity_reconstruction_matches_ground_truth():
    metrics = run(grouped_config())
    assert metrics.total_failures > 20
    assert metrics.total_reconstructions > 0
    assert metrics.reconstruction_mismatches == 0
    assert metrics.conservation_failed == 0


def test_standbys_suppress_most_onsets():
    grouped = run(grouped_config())
    ungrouped = run(grouped_config(reliability=None, mttf_hours=1.0))
    assert len(grouped.onset_times_ms) < len(ungrouped.onset_times_ms)
    # ungrouped: essentially every failure of a lit point degrades the display
    assert len(ungrouped.onset_times_ms) >= 0.5 * ungrouped.total_failures


def test_zero_failure_grouped_run_has_zero_onsets():
    metrics = run(grouped_config(failure_injection=False, horizon_ms=2 * HOUR))
    assert metrics.total_failures == 0
    assert metrics.onset_times_ms == []
    assert metrics.reconstruction_mismatches == 0


def test_detector_params_shift_silent_detection():
    fast = run(grouped_config(detector=DetectorParams(
        heartbeat_period_ms=200, heartbeat_timeout_ms=300, max_polls=1, poll_spacing_ms=100,
    )))
    slow = run(grouped_config(detector=DetectorParams(
        heartbeat_period_ms=5000, heartbeat_timeout_ms=7500, max_polls=5, poll_spacing_ms=2500,
    )))
    fast_repairs = statistics.fmean(fast.repair_time_samples_ms)
    slow_repairs = statistics.fmean(slow.repair_time_samples_ms)
    assert fast_repairs < slow_repairs

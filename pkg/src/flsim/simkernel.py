"""Deterministic discrete-event simulation of an FLS display.

Entities follow the display architecture: dispatchers deploy FLSs,
charging stations recharge them into hangars, a garbage collector and
terminus recycle failed ones, and the orchestrator schedules relays so
each staggered slot is handed from a depleting FLS to a freshly charged
one.  The event loop is single-threaded with integer-millisecond
timestamps ordered by (time, sequence); battery levels are updated
lazily at event boundaries, never per tick.  Runs are bit-reproducible
for a given config and seed; parallelism, when wanted, goes across
replications with distinct seeds.

Relay policy: for ungrouped points (and all standby posts) the
orchestrator pre-dispatches the replacement so it lands exactly when the
depleted FLS departs.  For points protected by a reliability group, the
group standby substitutes at the moment of departure or failure and the
replacement is dispatched at that same moment, relieving the standby on
arrival.  Failures accrue over airborne time only; FLSs parked in a
hangar or charger are powered down.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import stag
from .failure_detect import DetectorParams, FailureKind
from .model import BatteryParams, PointCloud, ReliabilityParams, Role
from .reliability import PARITY, ReliabilityGroup, form_groups
from .stag import FlockingPlan, plan_flocks

ORCH_SEED_TAG = "fls-display-sim"

EVENT_KINDS = (
    "deploy",
    "arrive_at_point",
    "battery_threshold_reached",
    "depart_to_charger",
    "arrive_at_charger",
    "charge_complete",
    "heartbeat_tick",
    "failure_injected",
    "standby_substitute",
    "replacement_arrived",
    "gc_pickup",
    "terminus_recover",
)


class InfeasibleConfigError(ValueError):
    """The configuration cannot sustain the steady-state swap schedule."""


Pos = tuple[float, float, float]


@dataclass(frozen=True)
class SimConfig:
    cloud: PointCloud
    battery: BatteryParams
    s_threshold_ms: int
    reliability: ReliabilityParams | None = None
    scheme: str = PARITY
    dispatcher_positions: tuple[Pos, ...] | None = None
    charger_positions: tuple[Pos, ...] | None = None
    charger_slots: int | None = None  # per station
    fls_speed: float | None = None  # display cells per second
    detector: DetectorParams = field(default_factory=DetectorParams)
    failure_injection: bool = False
    mttf_hours: float | None = None  # overrides reliability.mttf_hours for injection
    horizon_ms: int = 0
    seed: int = 0
    onset_tolerance_ms: int = 100
    standby_depletes: bool = True
    gc_delay_ms: int = 30_000
    recovery_delay_ms: int = 60_000
    initial_spares: int = 0
    message_latency_ms: int = 0
    strict_accounting: bool = True
    stagger_probe_ms: tuple[int, ...] = ()

    def __post_init__(self):
        if self.horizon_ms < 0:
            raise ValueError(f"horizon_ms={self.horizon_ms} must be >= 0")
        if self.fls_speed is not None and not self.fls_speed > 0:
            raise ValueError(f"fls_speed={self.fls_speed} must be > 0")
        if self.charger_slots is not None and self.charger_slots < 1:
            raise ValueError(f"charger_slots={self.charger_slots} must be >= 1")
        if self.onset_tolerance_ms < 0:
            raise ValueError("onset_tolerance_ms must be >= 0")

    @property
    def injection_mttf_hours(self) -> float | None:
        if not self.failure_injection:
            return None
        if self.mttf_hours is not None:
            return self.mttf_hours
        if self.reliability is not None:
            return self.reliability.mttf_hours
        raise ValueError("failure_injection=True needs mttf_hours or reliability params")


@dataclass
class DarknessLog:
    """Per-point darkness and coverage intervals, recorded for post-processing.

    A dark interval is a span with nobody lighting the point.  A point
    counts as covered at an instant when some FLS is committed to it
    (dispatched or substituting) or when its group's standby is alive and
    idle at the post, ready to respond.
    """

    dark: list[tuple[int, int, int]] = field(default_factory=list)  # (site, start, end)
    commits: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    group_idle: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    site_group: dict[int, int] = field(default_factory=dict)


def degraded_onset_detector(log: DarknessLog, tolerance_ms: int) -> list[int]:
    """Degraded-illumination onsets from a recorded darkness log.

    An onset fires the instant a point has stayed dark longer than the
    tolerance while uncovered at that instant.  Returns sorted onset
    times in ms; consecutive differences are the empirical MTDI samples.
    """
    onsets = []
    for site, start, end in log.dark:
        probe = start + tolerance_ms
        if probe >= end:
            continue
        if _in_intervals(log.commits.get(site, ()), probe):
            continue
        gid = log.site_group.get(site)
        if gid is not None and _in_intervals(log.group_idle.get(gid, ()), probe):
            continue
        onsets.append(probe)
    onsets.sort()
    return onsets


def mtdi_samples_ms(onset_times: list[int]) -> list[int]:
    """Inter-onset durations."""
    return [b - a for a, b in zip(onset_times, onset_times[1:])]


def _in_intervals(intervals, t: int) -> bool:
    for start, end in intervals:
        if start <= t < end:
            return True
    return False


@dataclass
class SimMetrics:
    """Everything a replication measured, ready for aggregation and files."""

    seed: int
    horizon_ms: int
    alpha: int
    flock_count: int
    onset_times_ms: list[int]
    empirical_mtdi_samples_ms: list[int]
    illuminated_census: list[tuple[int, int]]
    transit_census: list[tuple[int, int]]
    swap_times_ms: list[int]
    swap_gap_samples_ms: list[int]
    repair_time_samples_ms: list[int]
    stagger_probes: list[tuple[int, int, tuple[int, ...]]]
    conservation_passed: int
    conservation_failed: int
    total_deploys: int
    total_swaps: int
    total_failures: int
    total_reconstructions: int
    reconstruction_mismatches: int

    @property
    def max_transit(self) -> int:
        return max((n for _, n in self.transit_census), default=0)

    @property
    def min_illuminated(self) -> int:
        return min((n for _, n in self.illuminated_census), default=0)

    @property
    def mean_mtdi_ms(self) -> float | None:
        if not self.empirical_mtdi_samples_ms:
            return None
        return sum(self.empirical_mtdi_samples_ms) / len(self.empirical_mtdi_samples_ms)


class FailureClock:
    """Deterministic per-FLS failure source: exponential spacing, uniform kind.

    The stream is keyed by (seed, fls_id) so replications differ only by
    seed and agents never share draws.
    """

    def __init__(self, seed: int, fls_id: int, mttf_hours: float):
        digest = hashlib.sha256(f"{ORCH_SEED_TAG}:{seed}:fls:{fls_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))
        self._rate = 1.0 / (mttf_hours * 3_600_000.0)

    def next_failure(self) -> tuple[float, FailureKind]:
        """Flight milliseconds until the next failure, and its kind."""
        delta = self._rng.expovariate(self._rate)
        kind = self._rng.choice(_KINDS)
        return delta, kind


_KINDS = (FailureKind.ROTOR, FailureKind.LIGHT, FailureKind.COMPUTE, FailureKind.BATTERY)


def inject_failures(seed: int, fls_ids, mttf_hours: float | None, horizon_ms: int):
    """Standalone failure stream: per-FLS exponential arrivals, merged.

    Assumes continuous flight.  Returns (time_ms, fls_id, kind) tuples
    sorted by (time, fls_id).  ``mttf_hours=None`` or infinity disables
    injection and yields an empty stream.
    """
    if mttf_hours is None or mttf_hours == math.inf:
        return []
    events = []
    for fls_id in fls_ids:
        clock = FailureClock(seed, fls_id, mttf_hours)
        t = 0.0
        while True:
            delta_ms, kind = clock.next_failure()
            t += delta_ms
            if t > horizon_ms:
                break
            events.append((int(t), fls_id, kind))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


_AIRBORNE = {
    Role.ILLUMINATING,
    Role.STANDBY,
    Role.IN_TRANSIT_TO_CHARGER,
    Role.IN_TRANSIT_TO_DISPLAY,
}


@dataclass
class _Agent:
    id: int
    role: Role
    pos: Pos
    remaining_ms: int
    ref_ms: int = 0
    flock_id: int | None = None
    stag_id: int | None = None
    site: int | None = None  # point index currently occupied
    group_id: int | None = None  # standby duty
    committed_to: tuple[str, int] | None = None
    eta_ms: int | None = None  # scheduled arrival of the current commitment
    first_deployment: bool = False
    epoch: int = 0  # bumping invalidates pending movement events
    fail_epoch: int = 0
    fail_budget_ms: float = math.inf
    fail_kind: FailureKind | None = None
    clock: FailureClock | None = None


@dataclass
class _Site:
    index: int
    coord: Pos
    flock_id: int
    slot: int
    reserve_ms: int  # flight time to the nearest charger entry
    lead_ms: int  # flight time from the nearest dispatcher
    period_ms: int  # steady relay period: beta - lead - reserve
    group_id: int | None = None
    occupant: int | None = None
    staged: int | None = None
    departing_at: int | None = None
    committed: list[int] = field(default_factory=list)
    dark_since: int | None = None
    gap_open_ms: int | None = None
    failure_pending_since: int | None = None
    relay_epoch: int = 0


@dataclass
class _Post:
    group_id: int
    coord: Pos
    reserve_ms: int
    lead_ms: int
    standby: int | None = None  # agent responsible for the group
    occupant: int | None = None  # agent physically at the post
    staged: int | None = None
    departing_at: int | None = None
    idle_since: int | None = None
    committed: list[int] = field(default_factory=list)


class _Charger:
    def __init__(self, pos: Pos, slots: int):
        self.pos = pos
        self.slots = slots
        self.active = 0
        self.queue: list[int] = []


def run(config: SimConfig) -> SimMetrics:
    """Execute one replication to the horizon and return its metrics."""
    return _Simulation(config).run()


def run_replications(config: SimConfig, seeds) -> list[SimMetrics]:
    """Independent replications differing only by seed, merged in seed order."""
    return [run(replace(config, seed=s)) for s in sorted(seeds)]


class _Simulation:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.cloud = cfg.cloud
        self.bp = cfg.battery
        self.beta = self.bp.beta_ms
        self.omega = self.bp.omega_ms
        self.plan: FlockingPlan = plan_flocks(len(self.cloud), self.bp, cfg.s_threshold_ms)
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.agents: dict[int, _Agent] = {}
        self._next_agent_id = 0
        self.hangar: list[int] = []  # FIFO of charged agents
        self.waiters: list[tuple[str, int]] = []  # deploy targets awaiting stock
        self.role_counts = {role: 0 for role in Role}
        self.lit = 0
        self.log = DarknessLog()
        self.metrics_swap_times: list[int] = []
        self.metrics_gaps: list[int] = []
        self.metrics_repairs: list[int] = []
        self.illum_series: list[tuple[int, int]] = []
        self.transit_series: list[tuple[int, int]] = []
        self.cons_pass = 0
        self.cons_fail = 0
        self.deploys = 0
        self.swaps = 0
        self.failures = 0
        self.reconstructions = 0
        self.recon_mismatch = 0
        self.stagger_probes: list[tuple[int, int, tuple[int, ...]]] = []

        self._build_geometry()
        self._build_groups()
        self._size_fleet()
        self._bootstrap()

    # -- construction ------------------------------------------------------

    def _build_geometry(self):
        cfg = self.cfg
        points = self.cloud.points
        if points:
            max_l = max(p.l for p in points)
            max_h = max(p.h for p in points)
            max_d = max(p.d for p in points)
        else:
            max_l = max_h = max_d = 0
        self.dispatchers = cfg.dispatcher_positions or ((0.0, 0.0, 0.0),)
        self.charger_positions = cfg.charger_positions or (
            (float(max_l + 1), float(max_h + 1), float(max_d + 1)),
        )
        self.terminus_pos = self.charger_positions[0]

        flock_of = []
        slot_of = []
        for flock in self.plan.flocks:
            for j in range(1, flock.size + 1):
                flock_of.append(flock.flock_id)
                slot_of.append(j)

        legs = []
        raw_sites = []
        for i, p in enumerate(points):
            coord = (float(p.l), float(p.h), float(p.d))
            lead_pos = min(self.dispatchers, key=lambda q: (_dist(q, coord), q))
            chg_pos = min(self.charger_positions, key=lambda q: (_dist(q, coord), q))
            legs.append(_dist(lead_pos, coord))
            legs.append(_dist(coord, chg_pos))
            raw_sites.append((i, coord, flock_of[i], slot_of[i], lead_pos, chg_pos))

        max_leg = max(legs, default=0.0)
        if cfg.fls_speed is not None:
            self.speed_ms = cfg.fls_speed / 1000.0
        elif max_leg == 0.0:
            self.speed_ms = 1.0
        else:
            # default speed keeps every leg within half the stagger threshold
            self.speed_ms = (2.0 * max_leg) / cfg.s_threshold_ms
        if max_leg > 0 and max_leg / self.speed_ms >= cfg.s_threshold_ms:
            warnings.warn(
                "farthest display-to-charger flight takes longer than the stagger "
                "threshold; swaps will lag the schedule",
                stacklevel=3,
            )

        self.sites: list[_Site] = []
        for i, coord, fid, slot, lead_pos, chg_pos in raw_sites:
            lead = _travel_ms(lead_pos, coord, self.speed_ms)
            reserve = _travel_ms(coord, chg_pos, self.speed_ms)
            period = self.beta - lead - reserve
            if period <= 0:
                raise InfeasibleConfigError(
                    f"point {i}: battery {self.beta} ms cannot cover a "
                    f"{lead + reserve} ms commute plus illumination"
                )
            self.sites.append(
                _Site(index=i, coord=coord, flock_id=fid, slot=slot,
                      reserve_ms=reserve, lead_ms=lead, period_ms=period)
            )

    def _build_groups(self):
        cfg = self.cfg
        self.groups: list[ReliabilityGroup] = []
        self.posts: list[_Post] = []
        self.truth: dict[int, bytes] = {}
        if cfg.reliability is None or not self.sites:
            return
        self.groups = form_groups(self.cloud, cfg.reliability.group_size, cfg.scheme)
        payload_rng = random.Random(
            int.from_bytes(
                hashlib.sha256(f"{ORCH_SEED_TAG}:{cfg.seed}:payloads".encode()).digest()[:8],
                "big",
            )
        )
        attached = []
        for group in self.groups:
            payloads = []
            for member in group.member_ids:
                blob = payload_rng.randbytes(payload_rng.randint(16, 96))
                self.truth[member] = blob
                payloads.append(blob)
            attached.append(group.with_payloads(payloads))
        self.groups = attached
        for group in self.groups:
            coord = group.standby_position
            chg_pos = min(self.charger_positions, key=lambda q: (_dist(q, coord), q))
            lead_pos = min(self.dispatchers, key=lambda q: (_dist(q, coord), q))
            post = _Post(
                group_id=group.group_id,
                coord=coord,
                reserve_ms=_travel_ms(coord, chg_pos, self.speed_ms),
                lead_ms=_travel_ms(lead_pos, coord, self.speed_ms),
            )
            self.posts.append(post)
            for member in group.member_ids:
                self.sites[member].group_id = group.group_id
                self.log.site_group[member] = group.group_id

    def _size_fleet(self):
        cfg = self.cfg
        demand = Fraction(0)
        pipeline = Fraction(0)
        for site in self.sites:
            demand += Fraction(self.omega, site.period_ms)
            pipeline += Fraction(site.lead_ms + site.reserve_ms + self.omega, site.period_ms)
        if cfg.standby_depletes:
            for post in self.posts:
                period = self.beta - post.lead_ms - post.reserve_ms
                if period <= 0:
                    raise InfeasibleConfigError(
                        f"standby post {post.group_id}: battery cannot cover its commute"
                    )
                demand += Fraction(self.omega, period)
                pipeline += Fraction(post.lead_ms + post.reserve_ms + self.omega, period)

        stations = len(self.charger_positions)
        if cfg.charger_slots is None:
            per_station = max(
                1, -(-max(self.plan.hangar_stock, math.ceil(demand)) // stations)
            )
        else:
            per_station = cfg.charger_slots
        total_slots = per_station * stations
        if demand > total_slots:
            raise InfeasibleConfigError(
                f"swap schedule needs {float(demand):.2f} concurrent charge slots, "
                f"only {total_slots} configured"
            )
        self.chargers = [_Charger(pos, per_station) for pos in self.charger_positions]

        # hangar stock: the flock extras, widened to cover commute pipelines
        self.stock = (
            max(self.plan.hangar_stock, math.ceil(pipeline) + self.plan.flock_count)
            + cfg.initial_spares
        )
        mttf = cfg.injection_mttf_hours
        self._inject = mttf is not None
        self._mttf_hours = mttf

    def _new_agent(self, role: Role, pos: Pos, remaining: int) -> _Agent:
        agent = _Agent(
            id=self._next_agent_id, role=role, pos=pos,
            remaining_ms=remaining, ref_ms=self.now,
        )
        if self._inject:
            agent.clock = FailureClock(self.cfg.seed, agent.id, self._mttf_hours)
            agent.fail_budget_ms, agent.fail_kind = agent.clock.next_failure()
        self._next_agent_id += 1
        self.agents[agent.id] = agent
        self.role_counts[role] += 1
        return agent

    def _bootstrap(self):
        # flock members appear at their points simultaneously at t=0, fully
        # charged and flagged as first deployments; their early returns build
        # the stagger without delaying the illumination
        for site in self.sites:
            agent = self._new_agent(Role.ILLUMINATING, site.coord, self.beta)
            agent.first_deployment = True
            agent.flock_id = site.flock_id
            agent.stag_id = site.slot
            agent.site = site.index
            site.occupant = agent.id
            self.lit += 1
            self._arm_failure(agent)
            flock = self.plan.flocks[site.flock_id - 1]
            ideal = _round_frac(site.slot * flock.stagger_ms)
            depart = min(ideal, self.beta - site.reserve_ms)
            self._schedule_departure(agent, site, depart)
        for post in self.posts:
            agent = self._new_agent(Role.STANDBY, post.coord, self.beta)
            agent.group_id = post.group_id
            post.standby = agent.id
            post.occupant = agent.id
            post.idle_since = 0
            self._arm_failure(agent)
            if self.cfg.standby_depletes:
                self._schedule_post_departure(agent, post, self.beta - post.reserve_ms)
        for _ in range(self.stock):
            self.hangar.append(self._new_agent(Role.HANGAR, self.charger_positions[0], self.beta).id)
        self._record_census()

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, time_ms: int, kind: str, **payload):
        self._seq += 1
        heapq.heappush(self._heap, (time_ms, self._seq, kind, payload))

    def _touch(self, agent: _Agent):
        """Lazily advance battery and failure budget to the current time."""
        dt = self.now - agent.ref_ms
        if dt <= 0:
            agent.ref_ms = self.now
            return
        if agent.role in _AIRBORNE:
            if agent.role is not Role.STANDBY or self.cfg.standby_depletes:
                agent.remaining_ms = max(0, agent.remaining_ms - dt)
            agent.fail_budget_ms -= dt
        agent.ref_ms = self.now

    def _remaining_at(self, agent: _Agent, t: int) -> int:
        dt = t - agent.ref_ms
        if dt > 0 and agent.role in _AIRBORNE and (
            agent.role is not Role.STANDBY or self.cfg.standby_depletes
        ):
            return max(0, agent.remaining_ms - dt)
        return agent.remaining_ms

    def _set_role(self, agent: _Agent, role: Role):
        self._touch(agent)
        if agent.role is role:
            return
        was_airborne = agent.role in _AIRBORNE
        self.role_counts[agent.role] -= 1
        agent.role = role
        self.role_counts[role] += 1
        if role in _AIRBORNE and not was_airborne:
            self._arm_failure(agent)
        elif was_airborne and role not in _AIRBORNE:
            agent.fail_epoch += 1  # the failure clock freezes on the ground

    def _arm_failure(self, agent: _Agent):
        if not self._inject:
            return
        agent.fail_epoch += 1
        at = self.now + max(0, int(round(agent.fail_budget_ms)))
        self._schedule(at, "failure_injected", agent_id=agent.id, fail_epoch=agent.fail_epoch)

    def _record_census(self):
        transit = (
            self.role_counts[Role.IN_TRANSIT_TO_CHARGER]
            + self.role_counts[Role.IN_TRANSIT_TO_DISPLAY]
        )
        _append_coalesced(self.illum_series, self.now, self.lit)
        _append_coalesced(self.transit_series, self.now, transit)
        if self.cfg.strict_accounting:
            if sum(self.role_counts.values()) == len(self.agents):
                self.cons_pass += 1
            else:
                self.cons_fail += 1

    # -- relays --------------------------------------------------------------

    def _schedule_departure(self, agent: _Agent, site: _Site, depart_ms: int):
        """Fix the occupant's departure; pre-dispatch the relay for ungrouped points."""
        site.departing_at = depart_ms
        self._schedule(
            depart_ms, "battery_threshold_reached",
            agent_id=agent.id, epoch=agent.epoch, site=site.index, post=None,
        )
        if site.group_id is None:
            deploy_at = max(self.now, depart_ms - site.lead_ms)
            self._schedule(
                deploy_at, "deploy",
                target=("site", site.index), relay_epoch=site.relay_epoch,
            )

    def _schedule_post_departure(self, agent: _Agent, post: _Post, depart_ms: int):
        post.departing_at = depart_ms
        self._schedule(
            depart_ms, "battery_threshold_reached",
            agent_id=agent.id, epoch=agent.epoch, site=None, post=post.group_id,
        )
        deploy_at = max(self.now, depart_ms - post.lead_ms)
        self._schedule(deploy_at, "deploy", target=("post", post.group_id), relay_epoch=-1)

    def _dispatch(self, target: tuple[str, int]):
        """Send the oldest charged FLS in the hangars toward a point or post."""
        if not self.hangar:
            self.waiters.append(target)
            return
        agent = self.agents[self.hangar.pop(0)]
        self.deploys += 1
        kind_target, index = target
        if kind_target == "site":
            site = self.sites[index]
            site.committed.append(agent.id)
            self._mark_commit(index)
            agent.committed_to = target
            agent.eta_ms = self.now + site.lead_ms
            self._set_role(agent, Role.IN_TRANSIT_TO_DISPLAY)
            agent.flock_id = site.flock_id  # the dispatcher hands out slot ids
            agent.stag_id = site.slot
            agent.pos = site.coord
            self._schedule(
                agent.eta_ms, "arrive_at_point",
                agent_id=agent.id, epoch=agent.epoch, site=index, post=None,
            )
        else:
            post = self.posts[index]
            post.committed.append(agent.id)
            agent.committed_to = target
            agent.eta_ms = self.now + post.lead_ms
            self._set_role(agent, Role.IN_TRANSIT_TO_DISPLAY)
            agent.pos = post.coord
            self._schedule(
                agent.eta_ms, "arrive_at_point",
                agent_id=agent.id, epoch=agent.epoch, site=None, post=index,
            )
        self._record_census()

    def _mark_commit(self, site_index: int):
        self.log.commits.setdefault(site_index, []).append((self.now, -1))

    def _close_commit(self, site_index: int):
        spans = self.log.commits.get(site_index)
        if spans:
            for i in range(len(spans) - 1, -1, -1):
                if spans[i][1] == -1:
                    spans[i] = (spans[i][0], self.now)
                    break

    def _close_idle(self, post: _Post):
        if post.idle_since is not None:
            if self.now > post.idle_since:
                self.log.group_idle.setdefault(post.group_id, []).append(
                    (post.idle_since, self.now)
                )
            post.idle_since = None

    # -- main loop -------------------------------------------------------------

    def run(self) -> SimMetrics:
        cfg = self.cfg
        probes = sorted(set(cfg.stagger_probe_ms))
        probe_i = 0
        while self._heap:
            time_ms, _, kind, payload = self._heap[0]
            if time_ms > cfg.horizon_ms:
                break
            while probe_i < len(probes) and probes[probe_i] < time_ms:
                self._take_probe(probes[probe_i])
                probe_i += 1
            heapq.heappop(self._heap)
            self.now = time_ms
            getattr(self, "_on_" + kind)(**payload)
        self.now = cfg.horizon_ms
        while probe_i < len(probes) and probes[probe_i] <= cfg.horizon_ms:
            self._take_probe(probes[probe_i])
            probe_i += 1
        self._finalize_logs()
        onsets = degraded_onset_detector(self.log, cfg.onset_tolerance_ms)
        return SimMetrics(
            seed=cfg.seed,
            horizon_ms=cfg.horizon_ms,
            alpha=len(self.cloud),
            flock_count=self.plan.flock_count,
            onset_times_ms=onsets,
            empirical_mtdi_samples_ms=mtdi_samples_ms(onsets),
            illuminated_census=self.illum_series,
            transit_census=self.transit_series,
            swap_times_ms=self.metrics_swap_times,
            swap_gap_samples_ms=self.metrics_gaps,
            repair_time_samples_ms=self.metrics_repairs,
            stagger_probes=self.stagger_probes,
            conservation_passed=self.cons_pass,
            conservation_failed=self.cons_fail,
            total_deploys=self.deploys,
            total_swaps=self.swaps,
            total_failures=self.failures,
            total_reconstructions=self.reconstructions,
            reconstruction_mismatches=self.recon_mismatch,
        )

    def _take_probe(self, t: int):
        per_flock: dict[int, list[int]] = {}
        for agent in self.agents.values():
            if agent.role is Role.ILLUMINATING and agent.flock_id is not None:
                per_flock.setdefault(agent.flock_id, []).append(self._remaining_at(agent, t))
        for flock_id in sorted(per_flock):
            self.stagger_probes.append((t, flock_id, tuple(sorted(per_flock[flock_id]))))

    def _finalize_logs(self):
        end = self.cfg.horizon_ms
        for site in self.sites:
            if site.dark_since is not None and site.dark_since < end:
                self.log.dark.append((site.index, site.dark_since, end))
        for spans in self.log.commits.values():
            for i, (start, stop) in enumerate(spans):
                if stop == -1:
                    spans[i] = (start, end)
        for post in self.posts:
            if post.idle_since is not None and post.idle_since < end:
                self.log.group_idle.setdefault(post.group_id, []).append(
                    (post.idle_since, end)
                )
        self.log.dark.sort()

    # -- handlers ---------------------------------------------------------------

    def _on_deploy(self, target, relay_epoch):
        kind_target, index = target
        if kind_target == "site" and relay_epoch >= 0:
            if self.sites[index].relay_epoch != relay_epoch:
                return  # relay superseded by a failure replacement
        self._dispatch(target)

    def _on_arrive_at_point(self, agent_id, epoch, site, post):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        self._touch(agent)
        agent.committed_to = None
        agent.eta_ms = None
        if post is not None:
            self._arrive_at_post(agent, self.posts[post])
        else:
            self._arrive_at_site(agent, self.sites[site])

    def _arrive_at_site(self, agent: _Agent, site: _Site):
        if agent.id in site.committed:
            site.committed.remove(agent.id)
            self._close_commit(site.index)
        agent.pos = site.coord
        if site.occupant is None:
            self._occupy(agent, site)
        elif site.departing_at == self.now:
            site.staged = agent.id  # handover completes when the occupant departs
        elif self.agents[site.occupant].group_id is not None and agent.group_id is None:
            self._relieve_standby(agent, site)
        else:
            # occupant is healthy and staying: this relay was superseded
            self._return_to_charger(agent)

    def _occupy(self, agent: _Agent, site: _Site):
        site.occupant = agent.id
        agent.site = site.index
        agent.flock_id = site.flock_id
        agent.stag_id = site.slot
        self._set_role(agent, Role.ILLUMINATING)
        self.lit += 1
        if site.dark_since is not None:
            if self.now > site.dark_since:
                self.log.dark.append((site.index, site.dark_since, self.now))
            site.dark_since = None
        if site.gap_open_ms is not None:
            self.metrics_gaps.append(self.now - site.gap_open_ms)
            site.gap_open_ms = None
        if site.failure_pending_since is not None and agent.group_id is None:
            self.metrics_repairs.append(self.now - site.failure_pending_since)
            site.failure_pending_since = None
            if site.group_id is not None:
                self._reopen_idle_if_home(site.group_id)
        if agent.group_id is None:
            depart = self.now + agent.remaining_ms - site.reserve_ms
            self._schedule_departure(agent, site, depart)
        self._record_census()

    def _relieve_standby(self, agent: _Agent, site: _Site):
        standby = self.agents[site.occupant]
        site.occupant = None
        self.lit -= 1
        standby.site = None
        self._occupy(agent, site)
        self._send_standby_home(standby)

    def _send_standby_home(self, standby: _Agent):
        post = self.posts[standby.group_id]
        self._set_role(standby, Role.STANDBY)
        standby.flock_id = None
        standby.stag_id = None
        standby.epoch += 1
        travel = _travel_ms(standby.pos, post.coord, self.speed_ms)
        standby.pos = post.coord
        self._schedule(
            self.now + travel, "standby_substitute",
            agent_id=standby.id, epoch=standby.epoch, site=None, post=post.group_id,
            phase="home",
        )
        self._record_census()

    def _arrive_at_post(self, agent: _Agent, post: _Post):
        if agent.id in post.committed:
            post.committed.remove(agent.id)
        agent.pos = post.coord
        if post.occupant is not None and post.occupant != agent.id:
            if post.departing_at == self.now:
                post.staged = agent.id
                return
            self._return_to_charger(agent)
            return
        self._take_post(agent, post)

    def _take_post(self, agent: _Agent, post: _Post):
        post.occupant = agent.id
        post.standby = agent.id
        agent.group_id = post.group_id
        self._set_role(agent, Role.STANDBY)
        if post.idle_since is None and not self._group_has_pending_failure(post.group_id):
            post.idle_since = self.now
        if self.cfg.standby_depletes:
            self._touch(agent)
            self._schedule_post_departure(agent, post, self.now + agent.remaining_ms - post.reserve_ms)
        self._record_census()

    def _group_has_pending_failure(self, group_id: int) -> bool:
        return any(
            s.failure_pending_since is not None
            for s in self.sites
            if s.group_id == group_id
        )

    def _reopen_idle_if_home(self, group_id: int):
        post = self.posts[group_id]
        if (
            post.standby is not None
            and post.occupant == post.standby
            and post.idle_since is None
            and not self._group_has_pending_failure(group_id)
        ):
            post.idle_since = self.now

    def _on_battery_threshold_reached(self, agent_id, epoch, site, post):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        self._touch(agent)
        self._schedule(self.now, "depart_to_charger",
                       agent_id=agent.id, epoch=agent.epoch, site=site, post=post)

    def _on_depart_to_charger(self, agent_id, epoch, site, post):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        self._touch(agent)
        if post is not None:
            self._post_swap(agent, self.posts[post])
            return
        s = self.sites[site]
        self.swaps += 1
        self.metrics_swap_times.append(self.now)
        s.occupant = None
        s.departing_at = None
        self.lit -= 1
        agent.site = None
        if s.staged is not None:
            staged = self.agents[s.staged]
            s.staged = None
            self._occupy(staged, s)
            self.metrics_gaps.append(0)
        else:
            s.dark_since = self.now
            s.gap_open_ms = self.now
            if s.group_id is not None:
                # the standby substitutes while a charged FLS is dispatched
                self._engage_standby(s, reconstruction=False)
                self._dispatch(("site", s.index))
        self._return_to_charger(agent)

    def _post_swap(self, agent: _Agent, post: _Post):
        post.occupant = None
        post.departing_at = None
        if post.standby == agent.id:
            post.standby = None
            self._close_idle(post)
        agent.group_id = None
        if post.staged is not None:
            staged = self.agents[post.staged]
            post.staged = None
            self._take_post(staged, post)
        self._return_to_charger(agent)

    def _return_to_charger(self, agent: _Agent):
        charger_i, charger = min(
            enumerate(self.chargers),
            key=lambda ic: (_dist(agent.pos, ic[1].pos), ic[0]),
        )
        travel = _travel_ms(agent.pos, charger.pos, self.speed_ms)
        self._set_role(agent, Role.IN_TRANSIT_TO_CHARGER)
        agent.flock_id = None
        agent.stag_id = None
        agent.epoch += 1
        agent.pos = charger.pos
        self._schedule(
            self.now + travel, "arrive_at_charger",
            agent_id=agent.id, epoch=agent.epoch, charger=charger_i,
        )
        self._record_census()

    def _on_arrive_at_charger(self, agent_id, epoch, charger):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        self._set_role(agent, Role.CHARGING)
        station = self.chargers[charger]
        if station.active < station.slots:
            self._start_charge(agent, station, charger)
        else:
            station.queue.append(agent.id)
        self._record_census()

    def _start_charge(self, agent: _Agent, station: _Charger, charger_i: int):
        station.active += 1
        self._touch(agent)
        deficit = self.beta - agent.remaining_ms
        duration = _round_frac(stag.charge_time_ms(deficit, self.bp))
        agent.epoch += 1
        self._schedule(
            self.now + duration, "charge_complete",
            agent_id=agent.id, epoch=agent.epoch, charger=charger_i,
        )

    def _on_charge_complete(self, agent_id, epoch, charger):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        station = self.chargers[charger]
        station.active -= 1
        agent.remaining_ms = self.beta
        agent.ref_ms = self.now
        agent.first_deployment = False
        self._set_role(agent, Role.HANGAR)
        self.hangar.append(agent.id)
        if station.queue:
            self._start_charge(self.agents[station.queue.pop(0)], station, charger)
        if self.waiters:
            self._dispatch(self.waiters.pop(0))
        self._record_census()

    # -- failures -----------------------------------------------------------------

    def _on_failure_injected(self, agent_id, fail_epoch):
        agent = self.agents[agent_id]
        if agent.fail_epoch != fail_epoch or agent.role not in _AIRBORNE:
            return
        self._touch(agent)
        kind = agent.fail_kind
        self.failures += 1
        agent.epoch += 1
        agent.fail_epoch += 1

        site_hit = None
        if agent.site is not None:
            site_hit = self.sites[agent.site]
            site_hit.occupant = None
            site_hit.departing_at = None
            self.lit -= 1
            site_hit.dark_since = self.now
            site_hit.failure_pending_since = self.now
            site_hit.relay_epoch += 1
            agent.site = None
            if site_hit.staged is not None:
                staged = self.agents[site_hit.staged]
                site_hit.staged = None
                self._occupy(staged, site_hit)

        was_standby_group = None
        if agent.group_id is not None:
            was_standby_group = agent.group_id
            post = self.posts[agent.group_id]
            if post.occupant == agent.id:
                post.occupant = None
                post.departing_at = None
            if post.standby == agent.id:
                post.standby = None
                self._close_idle(post)
            agent.group_id = None
            if post.staged is not None:
                staged = self.agents[post.staged]
                post.staged = None
                self._take_post(staged, post)

        committed_site = None
        missed_eta = agent.eta_ms
        if agent.committed_to is not None:
            t_kind, t_index = agent.committed_to
            if t_kind == "site":
                s = self.sites[t_index]
                if agent.id in s.committed:
                    s.committed.remove(agent.id)
                    self._close_commit(t_index)
                committed_site = t_index
            else:
                p = self.posts[t_index]
                if agent.id in p.committed:
                    p.committed.remove(agent.id)
            agent.committed_to = None
        agent.eta_ms = None

        self._set_role(agent, Role.FAILED)
        agent.flock_id = None
        agent.stag_id = None

        # physical recovery: a dead light flies itself to the terminus, all
        # other kinds descend onto the collector belt and ride to the terminus
        if kind is FailureKind.LIGHT:
            travel = _travel_ms(agent.pos, self.terminus_pos, self.speed_ms)
            agent.pos = self.terminus_pos
            self._schedule(
                self.now + travel + self.cfg.recovery_delay_ms, "terminus_recover",
                agent_id=agent.id, epoch=agent.epoch,
            )
        else:
            self._schedule(
                self.now + self.cfg.gc_delay_ms, "gc_pickup",
                agent_id=agent.id, epoch=agent.epoch,
            )

        # notification: rotor and light failures self-announce; silent kinds
        # surface when a neighbor's poll ladder expires
        if kind.self_detectable:
            notify = self.now + self.cfg.message_latency_ms
        else:
            period = self.cfg.detector.heartbeat_period_ms
            last_hb = ((self.now - 1) // period) * period if self.now > 0 else 0
            notify = (
                last_hb
                + self.cfg.detector.declaration_delay_ms
                + self.cfg.message_latency_ms
            )
            if len(self.cloud) < 2 and was_standby_group is None:
                notify = None  # nobody is left to notice a silent failure
        if committed_site is not None:
            # a missed relay appointment is noticed at the scheduled arrival
            arrival = self.sites[committed_site]
            no_show = missed_eta if missed_eta is not None else self.now + arrival.lead_ms
            notify = no_show if notify is None else min(notify, no_show)
            site_hit = site_hit or arrival
        if notify is not None:
            self._schedule(
                notify, "heartbeat_tick",
                failed_id=agent.id,
                site=site_hit.index if site_hit is not None else None,
                standby_group=was_standby_group,
            )
        self._record_census()

    def _on_heartbeat_tick(self, failed_id, site, standby_group):
        """A poll ladder expired: the orchestrator learns of the failure."""
        if standby_group is not None:
            post = self.posts[standby_group]
            if post.standby is None and not post.committed:
                self._dispatch(("post", standby_group))
            return
        if site is None:
            return
        s = self.sites[site]
        if s.occupant is not None or s.committed:
            return  # already covered through another path
        if s.group_id is not None:
            self._engage_standby(s, reconstruction=True)
        self._dispatch(("site", s.index))

    def _engage_standby(self, site: _Site, reconstruction: bool):
        post = self.posts[site.group_id]
        if post.standby is None or post.occupant != post.standby:
            return  # standby dead, absent, or already covering elsewhere
        standby = self.agents[post.standby]
        if standby.role is not Role.STANDBY:
            return
        self._close_idle(post)  # the group's exposure window opens
        post.occupant = None
        post.departing_at = None
        if reconstruction and self.cfg.scheme == PARITY:
            rebuilt = self.groups[site.group_id].reconstruct_member(
                site.index, {site.index}
            )
            self.reconstructions += 1
            if rebuilt != self.truth[site.index]:
                self.recon_mismatch += 1
        site.committed.append(standby.id)
        standby.committed_to = ("site", site.index)
        self._mark_commit(site.index)
        self._touch(standby)
        standby.epoch += 1
        travel = _travel_ms(post.coord, site.coord, self.speed_ms)
        standby.eta_ms = self.now + travel
        self._schedule(
            standby.eta_ms, "standby_substitute",
            agent_id=standby.id, epoch=standby.epoch, site=site.index, post=None,
            phase="cover",
        )

    def _on_standby_substitute(self, agent_id, epoch, phase, site, post):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        self._touch(agent)
        if phase == "home":
            home = self.posts[post]
            agent.pos = home.coord
            if home.standby == agent.id:
                home.occupant = agent.id
                if home.idle_since is None and not self._group_has_pending_failure(post):
                    home.idle_since = self.now
                self._record_census()
            else:
                self._return_to_charger(agent)
            return
        s = self.sites[site]
        agent.committed_to = None
        agent.eta_ms = None
        if agent.id in s.committed:
            s.committed.remove(agent.id)
            self._close_commit(s.index)
        agent.pos = s.coord
        if s.occupant is None:
            self._occupy(agent, s)
        else:
            self._send_standby_home(agent)

    def _on_replacement_arrived(self, **payload):
        self._on_arrive_at_point(**payload)

    def _on_gc_pickup(self, agent_id, epoch):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        agent.pos = self.terminus_pos
        self._schedule(
            self.now + self.cfg.recovery_delay_ms, "terminus_recover",
            agent_id=agent.id, epoch=agent.epoch,
        )

    def _on_terminus_recover(self, agent_id, epoch):
        agent = self.agents[agent_id]
        if agent.epoch != epoch:
            return
        # recovered to normal mode with an empty battery; recharge before reuse
        agent.remaining_ms = 0
        agent.ref_ms = self.now
        if agent.clock is not None:
            agent.fail_budget_ms, agent.fail_kind = agent.clock.next_failure()
        agent.epoch += 1
        charger_i, charger = min(
            enumerate(self.chargers),
            key=lambda ic: (_dist(agent.pos, ic[1].pos), ic[0]),
        )
        agent.pos = charger.pos
        self._schedule(
            self.now, "arrive_at_charger",
            agent_id=agent.id, epoch=agent.epoch, charger=charger_i,
        )


def _append_coalesced(series: list[tuple[int, int]], t: int, value: int):
    if series and series[-1][0] == t:
        if series[-1][1] != value:
            series[-1] = (t, value)
        return
    if series and series[-1][1] == value:
        return
    series.append((t, value))


def _dist(a: Pos, b: Pos) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def _travel_ms(a: Pos, b: Pos, speed_per_ms: float) -> int:
    return int(math.floor(_dist(a, b) / speed_per_ms + 0.5))


def _round_frac(x) -> int:
    frac = Fraction(x)
    return (2 * frac.numerator + frac.denominator) // (2 * frac.denominator)

"""Staggered battery-charge planning for FLS flocks.

A display keeps an illumination lit by staggering battery states inside
each flock: with ``a`` FLSs in a flock and flight time ``beta``, their
remaining flight times are spaced ``S = beta/a`` apart, so exactly one
FLS per flock depletes every ``S`` and is relayed by a freshly charged
one.  The extra inventory a flock needs while its members rotate through
the chargers is ``ceil(omega/S)``.

All internal times are integer milliseconds; stagger intervals are kept
as exact rationals so long schedules do not drift.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction

from .model import BatteryParams


class PlanError(ValueError):
    """The requested plan parameters are unusable."""


@dataclass(frozen=True)
class FlockSpec:
    """One flock: its size, exact stagger interval, and charging inventory.

    ``extra_exact`` is the un-rounded inventory requirement
    ``omega * size / beta``; ``extra`` is the ceiling actually provisioned.
    """

    flock_id: int
    size: int
    stagger_ms: Fraction
    extra: int
    extra_exact: Fraction

    @property
    def stagger_s(self) -> float:
        return float(self.stagger_ms) / 1000.0


@dataclass(frozen=True)
class FlockingPlan:
    """Flock partition of an illumination plus its inventory totals.

    ``total_extra`` follows the aggregate convention: the un-rounded
    per-flock requirements are summed first and a single ceiling is
    applied, which equals ``ceil(alpha * omega / beta)``.  The physical
    hangar stock (per-flock ceilings summed) is available separately as
    ``hangar_stock`` and is never smaller.
    """

    alpha: int
    battery: BatteryParams
    s_threshold_ms: int
    flocks: tuple[FlockSpec, ...]
    total_extra: int
    total_fls: int

    @property
    def flock_count(self) -> int:
        return len(self.flocks)

    @property
    def in_transit_bound(self) -> int:
        """At most two dark FLSs commute per flock: one inbound, one outbound."""
        return 2 * len(self.flocks)

    @property
    def hangar_stock(self) -> int:
        return sum(f.extra for f in self.flocks)

    @property
    def overhead_fraction(self) -> Fraction:
        """Extra FLSs per illuminating FLS at the optimum, omega/beta."""
        return Fraction(self.battery.omega_ms, self.battery.beta_ms)

    @property
    def last_flock(self) -> FlockSpec | None:
        return self.flocks[-1] if self.flocks else None


def min_total_fls(alpha: int, bp: BatteryParams) -> Fraction:
    """Lower bound on FLSs needed to keep ``alpha`` points lit continuously.

    Each FLS illuminates for ``beta`` out of every ``beta + omega``, so the
    fleet must satisfy ``fleet * beta / (beta + omega) = alpha``, giving
    ``alpha * (1 + omega/beta)``.  Returned exact and un-rounded; apply a
    ceiling for an integral count.
    """
    if alpha < 0:
        raise PlanError(f"alpha={alpha} must be >= 0")
    return Fraction(alpha) + Fraction(alpha * bp.omega_ms, bp.beta_ms)


def plan_flocks(alpha: int, bp: BatteryParams, s_threshold_ms: int) -> FlockingPlan:
    """Partition ``alpha`` FLSs into flocks whose stagger never drops below the threshold.

    Full flocks hold ``floor(beta / s_threshold)`` FLSs each; the remainder
    forms one final smaller flock with a correspondingly larger stagger.
    """
    if alpha < 0:
        raise PlanError(f"alpha={alpha} must be >= 0")
    beta_ms = bp.beta_ms
    omega_ms = bp.omega_ms
    if s_threshold_ms <= 0 or s_threshold_ms > beta_ms:
        raise PlanError(
            f"s_threshold_ms={s_threshold_ms} must be in (0, beta={beta_ms} ms]"
        )
    if alpha == 0:
        return FlockingPlan(
            alpha=0,
            battery=bp,
            s_threshold_ms=s_threshold_ms,
            flocks=(),
            total_extra=0,
            total_fls=0,
        )

    full_size = beta_ms // s_threshold_ms
    flock_count = -(-alpha // full_size)
    sizes = [full_size] * (flock_count - 1)
    sizes.append(alpha - full_size * (flock_count - 1))

    flocks = tuple(
        FlockSpec(
            flock_id=i + 1,
            size=size,
            stagger_ms=Fraction(beta_ms, size),
            extra=-(-omega_ms * size // beta_ms),
            extra_exact=Fraction(omega_ms * size, beta_ms),
        )
        for i, size in enumerate(sizes)
    )
    total_extra = math.ceil(sum(f.extra_exact for f in flocks))
    return FlockingPlan(
        alpha=alpha,
        battery=bp,
        s_threshold_ms=s_threshold_ms,
        flocks=flocks,
        total_extra=total_extra,
        total_fls=alpha + total_extra,
    )


def staggered_targets(flock: FlockSpec, bp: BatteryParams) -> list[tuple[int, Fraction]]:
    """Steady-state remaining flight time per slot: slot j holds j*S.

    The highest slot holds a fully charged battery.
    """
    _check_flock(flock, bp)
    return [(j, j * flock.stagger_ms) for j in range(1, flock.size + 1)]


def bootstrap_schedule(flock: FlockSpec, bp: BatteryParams) -> list[tuple[int, Fraction]]:
    """First-deployment return times that stagger a simultaneously launched flock.

    All members launch fully charged at once; the member holding slot j
    flies back after j*S, so after one battery cycle the flock's remaining
    flight times sit exactly S apart.  All but the last member return with
    partially full batteries.
    """
    _check_flock(flock, bp)
    return [(j, j * flock.stagger_ms) for j in range(1, flock.size + 1)]


def charge_time_ms(deficit_ms, bp: BatteryParams) -> Fraction:
    """Time to recharge a battery missing ``deficit_ms`` of flight time.

    Charging is linear: a full recharge takes omega, a half-empty battery
    half of it.
    """
    deficit = Fraction(deficit_ms)
    if deficit < 0 or deficit > bp.beta_ms:
        raise ValueError(f"deficit {deficit_ms} ms outside [0, beta={bp.beta_ms} ms]")
    return Fraction(bp.omega_ms) * deficit / bp.beta_ms


@dataclass(frozen=True, order=True)
class SwapEvent:
    """One steady-state relay: the slot's depleted FLS swaps with a charged one."""

    time_ms: int
    flock_id: int
    sequence: int
    slot: int

    @property
    def time_s(self) -> float:
        return self.time_ms / 1000.0


def steady_state_swaps(plan: FlockingPlan, horizon_ms: int) -> list[SwapEvent]:
    """All swap events up to and including ``horizon_ms``, totally ordered.

    Flock i swaps every S_i; the k-th swap of a flock retires the slot that
    launched with the k-th lowest battery, wrapping around each cycle.
    Exact rational swap times are rounded half-up to the millisecond grid;
    simultaneous swaps order by flock id, then sequence.
    """
    if horizon_ms < 0:
        raise ValueError(f"horizon_ms={horizon_ms} must be >= 0")
    streams = []
    for flock in plan.flocks:
        num = flock.stagger_ms.numerator
        den = flock.stagger_ms.denominator
        streams.append(_flock_swaps(flock, num, den, horizon_ms))
    return list(heapq.merge(*streams, key=lambda e: (e.time_ms, e.flock_id, e.sequence)))


def _flock_swaps(flock: FlockSpec, num: int, den: int, horizon_ms: int):
    k = 1
    while True:
        time_ms = (2 * k * num + den) // (2 * den)  # round half up of k*num/den
        if time_ms > horizon_ms:
            return
        yield SwapEvent(
            time_ms=time_ms,
            flock_id=flock.flock_id,
            sequence=k,
            slot=(k - 1) % flock.size + 1,
        )
        k += 1


def _check_flock(flock: FlockSpec, bp: BatteryParams) -> None:
    if flock.stagger_ms * flock.size != bp.beta_ms:
        raise ValueError(
            f"flock stagger {flock.stagger_ms} ms * size {flock.size} "
            f"does not equal battery flight time {bp.beta_ms} ms"
        )

"""Reliability groups over a point cloud and closed-form MTDI analytics.

A display tolerates FLS failures by partitioning the illuminating FLSs
into proximity groups of at most G members, each shadowed by one dark
standby.  The standby protects the members' flight/lighting payloads
with either full replication or a single XOR parity blob and substitutes
for whichever member fails first.  The analytic model mirrors the disk
array literature: a group dies when a second member fails before the
first repair completes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import kernels
from .model import DisplayPoint, PointCloud, ReliabilityParams

PARITY = "parity"
REPLICATION = "replication"


class ModelDomainError(ValueError):
    """Model inputs leave the validity region (repair slower than re-failure)."""


class MultiFailureError(RuntimeError):
    """More than one member payload is missing; parity alone cannot recover.

    The group must wait for replacement FLSs dispatched by the
    orchestrator to rebuild the missing data.
    """


def mtdi_naive(mttf_hours: float, alpha: int) -> float:
    """Mean time to degraded illumination with no protection at all.

    Any single failure degrades the rendering, so the expectation is the
    per-FLS MTTF divided by the swarm size.
    """
    if alpha < 1:
        raise ValueError(f"MTDI undefined for alpha={alpha}; need at least one FLS")
    if not mttf_hours > 0:
        raise ValueError(f"mttf_hours={mttf_hours} must be > 0")
    return mttf_hours / alpha


def double_failure_probability(rp: ReliabilityParams) -> float:
    """Chance a second member fails before a group repair completes."""
    exposure = rp.mttf_hours / (rp.group_size + 1)
    p = rp.mttr_hours / exposure
    if p > 1.0:
        raise ModelDomainError(
            f"repair time {rp.mttr_s} s exceeds the group re-failure window "
            f"({exposure * 3600:.3f} s); the double-failure model does not apply"
        )
    return p


def mttf_group(rp: ReliabilityParams) -> float:
    """Mean time to failure of one parity group, in hours.

    A group of G members plus standby first loses some FLS after
    ``mttf/(G+1)``; it fails (loses data) only when that happens twice
    within one repair window, scaling the group lifetime by 1/P.
    """
    p = double_failure_probability(rp)
    exposure = rp.mttf_hours / (rp.group_size + 1)
    return exposure / p


@dataclass(frozen=True)
class MtdiReport:
    """Side-by-side reliability figures for one (alpha, G) configuration."""

    alpha: int
    group_size: int
    mtdi_naive_hours: float
    mttf_group_hours: float
    p_double: float
    mtdi_grouped_hours: float
    standby_count: int
    overhead_fraction: float

    @property
    def total_fls(self) -> int:
        return self.alpha + self.standby_count

    @property
    def mtdi_grouped_days(self) -> float:
        return self.mtdi_grouped_hours / 24.0


def mtdi_grouped(rp: ReliabilityParams, alpha: int) -> MtdiReport:
    """Analytic MTDI of a grouped swarm plus its standby overhead.

    With ``alpha/G`` groups each surviving ``mttf_group``, some group
    degrades every ``G * mttf_group / alpha`` on average.  Standbys are
    one per group, ``ceil(alpha / G)`` in total.
    """
    if alpha < 1:
        raise ValueError(f"alpha={alpha} must be >= 1")
    group_hours = mttf_group(rp)
    standby_count = -(-alpha // rp.group_size)
    return MtdiReport(
        alpha=alpha,
        group_size=rp.group_size,
        mtdi_naive_hours=mtdi_naive(rp.mttf_hours, alpha),
        mttf_group_hours=group_hours,
        p_double=double_failure_probability(rp),
        mtdi_grouped_hours=rp.group_size * group_hours / alpha,
        standby_count=standby_count,
        overhead_fraction=standby_count / alpha,
    )


@dataclass(frozen=True)
class ReliabilityGroup:
    """G proximate display points protected by one standby.

    ``member_ids`` index into the source cloud.  Payloads are opaque
    per-member blobs (flight path plus lighting data); once attached, the
    standby carries either their XOR (zero-padded to the longest, original
    lengths kept alongside) or full copies.
    """

    group_id: int
    member_ids: tuple[int, ...]
    member_points: tuple[DisplayPoint, ...]
    standby_position: tuple[float, float, float]
    scheme: str = PARITY
    payloads: tuple[bytes, ...] | None = None
    payload_lengths: tuple[int, ...] | None = None
    standby_payload: bytes | tuple[bytes, ...] | None = None

    @property
    def size(self) -> int:
        return len(self.member_ids)

    def with_payloads(self, payloads: list[bytes] | tuple[bytes, ...]) -> "ReliabilityGroup":
        """Attach member payloads and derive the standby's protection blob."""
        if len(payloads) != self.size:
            raise ValueError(
                f"group {self.group_id} has {self.size} members, got {len(payloads)} payloads"
            )
        payloads = tuple(bytes(p) for p in payloads)
        if self.scheme == PARITY:
            standby: bytes | tuple[bytes, ...] = parity_encode(payloads)
        elif self.scheme == REPLICATION:
            standby = payloads
        else:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        return replace(
            self,
            payloads=payloads,
            payload_lengths=tuple(len(p) for p in payloads),
            standby_payload=standby,
        )

    def reconstruct_member(self, member_id: int, failed_ids: set[int] | frozenset[int]) -> bytes:
        """Recover the payload of one failed member from the standby's data.

        ``failed_ids`` is the set of members currently unavailable; under
        parity more than one missing member is unrecoverable until the
        orchestrator's replacements arrive with fresh data.
        """
        if self.payloads is None or self.standby_payload is None:
            raise ValueError(f"group {self.group_id} has no payloads attached")
        if member_id not in self.member_ids:
            raise ValueError(f"FLS {member_id} is not a member of group {self.group_id}")
        slot = self.member_ids.index(member_id)
        if self.scheme == REPLICATION:
            return self.standby_payload[slot]
        missing = failed_ids & set(self.member_ids)
        if len(missing) > 1:
            raise MultiFailureError(
                f"group {self.group_id}: {len(missing)} members missing; "
                "must wait for orchestrator-dispatched replacements"
            )
        surviving = [p for i, p in enumerate(self.payloads) if i != slot]
        return parity_reconstruct(
            self.standby_payload,
            surviving,
            original_length=self.payload_lengths[slot],
        )


def parity_encode(payloads) -> bytes:
    """XOR-fold member payloads into one parity blob.

    Shorter payloads are zero-padded to the longest, so the parity length
    equals the longest member's.
    """
    payloads = list(payloads)
    if not payloads:
        raise ValueError("cannot encode parity of zero payloads")
    return kernels.xor_fold(payloads)


def parity_reconstruct(parity: bytes, surviving, original_length: int | None = None) -> bytes:
    """Recover the single missing payload from the parity and all survivors.

    With the XOR of everything in hand, folding the survivors back in
    leaves exactly the missing blob (zero-padded); ``original_length``
    trims the padding back off.
    """
    blob = kernels.xor_fold([parity, *surviving])
    if original_length is not None:
        if original_length > len(blob):
            raise ValueError(
                f"original_length={original_length} exceeds parity width {len(blob)}"
            )
        if any(blob[original_length:]):
            raise ValueError("non-zero padding after the declared payload length")
        blob = blob[:original_length]
    return blob


_REFINE_AUTO_LIMIT = 512


def form_groups(
    cloud: PointCloud, group_size: int, scheme: str = PARITY, refine: bool | None = None
) -> list[ReliabilityGroup]:
    """Partition a cloud into proximity groups of at most ``group_size``.

    Greedy construction: walk the points in Morton order, seed a group
    from the first unassigned point, and pull in its nearest unassigned
    neighbors by Euclidean distance.  The seeding pass is followed by a
    deterministic local-improvement pass (single-point moves and swaps
    between groups) that repairs the seeding order's worst mistakes; it is
    quadratic in the group count, so by default it runs only for clouds of
    up to 512 points.  The group count is always ``ceil(n / group_size)``
    and no group exceeds ``group_size``; the standby hovers at the member
    centroid.
    """
    if scheme not in (PARITY, REPLICATION):
        raise ValueError(f"unknown scheme {scheme!r}")
    coords = [p.coord for p in cloud.points]
    assignment = kernels.greedy_group_assign(coords, group_size)
    if not assignment:
        return []
    members: dict[int, list[int]] = {}
    for point_index, gid in enumerate(assignment):
        members.setdefault(gid, []).append(point_index)
    grouping = [members[gid] for gid in sorted(members)]
    if refine or (refine is None and len(coords) <= _REFINE_AUTO_LIMIT):
        _refine_groups(coords, grouping, group_size)
    groups = []
    for gid, ids in enumerate(grouping):
        ids = tuple(sorted(ids))
        pts = tuple(cloud.points[i] for i in ids)
        centroid = (
            sum(p.l for p in pts) / len(pts),
            sum(p.h for p in pts) / len(pts),
            sum(p.d for p in pts) / len(pts),
        )
        groups.append(
            ReliabilityGroup(
                group_id=gid,
                member_ids=ids,
                member_points=pts,
                standby_position=centroid,
                scheme=scheme,
            )
        )
    return groups


def _refine_groups(coords, grouping: list[list[int]], g: int, max_passes: int = 32) -> None:
    """Greedy descent on total intra-group distance.

    Group pairs are improved by single-point moves and swaps; when the
    combined membership is small enough, pairs and triples of groups are
    re-partitioned exactly instead, which escapes the rotation-shaped
    local optima the seeding order leaves behind.  Group count and the
    size cap are preserved; memberships may end up balanced differently
    than the seeding pass left them.  Deterministic: fixed scan order,
    strict improvement only.
    """

    def dist(p: int, q: int) -> float:
        (px, py, pz), (qx, qy, qz) = coords[p], coords[q]
        return math.sqrt((px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2)

    def sum_dist(p: int, members: list[int], skip: int = -1) -> float:
        return sum(dist(p, q) for q in members if q != p and q != skip)

    def intra(members) -> float:
        total = 0.0
        for ai in range(len(members)):
            for bi in range(ai + 1, len(members)):
                total += dist(members[ai], members[bi])
        return total

    def exact_repartition(indices: list[int]) -> bool:
        # brute-force the union of a few groups into the same number of
        # non-empty groups of at most g, keeping the best arrangement
        union = sorted(p for i in indices for p in grouping[i])
        slots = len(indices)
        current = sum(intra(grouping[i]) for i in indices)
        best = current - 1e-9
        best_parts = None
        parts: list[list[int]] = [[] for _ in range(slots)]

        def rec(pos: int, used: int):
            nonlocal best, best_parts
            if pos == len(union):
                if used == slots:
                    total = sum(intra(part) for part in parts)
                    if total < best:
                        best = total
                        best_parts = [list(part) for part in parts]
                return
            p = union[pos]
            for s in range(min(used + 1, slots)):
                if len(parts[s]) >= g:
                    continue
                parts[s].append(p)
                rec(pos + 1, used + 1 if s == used else used)
                parts[s].pop()

        rec(0, 0)
        if best_parts is None:
            return False
        for i, part in zip(indices, best_parts):
            grouping[i] = part
        return True

    def pair_moveswap(i: int, j: int) -> bool:
        a_members, b_members = grouping[i], grouping[j]
        best_delta = -1e-9
        best_op = None
        if len(b_members) < g and len(a_members) > 1:
            for a in a_members:
                delta = sum_dist(a, b_members) - sum_dist(a, a_members)
                if delta < best_delta:
                    best_delta, best_op = delta, ("move", a, i, j)
        if len(a_members) < g and len(b_members) > 1:
            for b in b_members:
                delta = sum_dist(b, a_members) - sum_dist(b, b_members)
                if delta < best_delta:
                    best_delta, best_op = delta, ("move", b, j, i)
        for a in a_members:
            for b in b_members:
                delta = (
                    sum_dist(b, a_members, skip=a)
                    - sum_dist(a, a_members)
                    + sum_dist(a, b_members, skip=b)
                    - sum_dist(b, b_members)
                )
                if delta < best_delta:
                    best_delta, best_op = delta, ("swap", a, b, i, j)
        if best_op is None:
            return False
        if best_op[0] == "move":
            _, p, src, dst = best_op
            grouping[src].remove(p)
            grouping[dst].append(p)
        else:
            _, a, b, gi, gj = best_op
            grouping[gi][grouping[gi].index(a)] = b
            grouping[gj][grouping[gj].index(b)] = a
        return True

    m = len(grouping)
    pair_exact = 2 * g <= 12
    triple_exact = 3 * g <= 10 and m >= 3
    for _ in range(max_passes):
        improved = False
        for i in range(m):
            for j in range(i + 1, m):
                if pair_exact:
                    improved |= exact_repartition([i, j])
                else:
                    improved |= pair_moveswap(i, j)
        if triple_exact:
            for i in range(m):
                for j in range(i + 1, m):
                    for k in range(j + 1, m):
                        improved |= exact_repartition([i, j, k])
        if not improved:
            return

import math
import random
from fractions import Fraction

import pytest

from flsim.model import DisplayPoint, PointCloud, ReliabilityParams
from flsim.reliability import (
    ModelDomainError,
    MultiFailureError,
    form_groups,
    mtdi_grouped,
    mtdi_naive,
    mttf_group,
    parity_encode,
    parity_reconstruct,
)
from oracles import best_partition_cost, pairwise_total

ROSE = 65321


def grid_cloud(n, extent=10):
    pts = []
    i = 0
    while len(pts) < n:
        pts.append(DisplayPoint(i % extent, (i // extent) % extent, i // (extent * extent)))
        i += 1
    return PointCloud(points=tuple(pts))


# -- closed-form analytics ----------------------------------------------------


def test_mtdi_naive_rose_is_about_forty_seconds():
    hours = mtdi_naive(720.0, ROSE)
    assert hours * 3600 == pytest.approx(39.68, abs=0.01)


def test_mtdi_naive_simple_cases():
    assert mtdi_naive(720.0, 1) == 720.0
    assert mtdi_naive(100.0, 4) == 25.0
    with pytest.raises(ValueError):
        mtdi_naive(100.0, 0)


def test_mttf_group_oracle_g10():
    # independent evaluation with exact rationals: (720/11)^2 / (1/3600)
    expected = Fraction(720, 11) ** 2 * 3600
    got = mttf_group(ReliabilityParams(mttf_hours=720, mttr_s=1, group_size=10))
    assert got == pytest.approx(float(expected), rel=1e-12)
    assert got == pytest.approx(1.5423e7, rel=1e-4)


def test_mttf_group_oracle_g20():
    expected = Fraction(720, 21) ** 2 * 3600
    got = mttf_group(ReliabilityParams(mttf_hours=720, mttr_s=1, group_size=20))
    assert got == pytest.approx(float(expected), rel=1e-12)
    assert got == pytest.approx(4.2318e6, rel=1e-4)


def test_mttf_group_p_equals_one_boundary():
    # repair time equal to the re-failure window leaves the group exposed
    # the whole time: the group lives exactly one window
    mttf, g = 11.0, 10
    window_s = mttf / (g + 1) * 3600
    rp = ReliabilityParams(mttf_hours=mttf, mttr_s=window_s, group_size=g)
    assert mttf_group(rp) == pytest.approx(mttf / (g + 1))
    too_slow = ReliabilityParams(mttf_hours=mttf, mttr_s=window_s * 1.01, group_size=g)
    with pytest.raises(ModelDomainError):
        mttf_group(too_slow)


def test_mtdi_grouped_report_fields():
    rp = ReliabilityParams(mttf_hours=720, mttr_s=1, group_size=10)
    report = mtdi_grouped(rp, ROSE)
    assert report.standby_count == 6533  # ceil(65321/10)
    assert report.total_fls == ROSE + 6533
    assert report.overhead_fraction == pytest.approx(0.10001, abs=1e-4)
    assert report.mtdi_grouped_hours == pytest.approx(
        10 * mttf_group(rp) / ROSE, rel=1e-12
    )
    assert report.mtdi_naive_hours == pytest.approx(720 / ROSE)
    assert 0 <= report.p_double <= 1


def test_mtdi_grouped_monotonicity():
    base = dict(mttf_hours=720, mttr_s=1, group_size=10)
    mtdi = lambda **kw: mtdi_grouped(ReliabilityParams(**{**base, **kw}), 1000).mtdi_grouped_hours
    assert mtdi(mttr_s=2) < mtdi(mttr_s=1)
    assert mtdi_grouped(ReliabilityParams(**base), 2000).mtdi_grouped_hours < mtdi_grouped(
        ReliabilityParams(**base), 1000
    ).mtdi_grouped_hours
    assert mttf_group(ReliabilityParams(720, 1, 20)) < mttf_group(ReliabilityParams(720, 1, 10))


def test_mtdi_diverges_as_repair_becomes_instant():
    rp = lambda mttr: ReliabilityParams(mttf_hours=720, mttr_s=mttr, group_size=10)
    # any bound is exceeded for a small enough repair time, and p vanishes
    for bound, mttr in ((1e9, 1e-6), (1e15, 1e-12)):
        report = mtdi_grouped(rp(mttr), ROSE)
        assert report.mtdi_grouped_hours > bound
    assert mtdi_grouped(rp(1e-12), ROSE).p_double < 1e-12


# -- parity ---------------------------------------------------------------------


def test_parity_single_and_self_inverse():
    assert parity_encode([b"payload"]) == b"payload"
    assert parity_encode([b"x" * 9, b"x" * 9]) == b"\x00" * 9
    assert parity_encode([bytes([0x0F]), bytes([0xF0]), bytes([0xFF])]) == b"\x00"


def test_parity_empty_rejected():
    with pytest.raises(ValueError):
        parity_encode([])


def test_parity_reconstruct_identities():
    a, b, c = b"alpha", b"br", b"charlie!"
    parity = parity_encode([a, b, c])
    assert parity_reconstruct(parity, [a, b], original_length=len(c)) == c
    assert parity_reconstruct(parity, [b, c], original_length=len(a)) == a
    assert parity_reconstruct(parity_encode([a]), [], original_length=len(a)) == a


def test_parity_roundtrip_property_hundred_trials():
    rng = random.Random(17)
    for _ in range(100):
        payloads = [rng.randbytes(rng.randint(0, 256)) for _ in range(rng.randint(1, 12))]
        parity = parity_encode(payloads)
        for missing in range(len(payloads)):
            survivors = payloads[:missing] + payloads[missing + 1:]
            rebuilt = parity_reconstruct(
                parity, survivors, original_length=len(payloads[missing])
            )
            assert rebuilt == payloads[missing]


def test_group_reconstruct_and_multi_failure():
    cloud = grid_cloud(6)
    group = form_groups(cloud, 3)[0].with_payloads([b"one", b"two2", b"three33"])
    m0, m1, m2 = group.member_ids
    assert group.reconstruct_member(m1, {m1}) == b"two2"
    with pytest.raises(MultiFailureError):
        group.reconstruct_member(m1, {m0, m1})


def test_group_replication_scheme():
    cloud = grid_cloud(4)
    group = form_groups(cloud, 2, scheme="replication")[0]
    group = group.with_payloads([b"aa", b"bb"])
    m0, m1 = group.member_ids
    # replication keeps full copies, so even multiple failures recover
    assert group.reconstruct_member(m0, {m0, m1}) == b"aa"
    assert group.standby_payload == (b"aa", b"bb")


# -- group formation ---------------------------------------------------------------


def test_form_groups_collinear_pairs():
    cloud = PointCloud(points=tuple(DisplayPoint(i, 0, 0) for i in range(4)))
    groups = form_groups(cloud, 2)
    assert sorted(g.member_ids for g in groups) == [(0, 1), (2, 3)]


def test_form_groups_singleton():
    cloud = PointCloud(points=(DisplayPoint(3, 1, 4),))
    groups = form_groups(cloud, 5)
    assert len(groups) == 1
    assert groups[0].member_ids == (0,)
    assert groups[0].standby_position == (3.0, 1.0, 4.0)


def test_form_groups_two_triangles():
    pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (50, 50, 50), (51, 50, 50), (50, 51, 50)]
    cloud = PointCloud(points=tuple(DisplayPoint(*p) for p in pts))
    groups = form_groups(cloud, 3)
    assert sorted(g.member_ids for g in groups) == [(0, 1, 2), (3, 4, 5)]


def test_form_groups_partition_and_standby_count():
    rng = random.Random(23)
    for _ in range(30):
        n = rng.randint(0, 80)
        cloud = grid_cloud(n)
        g = rng.randint(1, 7)
        groups = form_groups(cloud, g)
        assert len(groups) == (-(-n // g) if n else 0)
        covered = sorted(i for grp in groups for i in grp.member_ids)
        assert covered == list(range(n))
        assert all(grp.size <= g for grp in groups)


def test_form_groups_centroid_standby():
    cloud = PointCloud(points=(DisplayPoint(0, 0, 0), DisplayPoint(2, 4, 6)))
    (group,) = form_groups(cloud, 2)
    assert group.standby_position == (1.0, 2.0, 3.0)


def test_greedy_close_to_bruteforce_small_scale():
    rng = random.Random(404)
    for _ in range(60):
        n = rng.randint(1, 9)
        g = rng.randint(1, 3)
        extent = rng.choice([3, 5, 12])
        seen = set()
        while len(seen) < min(n, extent ** 3):
            seen.add((rng.randrange(extent), rng.randrange(extent), rng.randrange(extent)))
        pts = sorted(seen)
        cloud = PointCloud(points=tuple(DisplayPoint(*p) for p in pts))
        groups = form_groups(cloud, g)
        mine = sum(pairwise_total(pts, grp.member_ids) for grp in groups)
        best = best_partition_cost(pts, g)
        if best > 1e-9:
            assert mine <= 1.25 * best
        else:
            assert mine <= 1e-9

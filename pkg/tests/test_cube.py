import math

import numpy as np
import pytest

from metriq.core import MetricSpace, validate_metric
from metriq.cube import (
    check_sandwich,
    cube_qs_certify_lower,
    cube_qs_construct,
)
from metriq.errors import CapacityError, ParameterError, StructuralError
from metriq.generators import hypercube_metric
from metriq.quotient import Partition, QuotientSpace


def popcount(x):
    return bin(int(x)).count("1")


def all_singleton_quotient(d):
    base = hypercube_metric(d)
    blocks = tuple((i,) for i in range(2**d))
    return QuotientSpace(Partition(base, blocks), base, "Q")


def test_net_is_separated_and_maximal():
    res = cube_qs_construct(10, 0.2)
    A = res.A
    r = res.r
    for i in range(A.size):
        for j in range(i + 1, A.size):
            assert popcount(A[i] ^ A[j]) >= 2 * r + 1
    # maximality: every cube point is within 2r of some center
    pts = np.arange(2**10)
    mind = np.full(2**10, 99)
    for a in A:
        np.minimum(mind, np.vectorize(popcount)(pts ^ a), out=mind)
    assert mind.max() <= 2 * r


def test_block_count_and_survivor_rule():
    res = cube_qs_construct(10, 0.2)
    assert res.block_count >= (1 - 0.2) * 2**10
    # survivors are exactly the centers and the points outside every punctured ball
    for x, da in zip(res.S[:200], res.dA[:200]):
        assert da == 0 or da > res.r // 2


def test_materialized_quotient_consistent_with_closed_form():
    res = cube_qs_construct(10, 0.2)
    q = res.quotient()
    assert q.metric.n == res.block_count
    assert validate_metric(q.metric).ok
    sing = res.singletons
    rng = np.random.default_rng(0)
    for _ in range(200):
        i, j = rng.integers(0, sing.size, 2)
        if i == j:
            continue
        assert q.metric.d(int(i), int(j)) == res.udist(int(sing[i]), int(sing[j]))
    # last block is the collapsed net
    assert q.blocks[-1] == tuple(int(a) for a in res.A)
    assert q.metric.d(0, q.metric.n - 1) == res.udist_to_block(int(sing[0]))


def test_sandwich_on_sampled_pairs():
    res = cube_qs_construct(10, 0.2)
    assert check_sandwich(res, samples=5000, seed=1)


def test_certificate_below_traced_bound():
    res = cube_qs_construct(10, 0.2)
    assert res.certified_bound == pytest.approx(8.0 * math.sqrt(math.e * res.r / (math.e - 1)))
    assert res.report.distortion <= res.certified_bound + 1e-9


def test_p_below_two_bound():
    res = cube_qs_construct(10, 0.2, p=1.5, seed=2)
    assert res.report.distortion <= res.certified_bound + 1e-9
    assert check_sandwich(res, samples=2000, seed=3)


def test_parameter_errors():
    with pytest.raises(ParameterError):
        cube_qs_construct(10, 0.3)
    with pytest.raises(ParameterError):
        cube_qs_construct(10, 2.0**-11)
    with pytest.raises(CapacityError):
        cube_qs_construct(23, 0.2)
    with pytest.raises(ParameterError):
        cube_qs_construct(10, 0.2, p=2.5)


def test_certify_lower_identity_quotient():
    r, bound = cube_qs_certify_lower(all_singleton_quotient(9))
    assert r == 9
    assert bound == pytest.approx(math.sqrt(3.0))


def test_certify_lower_collapsed_origin():
    from metriq.quotient import quotient_metric

    base = hypercube_metric(9)
    merged = ((0, 1),) + tuple((i,) for i in range(2, 2**9))
    qm = quotient_metric(base, merged)
    r, bound = cube_qs_certify_lower(qm)
    # farthest singleton from {0, 1} is at Hamming distance 8, so r = 7, m = 2
    assert r == 7
    assert bound == pytest.approx(2.0**0.5)


def test_certify_lower_p1_is_trivial():
    r, bound = cube_qs_certify_lower(all_singleton_quotient(6), p=1.0)
    assert r == 6 and bound == 1.0


def test_certify_lower_small_radius_gives_zero():
    base = hypercube_metric(4)
    from metriq.quotient import quotient_by_subset

    q = quotient_by_subset(base, [0, 15])  # punctures both ends
    r, bound = cube_qs_certify_lower(q)
    assert bound == 0.0 or r >= 3


def test_certify_lower_on_construct_result_is_consistent():
    res = cube_qs_construct(10, 0.2)
    r, bound = cube_qs_certify_lower(res)
    assert 0 <= r <= 10
    # a valid lower bound can never exceed the measured upper certificate
    assert bound <= res.report.distortion + 1e-9


def test_certify_lower_rejects_non_cube():
    m = MetricSpace(2.0 * np.ones((4, 4)) - 2.0 * np.eye(4))
    q = QuotientSpace(Partition(m, tuple((i,) for i in range(4))), m, "Q")
    with pytest.raises(StructuralError):
        cube_qs_certify_lower(q)
    m3 = MetricSpace(np.ones((3, 3)) - np.eye(3))
    q3 = QuotientSpace(Partition(m3, tuple((i,) for i in range(3))), m3, "Q")
    with pytest.raises(StructuralError):
        cube_qs_certify_lower(q3)  # size not a power of two

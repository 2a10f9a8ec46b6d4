import numpy as np
import pytest

from metriq.core import MetricSpace
from metriq.errors import StructuralError
from metriq.hst import (
    HstTree,
    hst_from_json,
    hst_from_ultrametric,
    hst_to_json,
    hst_to_metric,
    is_ultrametric,
    leaf,
    line_um_lower_bound,
    ultrametric_to_l2,
    validate_khst,
)

from conftest import random_metric


def two_level_tree():
    return HstTree(4.0, (HstTree(1.0, (leaf(0), leaf(1))), HstTree(2.0, (leaf(2), leaf(3)))))


def random_hst(rng, n_leaves, k=1.0):
    """Random tree over leaf ids 0..n-1 with labels decreasing by factor >= k."""
    ids = list(rng.permutation(n_leaves))

    def build(ids, delta):
        if len(ids) == 1:
            return leaf(ids[0])
        cut = int(rng.integers(1, len(ids)))
        child_delta = delta / (k * float(rng.uniform(1.0, 2.0)))
        parts = [ids[:cut], ids[cut:]]
        children = tuple(
            leaf(p[0]) if len(p) == 1 else build(p, child_delta) for p in parts
        )
        return HstTree(delta, children)

    return build(ids, 8.0)


def test_leaf_invariants():
    with pytest.raises(StructuralError):
        HstTree(1.0, (), 0)  # leaf with nonzero label
    with pytest.raises(StructuralError):
        HstTree(0.0, ())  # internal with no children
    with pytest.raises(StructuralError):
        HstTree(-1.0, (leaf(0),))


def test_leaves_in_order():
    assert two_level_tree().leaves() == [0, 1, 2, 3]


def test_validate_khst():
    t = two_level_tree()
    assert validate_khst(t, 2.0).ok
    assert not validate_khst(t, 3.0).ok  # 2.0 > 4.0/3
    dup = HstTree(2.0, (leaf(0), leaf(0)))
    assert any(v[0] == "duplicate-leaf" for v in validate_khst(dup, 1.0).violations)


def test_hst_to_metric_hand_example():
    m = hst_to_metric(two_level_tree())
    assert m.d(0, 1) == 1.0
    assert m.d(2, 3) == 2.0
    assert m.d(0, 2) == m.d(1, 3) == 4.0
    assert is_ultrametric(m)


def test_hst_to_metric_requires_id_permutation():
    with pytest.raises(StructuralError):
        hst_to_metric(HstTree(1.0, (leaf(0), leaf(2))))


def test_is_ultrametric_rejects_generic_metrics():
    assert not is_ultrametric(random_metric(6, 0))


def test_ultrametric_round_trip_random_trees():
    rng = np.random.default_rng(5)
    for _ in range(25):
        t = random_hst(rng, int(rng.integers(2, 10)))
        m = hst_to_metric(t)
        t2 = hst_from_ultrametric(m)
        assert np.array_equal(hst_to_metric(t2).dist, m.dist)


def test_hst_from_ultrametric_rejects_non_ultrametric():
    with pytest.raises(StructuralError):
        hst_from_ultrametric(random_metric(5, 1))


def test_ultrametric_to_l2_is_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        t = random_hst(rng, int(rng.integers(2, 9)))
        m = hst_to_metric(t)
        v = ultrametric_to_l2(t)
        assert v.shape[0] == m.n
        assert v.shape[1] <= 2 * m.n - 1
        d = np.sqrt(((v[:, None, :] - v[None, :, :]) ** 2).sum(axis=2))
        assert np.abs(d - m.dist).max() < 1e-9


def test_ultrametric_to_l2_single_point():
    v = ultrametric_to_l2(leaf(0))
    assert v.shape[0] == 1


def test_line_um_lower_bound():
    assert line_um_lower_bound([0.0, 1.0, 2.0, 3.0]) == 3.0
    assert line_um_lower_bound([0.0, 2.0, 3.0]) == 1.5
    with pytest.raises(StructuralError):
        line_um_lower_bound([1.0, 1.0])


def test_scale():
    t = two_level_tree().scale(2.0)
    assert t.delta == 8.0
    assert hst_to_metric(t).d(0, 1) == 2.0


def test_json_round_trip():
    t = two_level_tree()
    t2 = hst_from_json(hst_to_json(t))
    assert np.array_equal(hst_to_metric(t2).dist, hst_to_metric(t).dist)

import math

import numpy as np
import pytest

from metriq.constructions import (
    aspect_quotient,
    check_coloring_result,
    coloring_partition,
    composition_qs,
    find_m_center,
    find_star_quotient,
    hst_from_m_centered,
    is_m_center,
    m_center_quotient,
    q2_lacunary,
    q_dichotomy,
    ts_sets,
    weighted_coloring_partition,
)
from metriq.core import (
    Equilateral,
    MetricSpace,
    hausdorff,
    nearest_radii,
    realize_special,
    validate_metric,
)
from metriq.errors import ParameterError
from metriq.generators import gen_padded_copies, random_composition_tree
from metriq.hst import hst_to_metric, validate_khst
from metriq.quotient import distortion_between

from conftest import random_metric


# --- m-centers -------------------------------------------------------------


def brute_is_m_center(m, x, mparam):
    """Definition scan: x lies in every ball (any center, any realized radius)
    of cardinality >= mparam."""
    for y in range(m.n):
        for rad in sorted(set(m.dist[y])):
            ball = set(np.flatnonzero(m.dist[y] <= rad))
            if len(ball) >= mparam and x not in ball:
                return False
    return True


def test_is_m_center_matches_definition_scan():
    rng = np.random.default_rng(0)
    for trial in range(20):
        m = random_metric(int(rng.integers(3, 9)), 50 + trial)
        for mparam in (1.0, 2.0, 3.5, float(m.n), float(m.n + 1)):
            for x in range(m.n):
                assert is_m_center(m, x, mparam) == brute_is_m_center(m, x, mparam)


def test_every_point_centers_equilateral():
    m = realize_special(Equilateral(6, 1.0))
    for x in range(6):
        assert is_m_center(m, x, 3.0)


def test_find_m_center_lowest_index():
    m = realize_special(Equilateral(4, 1.0))
    assert find_m_center(m, 2.0) == 0


def test_mparam_above_n_is_vacuous():
    m = random_metric(5, 1)
    assert is_m_center(m, 0, 6.0)
    assert find_m_center(m, 6.0) == 0


def test_m_center_quotient_invariants():
    for s in range(10):
        m = random_metric(80, 300 + s)
        eps = 0.25
        T, q, attempts = m_center_quotient(m, eps, seed=s)
        assert len(T) <= eps * m.n + 1e-12
        assert q.metric.n == m.n - len(T) + 1
        assert q.blocks[-1] == tuple(T)
        mparam = 2.0 * math.log(2.0 / eps) / eps
        assert is_m_center(q.metric, q.metric.n - 1, mparam)


def test_hst_from_m_centered_certificate():
    m = realize_special(Equilateral(7, 2.0))
    t, rep = hst_from_m_centered(m, 3)
    assert t.delta == m.diameter()
    assert rep.contraction <= 1.0 + 1e-12
    assert rep.distortion <= 6.0 + 1e-9
    assert validate_metric(hst_to_metric(t)).ok


def test_hst_from_m_centered_rejects_bad_mparam():
    m = random_metric(5, 2)
    with pytest.raises(ParameterError):
        hst_from_m_centered(m, 1)


# --- ts_sets ---------------------------------------------------------------


def test_ts_sets_nearest_neighbor_property():
    m = random_metric(60, 4)
    S, T, attempts = ts_sets(m, seed=5)
    assert len(T) >= m.n / 4
    r = nearest_radii(m)
    Sset = set(S)
    for x in T:
        assert x not in Sset
        assert min(m.d(x, s) for s in S) == r[x]


# --- colorings -------------------------------------------------------------


def random_coloring(rng, n, k):
    chi = rng.integers(1, k + 1, size=(n, n))
    chi = np.minimum(chi, chi.T)
    np.fill_diagonal(chi, 0)
    return chi


def test_coloring_partition_invariants():
    rng = np.random.default_rng(6)
    for trial in range(20):
        n = int(rng.integers(4, 64))
        k = int(rng.integers(1, 4))
        chi = random_coloring(rng, n, k)
        res = coloring_partition(n, chi, seed=trial)
        assert res.s >= 2
        assert check_coloring_result(chi, res)


def test_coloring_single_color_gives_all_singletons():
    n = 8
    chi = np.ones((n, n), dtype=int)
    np.fill_diagonal(chi, 0)
    res = coloring_partition(n, chi, seed=0)
    assert res.s == n and res.ell == 1
    assert check_coloring_result(chi, res)


def test_check_coloring_result_catches_bad_blocks():
    n = 4
    chi = np.array([[0, 1, 2, 2], [1, 0, 2, 2], [2, 2, 0, 1], [2, 2, 1, 0]])
    from metriq.constructions import ColoringResult

    good = ColoringResult(((0, 1), (2, 3)), 2)
    assert check_coloring_result(chi, good)
    bad = ColoringResult(((0, 2), (1, 3)), 2)  # cross pairs contain color 1
    assert not check_coloring_result(chi, bad)


def test_weighted_coloring_heavy_pair():
    n = 6
    chi = random_coloring(np.random.default_rng(7), n, 2)
    w = np.array([100.0, 100.0, 0.1, 0.1, 0.1, 0.1])
    res, sigma, ok = weighted_coloring_partition(n, chi, w, seed=8)
    assert ok
    assert sigma == 1.0 / (8.0 * 2 * math.log(3.0))
    total = w.sum()
    ssum = sum(w[list(b)].max() ** sigma for b in res.blocks)
    assert ssum >= total**sigma - 1e-9


# --- aspect quotients ------------------------------------------------------


def test_aspect_quotient_band_and_model():
    for s in range(5):
        m = random_metric(40, 400 + s)
        res = aspect_quotient(m, 2.0, seed=s)
        lo, hi = res.band
        cross = res.quotient.metric.dist[np.triu_indices(res.quotient.metric.n, k=1)]
        assert np.all(cross >= lo - 1e-9) and np.all(cross <= hi + 1e-9)
        assert res.report.distortion <= 2.0 + 1e-9


def test_aspect_quotient_lipschitz_checks_hausdorff():
    m = random_metric(30, 5)
    res = aspect_quotient(m, 2.0, lipschitz=True, seed=9)
    lo, hi = res.band
    for i in range(len(res.quotient.blocks)):
        for j in range(i + 1, len(res.quotient.blocks)):
            h = hausdorff(m, res.quotient.blocks[i], res.quotient.blocks[j])
            assert lo - 1e-9 <= h <= hi + 1e-9


def test_aspect_quotient_rejects_bad_alpha():
    with pytest.raises(ParameterError):
        aspect_quotient(random_metric(5, 1), 2.5)


# --- star quotients --------------------------------------------------------


def padded_pairs(copies=12, beta=5.0):
    base = MetricSpace(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return gen_padded_copies(base, copies, beta=beta)


def test_find_star_quotient_structure():
    m = padded_pairs()
    res = find_star_quotient(m, 0.8, 1.3, 1.8, seed=9)
    q = res.quotient
    d_root = q.metric.dist[0, 1:]
    assert np.all(d_root >= 0.8 - 1e-9) and np.all(d_root < 1.3 + 1e-9)
    assert 0 < res.tau <= 2.0 + 1e-12
    assert res.report.distortion <= 1.8 + 1e-9


def test_find_star_quotient_rejects_bad_band():
    m = padded_pairs()
    with pytest.raises(ParameterError):
        find_star_quotient(m, 1.0, 2.5, 2.0)  # b >= 2a


# --- dichotomy and q2 ------------------------------------------------------


def test_q_dichotomy_certificate():
    for s in range(5):
        m = random_metric(50, 500 + s)
        res = q_dichotomy(m, 1.0, 1.5, 2.0, seed=s)
        assert res.branch in ("lacunary", "star")
        recomputed = distortion_between(
            res.quotient.metric,
            realize_special(res.model)
            if res.branch == "lacunary"
            else res.quotient.metric,  # star model is scale-checked below
        )
        if res.branch == "lacunary":
            assert abs(recomputed.distortion - res.report.distortion) < 1e-9
            assert res.report.distortion <= 2.0 + 1e-9


def test_q_dichotomy_drop_root_is_sq():
    m = padded_pairs()
    res = q_dichotomy(m, 1.0, 1.5, 2.0, seed=10, drop_root=True)
    if res.branch == "star":
        assert res.quotient.provenance == "SQ"
        assert isinstance(res.model, Equilateral)


def test_q2_lacunary_certificate_and_order():
    for s in range(5):
        m = random_metric(60, 600 + s)
        q, rep, model, attempts = q2_lacunary(m, seed=s)
        assert q.metric.n >= m.n / 4 + 1
        assert rep.distortion <= 2.0 + 1e-9
        recomputed = distortion_between(q.metric, realize_special(model))
        assert abs(recomputed.distortion - rep.distortion) < 1e-12
        # blocks: singletons by decreasing nearest radius, collapsed set last
        r = nearest_radii(m)
        radii = [r[b[0]] for b in q.blocks[:-1]]
        assert radii == sorted(radii, reverse=True)


# --- composition -----------------------------------------------------------


def test_composition_qs_certificates():
    for s in range(6):
        tree = random_composition_tree(2, seed=700 + s, beta=4.0)
        res = composition_qs(tree, 2.0, 1.5, seed=s)
        assert validate_khst(res.hst, 2.0).ok
        assert res.report.distortion <= res.alpha_bound + 1e-9
        assert res.sigma_ok
        recomputed = distortion_between(res.quotient.metric, hst_to_metric(res.hst))
        assert abs(recomputed.distortion - res.report.distortion) < 1e-12


def test_composition_qs_rejects_small_beta():
    tree = random_composition_tree(1, seed=11, beta=2.0)
    with pytest.raises(ParameterError):
        composition_qs(tree, 2.0, 1.5, seed=0)  # alpha*k = 3 > beta = 2

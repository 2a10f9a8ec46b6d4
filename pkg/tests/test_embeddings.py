import math

import numpy as np
import pytest

from metriq.core import Equilateral, Star, realize_special, validate_metric
from metriq.embeddings import (
    TruncatedMetricSpec,
    bourgain_embed,
    cms_sample,
    embedding_to_json,
    induced_metric,
    pipeline_quotient_then_embed,
    pstable_distance,
    pstable_embed,
    pstable_envelope_fit,
    pstable_expectation,
    snowflake_sqrt_embed,
    star_poincare_lower,
    star_to_lp,
    truncated_gauss_distance,
    truncated_gauss_embed,
    truncation_witness,
    truncation_witness_bound,
    uptolog_embed,
    witness_search_distortion,
)
from metriq.errors import CapacityError, NoMCenterError, ParameterError
from metriq.generators import hypercube_metric

from conftest import random_metric


# --- random-subset embedding -----------------------------------------------


def test_bourgain_exact_non_expanding_and_weighted():
    m = realize_special(Equilateral(6, 1.0))
    emb, rep = bourgain_embed(m, 3.0, 2.0, "exact")
    assert emb.weights.sum() <= 1.0 + 1e-12
    ind = induced_metric(emb)
    assert np.all(ind.dist <= m.dist + 1e-9)
    # coordinate weight depends only on subset size
    sizes = {}
    masks = np.arange(1, 2**6)
    for col, mk in enumerate(masks):
        sizes.setdefault(bin(mk).count("1"), set()).add(round(float(emb.weights[col]), 15))
    assert all(len(v) == 1 for v in sizes.values())


def test_bourgain_requires_center():
    m = random_metric(8, 0)
    if __import__("metriq.constructions", fromlist=["find_m_center"]).find_m_center(m, 3.0) is None:
        with pytest.raises(NoMCenterError):
            bourgain_embed(m, 3.0)


def test_bourgain_capacity():
    m = realize_special(Equilateral(16, 1.0))
    with pytest.raises(CapacityError):
        bourgain_embed(m, 2.0, 2.0, "exact")


def test_bourgain_monte_carlo_close_to_exact():
    m = realize_special(Equilateral(8, 1.0))
    _, rep_e = bourgain_embed(m, 3.0, 2.0, "exact")
    _, rep_mc = bourgain_embed(m, 3.0, 2.0, "monte-carlo", seed=1)
    assert rep_mc.distortion < 3 * rep_e.distortion + 1.0


def test_pipeline_both_targets():
    m = random_metric(40, 2)
    res = pipeline_quotient_then_embed(m, 0.3, seed=3, target="lp")
    assert res.target == "lp" and res.embedding is not None
    res = pipeline_quotient_then_embed(m, 0.3, seed=3, target="um")
    mparam = 2.0 * math.log(2.0 / 0.3) / 0.3
    assert res.report.distortion <= 2 * math.ceil(mparam) + 1e-9


# --- stars into L_p --------------------------------------------------------


def test_star_to_lp_unit_vectors_at_tau_sqrt2():
    emb = star_to_lp(4, math.sqrt(2.0), 2.0)
    assert emb.vectors.shape == (5, 4)
    assert np.array_equal(emb.vectors[1:], np.eye(4))


def test_star_to_lp_exact_p1():
    emb = star_to_lp(4, 1.0, 1.0)
    m = induced_metric(emb)
    model = realize_special(Star(4, 1.0))
    assert np.abs(m.dist - model.dist).max() < 1e-9


def test_star_to_lp_exact_p4():
    tau = 2.0 ** (3.0 / 4.0)
    emb = star_to_lp(4, tau, 4.0)
    m = induced_metric(emb)
    model = realize_special(Star(4, tau))
    assert np.abs(m.dist - model.dist).max() < 1e-9


def test_star_to_lp_rejects_out_of_range_tau():
    with pytest.raises(ParameterError):
        star_to_lp(3, 2.5, 1.0)  # max for p=1 is 2
    with pytest.raises(CapacityError):
        star_to_lp(16, 1.0, 1.0)


# --- truncated Gaussian ----------------------------------------------------


def test_gauss_closed_form_values():
    assert truncated_gauss_distance(0.0, 2.0) == 0.0
    assert truncated_gauss_distance(1e9, 2.0) == pytest.approx(math.sqrt(2.0) * 2.0)
    v = truncated_gauss_distance(2.0, 2.0)
    assert v == pytest.approx(math.sqrt(2.0) * 2.0 * math.sqrt(1 - math.exp(-0.5)))
    assert v / 2.0 == pytest.approx(0.8871, abs=1e-4)


def test_gauss_sandwich_monotone_concave():
    D = 3.0
    d = np.linspace(1e-6, 30, 2000)
    f = truncated_gauss_distance(d, D)
    trunc = np.minimum(d, math.sqrt(2.0) * D)
    assert np.all(f <= trunc + 1e-12)
    assert np.all(f >= math.sqrt((math.e - 1) / math.e) * trunc - 1e-12)
    # the lower end is tight at d = sqrt(2)*D
    tight = truncated_gauss_distance(math.sqrt(2.0) * D, D)
    assert tight == pytest.approx(math.sqrt((math.e - 1) / math.e) * math.sqrt(2.0) * D)
    assert np.all(np.diff(f) >= 0)
    assert np.all(np.diff(f[d <= 3 * D]) > 0)  # strict until float saturation
    assert np.all(np.diff(np.diff(f)) < 1e-12)
    assert np.all(f <= math.sqrt(2.0) * D)


def test_gauss_embed_norms_exact():
    pts = np.random.default_rng(0).uniform(0, 4, size=(10, 3))
    emb = truncated_gauss_embed(pts, 2.0, 500, seed=1)
    assert np.allclose(emb.norms(), 2.0, atol=1e-12)


# --- p-stable --------------------------------------------------------------


def test_cms_p1_is_cauchy():
    g = cms_sample(1.0, 200000, seed=0)
    # median of |Cauchy| is tan(pi/4) = 1
    assert np.median(np.abs(g)) == pytest.approx(1.0, abs=0.02)


def test_pstable_expectation_quadrature_vs_monte_carlo():
    for a in (0.1, 1.0, 10.0):
        q = pstable_expectation(a, 1.0)
        mc = pstable_expectation(a, 1.0, method="monte-carlo", samples=400000, seed=2)
        assert q == pytest.approx(mc, rel=0.02)


def test_pstable_distance_zero_and_monotone():
    assert pstable_distance(0.0, 2.0, 1.5) == 0.0
    vals = [pstable_distance(x, 4.0, 1.5) for x in (0.5, 1, 2, 4, 8, 16)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_pstable_rejects_p_out_of_range():
    with pytest.raises(ParameterError):
        pstable_distance(1.0, 1.0, 2.0)
    with pytest.raises(ParameterError):
        pstable_distance(1.0, 1.0, 0.9)


def test_pstable_embed_norms_and_convergence():
    pts = np.random.default_rng(1).uniform(0, 8, size=(8, 3))
    emb = pstable_embed(pts, 4.0, 1.5, 100000, seed=3)
    assert np.allclose(emb.norms(), 4.0, atol=1e-9)
    dlp = (np.abs(pts[0] - pts[5]) ** 1.5).sum() ** (1 / 1.5)
    assert emb.distance(0, 5) == pytest.approx(pstable_distance(dlp, 4.0, 1.5), rel=0.02)


def test_pstable_envelope_fit_is_two_sided():
    lo, hi = pstable_envelope_fit(1.5)
    assert 0 < lo <= hi < 10


# --- snowflake and uptolog -------------------------------------------------


def test_snowflake_cube_example():
    spec = TruncatedMetricSpec(hypercube_metric(4), 4.0)
    res = snowflake_sqrt_embed(spec)
    assert res.report.distortion <= math.sqrt(4 * math.e / (math.e - 1)) + 1e-9
    assert res.bound == pytest.approx(math.sqrt(4 * math.e / (math.e - 1)))
    assert res.image_norm == 2.0
    assert validate_metric(res.metric).ok


def test_snowflake_rejects_small_distances():
    from metriq.core import MetricSpace

    tiny = MetricSpace([[0.0, 0.5], [0.5, 0.0]])
    with pytest.raises(ParameterError):
        snowflake_sqrt_embed(TruncatedMetricSpec(tiny, 4.0))


def test_uptolog_norms_and_envelope():
    rng = np.random.default_rng(2)
    pts = np.unique(np.floor(rng.uniform(0, 6, size=(12, 3))), axis=0)
    res = uptolog_embed(pts, 8.0, 1.5)
    assert res.image_norm == pytest.approx(8.0 ** (1 / 1.5))
    assert validate_metric(res.metric).ok
    D = 8.0
    d1 = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    trunc = np.minimum(d1, D)
    iu, ju = np.triu_indices(pts.shape[0], k=1)
    psi = res.metric.dist[iu, ju]
    lo = res.c1 / D ** (1 - 1 / 1.5) * trunc[iu, ju]
    hi = res.c2 * math.log(D) ** (1 / 1.5) * trunc[iu, ju]
    assert np.all(psi >= lo - 1e-9) and np.all(psi <= hi + 1e-9)


# --- Poincare and the witness ----------------------------------------------


def test_star_poincare_on_random_vectors():
    rng = np.random.default_rng(3)
    for p in (1.0, 1.5, 2.0, 3.0):
        for _ in range(10):
            ok, _ = star_poincare_lower(6, p, rng.normal(size=(6, 4)), rng.normal(size=(6, 4)))
            assert ok


def test_star_poincare_bound_values():
    _, bound = star_poincare_lower(2, 2.0, np.zeros((2, 2)), np.zeros((2, 2)))
    assert bound == 1.0  # exact, not approximate
    _, bound = star_poincare_lower(4, 1.0, np.zeros((4, 2)), np.zeros((4, 2)))
    assert bound == pytest.approx(0.75)


def test_witness_bound_and_metric():
    v = truncation_witness_bound()
    assert v == pytest.approx(2.0 * math.sqrt(5.0 - math.sqrt(7.0)) / 3.0)
    assert v > 1.02
    w = truncation_witness(1.0)
    assert w.n == 4
    assert validate_metric(w).ok
    assert w.diameter() == 1.0  # truncation level reached


def test_witness_search_corroborates():
    best = witness_search_distortion(truncation_witness(1.0), dim=3, restarts=6, seed=4)
    assert best >= 1.02
    # the searched optimum cannot beat the certified bound
    assert best >= truncation_witness_bound() - 1e-6


# --- serialization ---------------------------------------------------------


def test_embedding_json_round_trip_complex():
    pts = np.random.default_rng(4).uniform(0, 2, size=(4, 2))
    emb = truncated_gauss_embed(pts, 1.0, 16, seed=5)
    doc = embedding_to_json(emb)
    assert doc["dtype"] == "complex"
    v = np.asarray([[complex(c[0], c[1]) for c in row] for row in doc["vectors"]])
    assert np.allclose(v, emb.vectors)

"""Randomized and greedy constructions of well-behaved quotient spaces.

Every operation here is deterministic given its RngSeed.  Positive-probability
existence arguments become rejection-sampling loops with an attempt cap
(default 64); every certificate a construction claims is recomputed by the
exact distortion evaluator before being returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Equilateral,
    Lacunary,
    MetricSpace,
    Star,
    aspect_ratio,
    hausdorff,
    nearest_radii,
    realize_special,
    set_distance,
)
from .errors import (
    CapacityError,
    ConstructionFailureError,
    InsufficientBandError,
    NoMCenterError,
    ParameterError,
    ProbabilisticFailureError,
    StructuralError,
)
from .generators import CompositionRealization, CompositionTree, leaf_realization, realize_composition
from .hst import HstTree, hst_to_metric, leaf, validate_khst
from .quotient import DistortionReport, QuotientSpace, distortion_between, quotient_by_subset, quotient_metric, sq_space
from .seeds import RngSeed, as_seed

RESAMPLE_CAP = 64


# ---------------------------------------------------------------------------
# m-centers
# ---------------------------------------------------------------------------


def _center_radii(dist: np.ndarray, mparam: float) -> np.ndarray | None:
    """For each point y, the smallest radius whose ball holds >= mparam points.

    None when no ball can reach mparam points (the center condition is vacuous).
    """
    n = dist.shape[0]
    need = int(math.ceil(mparam - 1e-12))
    if need < 1:
        need = 1
    if need > n:
        return None
    return np.sort(dist, axis=1)[:, need - 1]


def is_m_center(m: MetricSpace, x: int, mparam: float) -> bool:
    """True iff every ball of cardinality >= mparam contains x.

    Balls only change at realized distances, so it suffices to check, for each
    center y, the smallest radius at which y's ball reaches mparam points.
    """
    if mparam < 1:
        raise ParameterError("mparam must be >= 1")
    rho = _center_radii(m.dist, mparam)
    if rho is None:
        return True
    return bool(np.all(m.dist[x] <= rho))


def find_m_center(m: MetricSpace, mparam: float) -> int | None:
    """Lowest-index m-center, or None."""
    rho = _center_radii(m.dist, mparam)
    if rho is None:
        return 0
    ok = np.all(m.dist <= rho[None, :], axis=1)
    idx = np.flatnonzero(ok)
    return int(idx[0]) if idx.size else None


def m_center_quotient(m: MetricSpace, eps: float, seed=None, cap: int = RESAMPLE_CAP):
    """Sample a small set T whose collapse has the T-block as an m-center.

    Each point joins S with probability eps/2; T is S plus every point whose
    ball of the first ceil(2 ln(2/eps)/eps) neighbors misses S.  Samples are
    rejected until |T| <= eps*n.  Once accepted, the center property of the
    T-block in M/T is deterministic: every point outside T has a T-point
    within its mparam-neighbor radius.

    Returns (T as sorted list, QuotientSpace M/T, attempts).
    """
    if not (0 < eps < 1):
        raise ParameterError("eps must be in (0, 1)")
    n = m.n
    if n < 2:
        raise ParameterError("need n >= 2")
    rng = as_seed(seed).rng()
    mparam = 2.0 * math.log(2.0 / eps) / eps
    rho = _center_radii(m.dist, mparam)
    best = None
    for attempt in range(1, cap + 1):
        S = np.flatnonzero(rng.random(n) < eps / 2.0)
        T = set(int(i) for i in S)
        if rho is not None and S.size:
            # points whose mparam-ball misses S join T
            miss = np.flatnonzero(m.dist[:, S].min(axis=1) > rho)
            T.update(int(i) for i in miss)
        elif rho is not None:
            T = set(range(n))  # empty S misses every ball
        if not T:
            continue
        if best is None or len(T) < len(best):
            best = sorted(T)
        if len(T) <= eps * n + 1e-12:
            Tl = sorted(T)
            return Tl, quotient_by_subset(m, Tl), attempt
    raise ProbabilisticFailureError(
        f"no sample with |T| <= {eps * n:.3g} in {cap} attempts", attempts=cap, best=best
    )


def hst_from_m_centered(m: MetricSpace, mparam: int) -> tuple[HstTree, DistortionReport]:
    """Non-contracting ultrametric approximation of an m-centered space.

    Recursive splitting: take a center x, a diameter-far point a with
    d(x, a) >= diam/2, slice the open half-diameter ball around a into
    mparam bands of width diam/(2*mparam), cut at an empty band, and recurse
    on the two sides under a root labelled diam.  Root label = diam exactly;
    the leaf metric dominates d and exceeds it by a factor of at most
    2*mparam.
    """
    if int(mparam) != mparam or mparam < 2:
        raise ParameterError("mparam must be an integer >= 2")
    mparam = int(mparam)
    if m.n >= 2 and find_m_center(m, mparam) is None:
        raise NoMCenterError(f"no {mparam}-center exists")

    def build(X: list[int]) -> HstTree:
        if len(X) == 1:
            return leaf(X[0])
        sub = MetricSpace(m.dist[np.ix_(X, X)])
        x = find_m_center(sub, mparam)
        if x is None:
            raise NoMCenterError(f"recursion lost the center property on {X}")
        delta = sub.diameter()
        ai, bi = np.unravel_index(int(np.argmax(sub.dist)), sub.dist.shape)
        a = int(ai) if sub.dist[x, ai] >= delta / 2.0 else int(bi)
        width = delta / (2.0 * mparam)
        da = sub.dist[a]
        cut = None
        for i in range(1, mparam):
            # band i+1 is [i*width, (i+1)*width); empty means a clean cut at i*width
            if not np.any((da >= i * width) & (da < (i + 1) * width)):
                cut = i
                break
        if cut is None:
            raise ConstructionFailureError(
                "no empty band found; center property violated numerically",
                {"X": X, "mparam": mparam},
            )
        inside = da < cut * width
        B = [X[i] for i in np.flatnonzero(inside)]
        rest = [X[i] for i in np.flatnonzero(~inside)]
        return HstTree(delta, (build(B), build(rest)))

    t = build(list(range(m.n)))
    report = distortion_between(m, hst_to_metric(t))
    return t, report


# ---------------------------------------------------------------------------
# Nearest-neighbor-preserving sets
# ---------------------------------------------------------------------------


def ts_sets(m: MetricSpace, seed=None, cap: int = RESAMPLE_CAP) -> tuple[list[int], list[int], int]:
    """Random S and the set T of outside points whose nearest neighbor is in S.

    Each point joins S with probability 1/2; T = {x not in S : d(x, S) = r(x)}.
    Resampled until |T| >= n/4 (the expectation).  For every x in T and any W
    with S <= W <= M - {x}, d(x, W) = r(x); collapsing any such W therefore
    leaves x's distances in [r(x), 2 r(x)]-controlled form.

    Returns (S, T, attempts).
    """
    n = m.n
    if n < 2:
        raise ParameterError("need n >= 2")
    rng = as_seed(seed).rng()
    r = nearest_radii(m)
    best = None
    for attempt in range(1, cap + 1):
        mask = rng.random(n) < 0.5
        S = np.flatnonzero(mask)
        if S.size == 0 or S.size == n:
            continue
        dS = m.dist[:, S].min(axis=1)
        T = np.flatnonzero(~mask & (dS == r))
        if best is None or T.size > len(best):
            best = [int(i) for i in T]
        if T.size >= n / 4.0:
            return [int(i) for i in S], [int(i) for i in T], attempt
    raise ProbabilisticFailureError(
        f"no sample with |T| >= {n / 4:.3g} in {cap} attempts", attempts=cap, best=best
    )


# ---------------------------------------------------------------------------
# Coloring partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColoringResult:
    """Blocks whose pairwise minimum cross color is exactly ell, with witnesses."""

    blocks: tuple[tuple[int, ...], ...]
    ell: int

    @property
    def s(self) -> int:
        return len(self.blocks)


def check_coloring_result(chi: np.ndarray, res: ColoringResult) -> bool:
    """Exhaustively verify both invariants of a ColoringResult.

    For every pair of blocks: the minimum color over cross pairs equals ell,
    and every point of either block sees a point of the other in color ell.
    """
    blocks = [list(b) for b in res.blocks]
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            cross = chi[np.ix_(blocks[i], blocks[j])]
            if cross.min() != res.ell:
                return False
            if not np.all(np.any(cross == res.ell, axis=1)):
                return False
            if not np.all(np.any(cross == res.ell, axis=0)):
                return False
    return True


def _pair_fallback(chi: np.ndarray, V: list[int], cmin: int) -> ColoringResult:
    """Two singleton blocks on the lexicographically first min-color pair."""
    for ai in range(len(V)):
        for bi in range(ai + 1, len(V)):
            if chi[V[ai], V[bi]] == cmin:
                return ColoringResult(((V[ai],), (V[bi],)), cmin)
    raise StructuralError("no pair realizes the minimum color")  # unreachable


def coloring_partition(
    n: int, chi, seed=None, kcolors: int | None = None, cap: int = RESAMPLE_CAP
) -> ColoringResult:
    """Disjoint blocks whose cross pairs have minimum color ell, with witnesses.

    chi is a symmetric n x n integer array of pair colors (diagonal ignored).
    Recursion: let c be the smallest color present.  If color-c pairs are dense,
    take the vertices with many color-c neighbors and split them uniformly at
    random into s groups, resampling until every point of every group has a
    color-c neighbor in every other group.  Otherwise greedily color the
    low-degree vertices of the color-c graph and recurse on the largest color
    class with one fewer color.  Tiny instances fall back to a single
    min-color pair as two singleton blocks.
    """
    chi = np.asarray(chi)
    if chi.shape != (n, n):
        raise StructuralError("chi must be an n x n array")
    if n < 2:
        raise ParameterError("need n >= 2")
    if not np.array_equal(chi, chi.T):
        raise StructuralError("chi must be symmetric")
    rng = as_seed(seed).rng()
    iu, ju = np.triu_indices(n, k=1)
    if kcolors is None:
        kcolors = len(np.unique(chi[iu, ju]))

    def solve(V: list[int], krem: int) -> ColoringResult:
        nv = len(V)
        sub = chi[np.ix_(V, V)]
        off = sub[np.triu_indices(nv, k=1)]
        cmin = int(off.min())
        if np.all(off == cmin):
            return ColoringResult(tuple((v,) for v in V), cmin)
        if krem <= 1:
            return _pair_fallback(chi, V, cmin)
        is_cmin = sub == cmin
        np.fill_diagonal(is_cmin, False)
        deg = is_cmin.sum(axis=1)
        mcount = int(deg.sum())  # ordered color-cmin pair count
        thresh = nv ** (1.0 / krem)
        if mcount >= nv ** (1.0 + 1.0 / krem) / 2.0:
            C = np.flatnonzero(deg >= thresh / 4.0)
            s = int(thresh / (8.0 * math.log(nv))) if nv > 1 else 0
            s = min(s, C.size)
            if s < 2:
                return _pair_fallback(chi, V, cmin)
            for _ in range(cap):
                assign = rng.integers(0, s, size=C.size)
                ok = True
                for g in range(s):
                    members = C[assign == g]
                    if members.size == 0:
                        ok = False
                        break
                for g in range(s):
                    if not ok:
                        break
                    others = C[assign != g]
                    # every member of group g must hit every other group in cmin
                    for v in C[assign == g]:
                        hits = assign[np.isin(C, np.flatnonzero(is_cmin[v]))]
                        # groups (other than g) that v reaches in color cmin
                        reached = set(int(h) for h in hits)
                        if not all(h in reached for h in range(s) if h != g):
                            ok = False
                            break
                if ok:
                    blocks = tuple(
                        tuple(V[int(c)] for c in C[assign == g]) for g in range(s)
                    )
                    return ColoringResult(blocks, cmin)
            raise ProbabilisticFailureError(
                f"dense split failed {cap} times (|C|={C.size}, s={s})", attempts=cap
            )
        # sparse branch: low-degree vertices, greedy coloring of the cmin-graph
        D = np.flatnonzero(deg < thresh)
        palette = int(math.ceil(thresh))
        color = -np.ones(nv, dtype=int)
        for v in D:
            used = set(int(color[u]) for u in np.flatnonzero(is_cmin[v]) if color[u] >= 0)
            c = 0
            while c in used:
                c += 1
            if c >= palette:
                c = palette - 1  # cannot happen when degrees < palette; guard anyway
            color[v] = c
        sizes = [int(np.sum(color[D] == c)) for c in range(palette)]
        cbest = int(np.argmax(sizes))
        I = [V[int(v)] for v in D if color[v] == cbest]
        if len(I) < 2:
            return _pair_fallback(chi, V, cmin)
        return solve(I, krem - 1)

    res = solve(list(range(n)), max(1, int(kcolors)))
    if not check_coloring_result(chi, res):
        raise ConstructionFailureError("coloring invariants failed post-check", {"result": res})
    return res


def weighted_coloring_partition(
    n: int, chi, w, seed=None, kcolors: int | None = None, cap: int = RESAMPLE_CAP
) -> tuple[ColoringResult, float, bool]:
    """Coloring partition that also keeps a large weight mass.

    Dichotomy: either two heavy points (sqrt-weights summing to at least
    sqrt(total)) as singleton blocks, or the best level set A = {i : w_i >= t}
    maximizing |A| * sqrt(t), fed to coloring_partition.  Returns
    (result, sigma, check) where sigma = 1/(8 k ln(k+1)) and check is whether
    sum_i w_max(A_i)^sigma >= total^sigma.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0):
        raise StructuralError("w must be n nonnegative weights")
    chi = np.asarray(chi)
    seed = as_seed(seed)
    iu, ju = np.triu_indices(n, k=1)
    k = kcolors if kcolors is not None else len(np.unique(chi[iu, ju]))
    k = max(1, int(k))
    sigma = 1.0 / (8.0 * k * math.log(k + 1.0))
    total = float(w.sum())

    def sigma_sum(res: ColoringResult) -> float:
        return float(sum(w[list(b)].max() ** sigma for b in res.blocks))

    candidates: list[ColoringResult] = []
    # heavy-pair branch
    order = np.argsort(-w, kind="stable")
    hi, hj = int(order[0]), int(order[1])
    if math.sqrt(w[hi]) + math.sqrt(w[hj]) >= math.sqrt(total) - 1e-12:
        a, b = min(hi, hj), max(hi, hj)
        candidates.append(ColoringResult(((a,), (b,)), int(chi[a, b])))
    # level-set branch
    levels = np.unique(w[w > 0])
    best_t, best_score = None, -1.0
    for t in levels:
        A = np.flatnonzero(w >= t)
        score = A.size * math.sqrt(t)
        if A.size >= 2 and score > best_score:
            best_t, best_score = float(t), score
    if best_t is not None and best_score >= math.sqrt(total) - 1e-12:
        A = [int(i) for i in np.flatnonzero(w >= best_t)]
        try:
            sub = coloring_partition(len(A), chi[np.ix_(A, A)], seed.child(0), kcolors=k, cap=cap)
            candidates.append(
                ColoringResult(tuple(tuple(A[i] for i in blk) for blk in sub.blocks), sub.ell)
            )
        except ProbabilisticFailureError:
            if not candidates:
                raise
    if not candidates:
        # neither inequality triggered numerically; run the level set anyway
        A = [int(i) for i in np.flatnonzero(w >= (best_t if best_t is not None else 0.0))]
        if len(A) < 2:
            A = sorted(set([hi, hj]))
        sub = coloring_partition(len(A), chi[np.ix_(A, A)], seed.child(0), kcolors=k, cap=cap)
        candidates.append(
            ColoringResult(tuple(tuple(A[i] for i in blk) for blk in sub.blocks), sub.ell)
        )
    best = max(candidates, key=sigma_sum)
    check = sigma_sum(best) >= total**sigma - 1e-9
    return best, sigma, check


# ---------------------------------------------------------------------------
# Aspect-ratio quotients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AspectQuotientResult:
    quotient: QuotientSpace
    report: DistortionReport  # vs equilateral at the lower band edge
    ell: int
    band: tuple[float, float]  # cross distances live in [band[0], band[1]]
    bucket_count: int
    sigma: float | None = None  # weighted variant only
    sigma_ok: bool | None = None


def _distance_buckets(m: MetricSpace, alpha: float) -> tuple[np.ndarray, int, float]:
    """Color every pair by the power-of-alpha band its distance falls in."""
    mind = m.min_distance()
    phi = aspect_ratio(m)
    k = 1 if phi <= 1.0 + 1e-12 else int(math.log(phi) / math.log(alpha)) + 1
    with np.errstate(divide="ignore"):
        ratio = np.where(m.dist > 0, m.dist / mind, mind)
    chi = np.floor(np.log(ratio) / math.log(alpha) + 1e-12).astype(int) + 1
    chi = np.clip(chi, 1, k)
    np.fill_diagonal(chi, 0)
    return chi, k, mind


def aspect_quotient(
    m: MetricSpace, alpha: float, lipschitz: bool = False, seed=None, weights=None, cap: int = RESAMPLE_CAP
) -> AspectQuotientResult:
    """Quotient blocks whose cross distances all sit in one power-of-alpha band.

    Pairs are colored by distance scale, a coloring partition picks blocks with
    minimum cross color ell, and the induced quotient is alpha-equivalent to an
    equilateral space.  With lipschitz=True the Hausdorff distances are checked
    to lie in the same band (so block-collapse is an alpha-Lipschitz quotient);
    with weights, the weighted coloring is used and its sigma-sum reported.
    """
    if not (1.0 < alpha <= 2.0):
        raise ParameterError("alpha must be in (1, 2]")
    if m.n < 2:
        raise ParameterError("need n >= 2")
    seed = as_seed(seed)
    chi, k, mind = _distance_buckets(m, alpha)
    sigma = sigma_ok = None
    if weights is None:
        col = coloring_partition(m.n, chi, seed.child(0), kcolors=k, cap=cap)
    else:
        col, sigma, sigma_ok = weighted_coloring_partition(
            m.n, chi, weights, seed.child(0), kcolors=k, cap=cap
        )
    q = quotient_metric(m, col.blocks)
    lo = mind * alpha ** (col.ell - 1)
    hi = mind * alpha**col.ell
    cross = q.metric.dist[np.triu_indices(q.metric.n, k=1)]
    if cross.size and (cross.min() < lo - 1e-9 or cross.max() > hi + 1e-9):
        raise ConstructionFailureError(
            "cross distances escaped the color band",
            {"lo": lo, "hi": hi, "min": float(cross.min()), "max": float(cross.max())},
        )
    if lipschitz:
        for i in range(col.s):
            for j in range(i + 1, col.s):
                h = hausdorff(m, col.blocks[i], col.blocks[j])
                if not (lo - 1e-9 <= h <= hi + 1e-9):
                    raise ConstructionFailureError(
                        "Hausdorff distance escaped the color band",
                        {"blocks": (i, j), "hausdorff": h, "lo": lo, "hi": hi},
                    )
    model = realize_special(Equilateral(col.s, lo)) if col.s >= 2 else MetricSpace(np.zeros((1, 1)))
    report = distortion_between(q.metric, model)
    return AspectQuotientResult(q, report, col.ell, (lo, hi), k, sigma, sigma_ok)


# ---------------------------------------------------------------------------
# Star quotients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StarQuotientResult:
    quotient: QuotientSpace  # block 0 is the root (complement) block
    tau: float
    report: DistortionReport  # vs the scaled star model
    attempts: int


def find_star_quotient(
    m: MetricSpace, a: float, b: float, alpha: float, seed=None, ts=None, cap: int = RESAMPLE_CAP
) -> StarQuotientResult:
    """Quotient alpha-equivalent to a star, sourced from one nearest-radius band.

    Takes the nearest-neighbor-preserving set T, restricts to the band
    [a, b) of nearest radii, colors pairs by the scale of
    min{d(x,y), r(x)+r(y)}, and collapses everything else into a root block.
    Leaf blocks sit at distance [a, b) from the root and within one scale band
    of each other, which is exactly a star up to factor alpha.
    """
    if not (0 < a < b < 2 * a):
        raise ParameterError("need 0 < a < b < 2a")
    if not (b / a - 1e-12 <= alpha <= 2 * b / a + 1e-12):
        raise ParameterError("need b/a <= alpha <= 2b/a")
    seed = as_seed(seed)
    if ts is None:
        S, T, attempts = ts_sets(m, seed.child(0), cap=cap)
    else:
        S, T = ts
        attempts = 0
    r = nearest_radii(m)
    N = [x for x in T if a <= r[x] < b]
    if len(N) < 2:
        raise InsufficientBandError(f"band [{a}, {b}) of T has {len(N)} < 2 points")
    kbuck = int(math.ceil(math.log(2 * b / a) / math.log(alpha))) - 1
    if kbuck > 64:
        raise CapacityError(f"bucket count {kbuck} exceeds cap 64 (alpha too close to b/a)")
    kbuck = max(kbuck, 0)
    nn = len(N)
    val = np.minimum(m.dist[np.ix_(N, N)], r[N][:, None] + r[N][None, :])
    with np.errstate(divide="ignore"):
        c = np.ceil(np.log(2 * b / np.maximum(val, 1e-300)) / math.log(alpha) - 1e-12) - 1
    c = np.clip(c, 0, kbuck).astype(int)
    np.fill_diagonal(c, -1)
    col = coloring_partition(nn, c + 1, seed.child(1), kcolors=kbuck + 1, cap=cap)
    ell0 = col.ell - 1
    used = set(i for blk in col.blocks for i in blk)
    leaf_blocks = tuple(tuple(N[i] for i in blk) for blk in col.blocks)
    covered = set(x for blk in leaf_blocks for x in blk)
    root = tuple(x for x in range(m.n) if x not in covered)
    q = quotient_metric(m, (root,) + leaf_blocks)
    tau = 2 * b / (a * alpha ** (ell0 + 1))
    model = realize_special(Star(col.s, tau))
    scaled = MetricSpace(model.dist * a)
    report = distortion_between(q.metric, scaled)
    # root-to-leaf distances must sit in [a, b)
    d_root = q.metric.dist[0, 1:]
    if d_root.size and (d_root.min() < a - 1e-9 or d_root.max() >= b + 1e-9):
        raise ConstructionFailureError(
            "root-leaf quotient distances escaped [a, b)",
            {"a": a, "b": b, "min": float(d_root.min()), "max": float(d_root.max())},
        )
    return StarQuotientResult(q, tau, report, attempts)


# ---------------------------------------------------------------------------
# Dichotomy and distortion-2 quotients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QDichotomyResult:
    branch: str  # "lacunary" | "star"
    quotient: QuotientSpace
    report: DistortionReport
    model: object  # Lacunary | Star | Equilateral (after drop_root)
    lacunary_size: int
    star_size: int | None


def q_dichotomy(
    m: MetricSpace,
    k: float,
    beta: float,
    alpha: float,
    seed=None,
    drop_root: bool = False,
    cap: int = RESAMPLE_CAP,
) -> QDichotomyResult:
    """Quotient alpha-equivalent to a k-lacunary space or to a star.

    Nearest radii of the kept set T are grouped into geometric classes of
    ratio alpha/beta.  Either representatives of well-separated classes give a
    lacunary quotient (collapse everything else), or one large class feeds the
    star construction.  Returns the branch with the larger certified quotient.
    With drop_root=True a star result has its root deleted, leaving an SQ
    space equivalent to an equilateral.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if not (1 < beta <= 2):
        raise ParameterError("beta must be in (1, 2]")
    if not (beta < alpha < 2 * beta):
        raise ParameterError("alpha must be in (beta, 2*beta)")
    seed = as_seed(seed)
    S, T, attempts = ts_sets(m, seed.child(0), cap=cap)
    rho = alpha / beta
    r = nearest_radii(m)
    expo = np.floor(np.log(r) / math.log(rho) + 1e-12).astype(int)
    classes: dict[int, list[int]] = {}
    for x in T:
        classes.setdefault(int(expo[x]), []).append(x)
    inner = max(math.log(k), math.log(1.0 / (beta - 1.0)) if beta < 2 else 0.0)
    mm = max(1, int(math.ceil(inner / math.log(rho) - 1e-12)))
    by_residue: dict[int, int] = {}
    for i, pts in classes.items():
        by_residue[i % mm] = by_residue.get(i % mm, 0) + len(pts)
    qres = min(j for j in by_residue if by_residue[j] == max(by_residue.values()))
    exps = sorted((i for i in classes if i % mm == qres), reverse=True)

    # lacunary branch: one representative per selected class, collapse the rest
    reps = [min(classes[i]) for i in exps]
    blocks = tuple((v,) for v in reps) + (tuple(x for x in range(m.n) if x not in set(reps)),)
    lac_q = quotient_metric(m, blocks) if len(blocks[-1]) else quotient_metric(m, blocks[:-1])
    avals = tuple(rho**i for i in exps)
    lac_model = Lacunary(avals, k)
    lac_report = distortion_between(lac_q.metric, realize_special(lac_model))
    lac_size = lac_q.metric.n

    # star branch: largest selected class, band [rho^i, rho^(i+1))
    star_res = None
    if exps:
        sizes = {i: len(classes[i]) for i in exps}
        ibest = min(i for i in exps if sizes[i] == max(sizes.values()))
        a_band, b_band = rho**ibest, rho ** (ibest + 1)
        try:
            star_res = find_star_quotient(
                m, a_band, b_band, alpha, seed.child(1), ts=(S, T), cap=cap
            )
        except (InsufficientBandError, ProbabilisticFailureError, ConstructionFailureError):
            star_res = None

    if star_res is not None and star_res.quotient.metric.n > lac_size:
        if drop_root:
            s = star_res.quotient.metric.n - 1
            sq = sq_space(star_res.quotient, list(range(1, s + 1)))
            model = Equilateral(s, star_res.tau)
            report = distortion_between(sq.metric, realize_special(model))
            return QDichotomyResult("star", sq, report, model, lac_size, s + 1)
        return QDichotomyResult(
            "star", star_res.quotient, star_res.report, Star(star_res.quotient.metric.n - 1, star_res.tau),
            lac_size, star_res.quotient.metric.n,
        )
    return QDichotomyResult(
        "lacunary", lac_q, lac_report, lac_model, lac_size,
        None if star_res is None else star_res.quotient.metric.n,
    )


def q2_lacunary(m: MetricSpace, seed=None, cap: int = RESAMPLE_CAP):
    """Large quotient 2-equivalent to a 1-lacunary space.

    Collapse the complement of the nearest-neighbor-preserving set T; each
    kept point's distances are pinned between r(x) and 2 r(x), which is a
    lacunary space up to factor 2.  Blocks ordered by decreasing nearest
    radius, collapsed complement last.

    Returns (QuotientSpace, DistortionReport, Lacunary model, attempts).
    """
    S, T, attempts = ts_sets(m, seed, cap=cap)
    r = nearest_radii(m)
    ordered = sorted(T, key=lambda x: (-r[x], x))
    A = tuple(x for x in range(m.n) if x not in set(T))
    blocks = tuple((x,) for x in ordered) + (A,)
    q = quotient_metric(m, blocks)
    model = Lacunary(tuple(float(r[x]) for x in ordered), 1.0)
    report = distortion_between(q.metric, realize_special(model))
    return q, report, model, attempts


# ---------------------------------------------------------------------------
# Composition quotients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositionQsResult:
    composed: MetricSpace
    quotient: QuotientSpace
    hst: HstTree
    report: DistortionReport  # quotient vs glued HST leaf metric
    sigma: float
    sigma_ok: bool
    alpha_bound: float  # (1 + 1/beta_min) * alpha


def composition_qs(
    tree: CompositionTree,
    k: float,
    alpha: float,
    seed=None,
    weights=None,
    cap: int = RESAMPLE_CAP,
) -> CompositionQsResult:
    """Large weighted QS space of a composed metric, close to a k-HST.

    Structural induction over the composition tree: each node's outer metric
    gets a weighted aspect-ratio quotient; inside every outer block the child
    of the heaviest point is recursed into, and the remaining children of the
    block are absorbed into its first sub-block.  The glued HST rescales each
    node's star by (beta + 1) * gamma, which dominates the quotient distances
    and exceeds them by at most (1 + 1/beta) * alpha.
    """
    if not (1.0 < alpha <= 2.0):
        raise ParameterError("alpha must be in (1, 2]")
    seed = as_seed(seed)
    real = realize_composition(tree)

    def check_betas(t: CompositionTree):
        if t.beta < alpha * k - 1e-12:
            raise ParameterError(f"beta = {t.beta} < alpha*k = {alpha * k} at some node")
        for c in t.children:
            if isinstance(c, CompositionTree):
                check_betas(c)

    check_betas(tree)

    def min_beta(t: CompositionTree) -> float:
        vals = [t.beta]
        for c in t.children:
            if isinstance(c, CompositionTree):
                vals.append(min_beta(c))
        return min(vals)

    counter = [0]

    def next_seed() -> RngSeed:
        counter[0] += 1
        return seed.child(counter[0])

    def base_case(msub: MetricSpace, w: np.ndarray):
        """Weighted aspect quotient of a leaf/outer space, as (blocks, hst, sigma)."""
        if msub.n == 1:
            return ((0,),), leaf(0), 1.0
        if aspect_ratio(msub) > 4.0 + 1e-9:
            raise ParameterError("leaf/outer spaces must have aspect ratio <= 4")
        res = aspect_quotient(msub, alpha, seed=next_seed(), weights=w, cap=cap)
        s = len(res.quotient.blocks)
        if s == 1:
            tree_h = leaf(0)
        else:
            delta = float(res.quotient.metric.dist.max())
            tree_h = HstTree(delta, tuple(leaf(i) for i in range(s)))
        kb = res.bucket_count
        sigma = 1.0 / (8.0 * kb * math.log(kb + 1.0))
        return res.quotient.blocks, tree_h, sigma

    def rec(node: CompositionRealization, w: np.ndarray):
        """Returns (blocks in node-local indices, hst with leaf ids = block slots, sigma)."""
        if node.is_leaf:
            return base_case(node.metric, w)
        t = node.tree
        outer = t.outer
        spans = []
        for ci, child in enumerate(node.children):
            lo = node.offsets[ci]
            spans.append(list(range(lo, lo + child.metric.n)))
        w_outer = np.array([w[span].sum() for span in spans])
        u_blocks, _, sigma_m = base_case(outer, w_outer)
        label_scale = (t.beta + 1.0) / t.beta * node.cross_multiplier

        all_blocks: list[tuple[int, ...]] = []
        subtrees: list[HstTree] = []
        sigma = sigma_m
        for ublk in u_blocks:
            zi = ublk[int(np.argmax(w_outer[list(ublk)]))]
            sub_blocks, sub_hst, sub_sigma = rec(node.children[zi], w[spans[zi]])
            sigma = min(sigma, sub_sigma)
            off = node.offsets[zi]
            translated = [tuple(off + i for i in blk) for blk in sub_blocks]
            # absorb the other children of this outer block into the first sub-block
            extra = tuple(x for z in ublk if z != zi for x in spans[z])
            translated[0] = translated[0] + extra
            start = len(all_blocks)
            all_blocks.extend(translated)
            subtrees.append(_shift_leaves(sub_hst, start))
        if len(subtrees) == 1:
            glued = subtrees[0]
        else:
            # outer star label: dominate every cross-block quotient distance
            delta_m = _outer_quotient_diameter(outer, u_blocks) * label_scale
            glued = HstTree(delta_m, tuple(subtrees))
        return tuple(all_blocks), glued, sigma

    if weights is None:
        weights = np.ones(real.metric.n)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (real.metric.n,):
            raise StructuralError("weights length must equal composed size")
    blocks, glued, sigma = rec(real, weights)
    q = quotient_metric(real.metric, blocks)
    vr = validate_khst(glued, k)
    if not vr.ok:
        raise ConstructionFailureError("glued tree is not a k-HST", {"violations": vr.violations})
    report = distortion_between(q.metric, hst_to_metric(glued))
    total = float(weights.sum())
    ssum = sum(float(weights[list(b)].max()) ** sigma for b in blocks)
    sigma_ok = bool(ssum >= total**sigma - 1e-9)
    bmin = min_beta(tree)
    return CompositionQsResult(
        real.metric, q, glued, report, sigma, sigma_ok, (1.0 + 1.0 / bmin) * alpha
    )


def _shift_leaves(t: HstTree, offset: int) -> HstTree:
    if t.is_leaf:
        return leaf(t.leaf + offset)
    return HstTree(t.delta, tuple(_shift_leaves(c, offset) for c in t.children))


def _outer_quotient_diameter(outer: MetricSpace, blocks) -> float:
    q = quotient_metric(outer, blocks)
    return float(q.metric.dist.max())

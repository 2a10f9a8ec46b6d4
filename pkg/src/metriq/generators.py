"""Seedable generators for structured and adversarial metric instances.

Families: padded copies of a base space, two-valued random-graph metrics,
recursive metric compositions, the scaled product used for Lipschitz-quotient
lower bounds, hypercubes, stars, lacunary spaces, and generic random Euclidean
point clouds for testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Equilateral,
    Lacunary,
    MetricSpace,
    Star,
    aspect_ratio,
    realize_special,
)
from .errors import ParameterError, StructuralError
from .seeds import RngSeed, as_seed


def gen_padded_copies(X: MetricSpace, copies: int, beta: float | None = None) -> MetricSpace:
    """`copies` disjoint copies of X, all cross-copy distances equal to beta.

    beta defaults to diam(X), the smallest value keeping the result a metric.
    Point (x, i) maps to index i * |X| + x.
    """
    if copies < 1:
        raise ParameterError("copies must be >= 1")
    diam = X.diameter()
    if beta is None:
        beta = diam
    if beta < diam:
        raise ParameterError(f"beta = {beta} < diam(X) = {diam} breaks the triangle inequality")
    n = X.n * copies
    d = np.full((n, n), float(beta))
    for i in range(copies):
        lo = i * X.n
        d[lo : lo + X.n, lo : lo + X.n] = X.dist
    return MetricSpace(d)


def gen_random_graph_metric(n: int, q: float, seed=None) -> tuple[MetricSpace, list[tuple[int, int]]]:
    """Two-valued metric of a G(n, q) random graph: 1 on edges, 2 otherwise.

    Always a metric.  Returns the space and the sampled edge list.
    """
    if not (0 < q < 1):
        raise ParameterError("edge probability must be in (0, 1)")
    rng = as_seed(seed).rng()
    d = np.full((n, n), 2.0)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < q:
                d[i, j] = d[j, i] = 1.0
                edges.append((i, j))
    np.fill_diagonal(d, 0.0)
    return MetricSpace(d), edges


# ---------------------------------------------------------------------------
# Metric composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositionTree:
    """Recursive description of a composed metric.

    Each point of the outer metric is replaced by a child, which is either a
    plain MetricSpace or another CompositionTree.  Within a child, distances
    are the child's own; across children, beta * gamma * d_outer, where
    gamma = max child diameter / min outer distance.
    """

    outer: MetricSpace
    children: tuple
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) != self.outer.n:
            raise StructuralError("need exactly one child per outer point")
        if self.beta < 0.5:
            raise ParameterError("beta must be >= 1/2")
        for c in self.children:
            if not isinstance(c, (MetricSpace, CompositionTree)):
                raise StructuralError("children must be MetricSpace or CompositionTree")

    @property
    def size(self) -> int:
        return sum(c.n if isinstance(c, MetricSpace) else c.size for c in self.children)


@dataclass(frozen=True)
class CompositionRealization:
    """A composed metric together with the structure used to build it."""

    metric: MetricSpace
    tree: CompositionTree | None  # None for a leaf space
    gamma: float
    cross_multiplier: float  # beta*gamma, or 1 when gamma = 0 (all-singleton children)
    offsets: tuple[int, ...]  # start index of each child's points
    children: tuple["CompositionRealization", ...]

    @property
    def is_leaf(self) -> bool:
        return self.tree is None


def leaf_realization(m: MetricSpace) -> CompositionRealization:
    return CompositionRealization(m, None, 0.0, 1.0, (), ())


def realize_composition(tree: CompositionTree) -> CompositionRealization:
    """Materialize a composition tree bottom-up."""
    reals = [
        leaf_realization(c) if isinstance(c, MetricSpace) else realize_composition(c)
        for c in tree.children
    ]
    sizes = [r.metric.n for r in reals]
    offsets = tuple(int(x) for x in np.cumsum([0] + sizes[:-1]))
    n = sum(sizes)
    outer = tree.outer
    max_diam = max(r.metric.diameter() for r in reals)
    if outer.n >= 2:
        min_outer = outer.min_distance()
        gamma = max_diam / min_outer
    else:
        gamma = 0.0
    # gamma = 0 (all children single points) would collapse the matrix; use a
    # plain copy of the outer metric instead.
    cross = tree.beta * gamma if gamma > 0 else 1.0
    d = np.zeros((n, n))
    for i, ri in enumerate(reals):
        lo = offsets[i]
        d[lo : lo + sizes[i], lo : lo + sizes[i]] = ri.metric.dist
        for j in range(i + 1, len(reals)):
            lo2 = offsets[j]
            val = cross * outer.dist[i, j]
            d[lo : lo + sizes[i], lo2 : lo2 + sizes[j]] = val
            d[lo2 : lo2 + sizes[j], lo : lo + sizes[i]] = val
    return CompositionRealization(MetricSpace(d), tree, gamma, cross, offsets, tuple(reals))


def gen_composition(tree: CompositionTree) -> MetricSpace:
    return realize_composition(tree).metric


def random_composition_tree(
    depth: int,
    seed=None,
    max_outer: int = 4,
    beta: float = 4.0,
    edge_scale: float = 1.0,
) -> CompositionTree:
    """Random composition tree for testing: small equilateral-ish leaf spaces."""
    rng = as_seed(seed).rng()

    def rand_leaf() -> MetricSpace:
        n = int(rng.integers(2, max_outer + 1))
        # aspect ratio <= 2: distances in [c, 2c]
        pts = rng.uniform(1.0, 2.0, size=(n, n))
        d = np.maximum(pts, pts.T) * edge_scale
        np.fill_diagonal(d, 0.0)
        return MetricSpace(d)

    def build(level: int) -> CompositionTree | MetricSpace:
        if level >= depth:
            return rand_leaf()
        outer = rand_leaf()
        children = tuple(
            build(level + 1) if rng.random() < 0.7 else rand_leaf() for _ in range(outer.n)
        )
        return CompositionTree(outer, children, beta)

    top = build(0)
    if isinstance(top, MetricSpace):
        top = CompositionTree(top, tuple(MetricSpace(np.zeros((1, 1))) for _ in range(top.n)), beta)
    return top


def gen_lipcomp_product(
    X: MetricSpace, Y: MetricSpace, mu: float, theta: float, alpha: float
) -> MetricSpace:
    """Product Z = Y x [k] with level-scaled copies of Y and X-distances across.

    d((y, i), (z, j)) = mu^i * d_Y(y, z) if i = j, else theta * d_X(i, j),
    where k = |X| and levels are i = 1..k.  Requires mu > alpha * aspect(Y)
    and theta >= alpha * mu^k * diam(Y) / min d_X.
    """
    k = X.n
    if Y.n >= 2:
        if mu <= alpha * aspect_ratio(Y):
            raise ParameterError("mu must exceed alpha * aspect_ratio(Y)")
        if k >= 2 and theta < alpha * mu**k * Y.diameter() / X.min_distance():
            raise ParameterError("theta too small for the required separation")
    n = Y.n * k
    d = np.zeros((n, n))
    for i in range(k):
        lo = i * Y.n
        d[lo : lo + Y.n, lo : lo + Y.n] = mu ** (i + 1) * Y.dist
        for j in range(i + 1, k):
            lo2 = j * Y.n
            val = theta * X.dist[i, j]
            d[lo : lo + Y.n, lo2 : lo2 + Y.n] = val
            d[lo2 : lo2 + Y.n, lo : lo + Y.n] = val
    return MetricSpace(d)


# ---------------------------------------------------------------------------
# Almost-disjoint tuple families
# ---------------------------------------------------------------------------


def _smallest_prime_at_least(x: int) -> int:
    def is_prime(v):
        if v < 2:
            return False
        f = 2
        while f * f <= v:
            if v % f == 0:
                return False
            f += 1
        return True

    while not is_prime(x):
        x += 1
    return x


def gen_ktuple_free_family(n: int, m: int) -> list[tuple[int, ...]]:
    """floor(n/4m)^2 tuples of size 2m over [n], pairwise sharing <= 1 point.

    Grid construction: points arranged as 2m rows x P columns (P prime),
    tuple (a, b) is the graph of the line i -> a*i + b (mod P).  Distinct
    lines over a prime field meet in at most one column, and rows are
    disjoint point sets, so two tuples share at most one point.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    if n < 4 * m:
        raise ParameterError("need n >= 4m")
    s = n // (4 * m)
    if s == 1:
        return [tuple(range(2 * m))]
    P = _smallest_prime_at_least(max(s, 2 * m))
    if 2 * m * P <= n:
        fam = []
        for a in range(s):
            for b in range(s):
                fam.append(tuple(i * P + ((a * i + b) % P) for i in range(2 * m)))
        return fam
    # Line family does not fit in [n]; fall back to disjoint tuples if enough.
    if n // (2 * m) >= s * s:
        return [tuple(range(t * 2 * m, (t + 1) * 2 * m)) for t in range(s * s)]
    raise ParameterError(
        f"cannot realize {s * s} near-disjoint {2 * m}-tuples inside [{n}] "
        "(tuple length exceeds the grid the point budget allows)"
    )


# ---------------------------------------------------------------------------
# Generic instances
# ---------------------------------------------------------------------------


def gen_euclidean_cloud(n: int, seed=None, dim: int = 3) -> MetricSpace:
    """Uniform points in the unit cube with exact Euclidean distances.

    The workhorse "random metric" for tests and experiments: always exactly a
    metric, no repair step.
    """
    rng = as_seed(seed).rng()
    pts = rng.uniform(size=(n, dim))
    diff = pts[:, None, :] - pts[None, :, :]
    return MetricSpace(np.sqrt((diff**2).sum(axis=2)))


def hypercube_metric(d: int) -> MetricSpace:
    """Hamming metric on {0,1}^d (only sensible for small d: 4^d matrix entries)."""
    if d > 12:
        raise ParameterError("full hypercube matrices limited to d <= 12")
    pts = np.arange(2**d, dtype=np.uint32)
    x = np.bitwise_xor.outer(pts, pts)
    return MetricSpace(_popcount(x).astype(np.float64))


def _popcount(x: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x)
    v = x.astype(np.uint64)
    out = np.zeros(v.shape, dtype=np.uint64)
    while np.any(v):
        out += v & 1
        v >>= np.uint64(1)
    return out


# ---------------------------------------------------------------------------
# InstanceSpec: the CLI-facing description of a generated instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    variant: str
    params: dict
    seed: RngSeed


def realize_instance(spec: InstanceSpec) -> MetricSpace:
    v, p = spec.variant, spec.params
    if v == "star":
        return realize_special(Star(int(p["n"]), float(p.get("tau", 2.0))))
    if v == "lacunary":
        return realize_special(Lacunary(tuple(p["a"]), float(p.get("k", 1.0))))
    if v == "equilateral":
        return realize_special(Equilateral(int(p["n"]), float(p.get("edge", 1.0))))
    if v == "cube":
        return hypercube_metric(int(p["d"]))
    if v == "gnp":
        return gen_random_graph_metric(int(p["n"]), float(p["q"]), spec.seed)[0]
    if v == "cloud":
        return gen_euclidean_cloud(int(p["n"]), spec.seed, int(p.get("dim", 3)))
    if v == "padded":
        base = gen_euclidean_cloud(int(p.get("base_n", 4)), spec.seed)
        return gen_padded_copies(base, int(p["copies"]), p.get("beta"))
    if v == "composition":
        tree = random_composition_tree(
            int(p.get("depth", 2)), spec.seed, beta=float(p.get("beta", 4.0))
        )
        return gen_composition(tree)
    if v == "lipcomp":
        X = gen_euclidean_cloud(int(p.get("k", 3)), spec.seed.child(0))
        Y = gen_euclidean_cloud(int(p.get("yn", 3)), spec.seed.child(1))
        alpha = float(p.get("alpha", 1.5))
        mu = alpha * aspect_ratio(Y) * 1.01
        theta = alpha * mu**X.n * Y.diameter() / X.min_distance()
        return gen_lipcomp_product(X, Y, mu, theta, alpha)
    raise ParameterError(f"unknown instance variant {v!r}")

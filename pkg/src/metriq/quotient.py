"""Quotient metrics and the exact distortion evaluator.

Collapsing a partition of a metric space induces the largest metric on the
blocks that is majorized by the original distances: the shortest-path closure
of the complete graph on blocks weighted by minimum inter-block distances.
Three provenances are tracked:

* Q  — quotient of the whole space,
* QS — restrict to a subset first, then quotient,
* SQ — quotient first, then restrict to a subset of the blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import floyd_warshall

from .core import MetricSpace, set_distance
from .errors import StructuralError, UndefinedInputError


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks of (a subset of) a base space's points."""

    base: MetricSpace
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in blk) for blk in self.blocks)
        seen: set[int] = set()
        for blk in blocks:
            if not blk:
                raise StructuralError("empty block in partition")
            for i in blk:
                if i < 0 or i >= self.base.n:
                    raise StructuralError(f"point index {i} out of range")
                if i in seen:
                    raise StructuralError(f"point {i} appears in two blocks")
                seen.add(i)
        object.__setattr__(self, "blocks", blocks)

    @property
    def support(self) -> list[int]:
        return sorted(i for blk in self.blocks for i in blk)

    @property
    def covers_base(self) -> bool:
        return len(self.support) == self.base.n


@dataclass(frozen=True)
class QuotientSpace:
    partition: Partition
    metric: MetricSpace
    provenance: str  # "Q" | "QS" | "SQ"

    def __post_init__(self):
        if self.provenance not in ("Q", "QS", "SQ"):
            raise StructuralError(f"unknown provenance {self.provenance!r}")
        if self.metric.n != len(self.partition.blocks):
            raise StructuralError("quotient metric size != block count")

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        return self.partition.blocks


def quotient_metric(m: MetricSpace, blocks) -> QuotientSpace:
    """Geodesic quotient metric on the given blocks.

    Edge weights are the minimum pairwise distances between blocks; the
    quotient metric is their all-pairs shortest-path closure.  Provenance is
    Q when the blocks cover all points, QS otherwise (quotient of the induced
    subspace).
    """
    part = Partition(m, tuple(tuple(b) for b in blocks))
    k = len(part.blocks)
    w = np.zeros((k, k))
    idx = [list(b) for b in part.blocks]
    for i in range(k):
        for j in range(i + 1, k):
            w[i, j] = w[j, i] = m.dist[np.ix_(idx[i], idx[j])].min()
    if k > 1:
        w = floyd_warshall(w, directed=False)
    prov = "Q" if part.covers_base else "QS"
    return QuotientSpace(part, MetricSpace(w), prov)


def quotient_by_subset(m: MetricSpace, A) -> QuotientSpace:
    """Collapse the subset A to a single point, all others staying singletons.

    Uses the closed form d(x, y) = min{d(x, y), d(x, A) + d(y, A)} and
    d(x, A-block) = d(x, A); no shortest-path run is needed because any longer
    chain either stays direct or passes through the collapsed block once.
    Block order: singletons in increasing index, then the A-block last.
    """
    A = sorted(set(int(i) for i in A))
    if not A:
        raise StructuralError("A must be nonempty")
    rest = [i for i in range(m.n) if i not in set(A)]
    blocks = tuple((i,) for i in rest) + (tuple(A),)
    k = len(blocks)
    dA = m.dist[:, A].min(axis=1)  # distance of every point to A
    d = np.zeros((k, k))
    if rest:
        sub = m.dist[np.ix_(rest, rest)]
        via = dA[rest][:, None] + dA[rest][None, :]
        d[: k - 1, : k - 1] = np.minimum(sub, via)
        np.fill_diagonal(d[: k - 1, : k - 1], 0.0)
        d[: k - 1, k - 1] = dA[rest]
        d[k - 1, : k - 1] = dA[rest]
    return QuotientSpace(Partition(m, blocks), MetricSpace(d), "Q")


def sq_space(q: QuotientSpace, keep) -> QuotientSpace:
    """Subspace of a quotient: keep the listed block indices, in the given order."""
    keep = list(keep)
    if not keep:
        raise UndefinedInputError("must keep at least one block")
    if any(i < 0 or i >= len(q.blocks) for i in keep):
        raise StructuralError("kept block index out of range")
    blocks = tuple(q.blocks[i] for i in keep)
    return QuotientSpace(Partition(q.partition.base, blocks), q.metric.restrict(keep), "SQ")


# ---------------------------------------------------------------------------
# Distortion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    """Exact expansion/contraction of an injective map between finite metrics."""

    expansion: float
    contraction: float
    expansion_pair: tuple[int, int]
    contraction_pair: tuple[int, int]

    @property
    def distortion(self) -> float:
        return self.expansion * self.contraction

    def __str__(self):
        return (
            f"distortion {self.distortion:.6g} "
            f"(expansion {self.expansion:.6g} at {self.expansion_pair}, "
            f"contraction {self.contraction:.6g} at {self.contraction_pair})"
        )


def distortion_between(source: MetricSpace, target: MetricSpace, mapping=None) -> DistortionReport:
    """Distortion of the map i -> mapping[i] from source into target.

    expansion = max d_target/d_source, contraction = max d_source/d_target,
    both over all pairs; distortion is their product.  mapping=None means the
    identity (sizes must agree).
    """
    n = source.n
    if mapping is None:
        mapping = list(range(n))
    mapping = [int(i) for i in mapping]
    if len(mapping) != n:
        raise StructuralError("mapping length != source size")
    if len(set(mapping)) != n:
        raise StructuralError("mapping must be injective")
    if any(i < 0 or i >= target.n for i in mapping):
        raise StructuralError("mapping image out of range")
    if n < 2:
        return DistortionReport(1.0, 1.0, (0, 0), (0, 0))

    ds = source.dist
    dt = target.dist[np.ix_(mapping, mapping)]
    iu, ju = np.triu_indices(n, k=1)
    s, t = ds[iu, ju], dt[iu, ju]
    if np.any(s <= 0) or np.any(t <= 0):
        raise StructuralError("distances must be positive on distinct points/images")
    ratio = t / s
    hi = int(np.argmax(ratio))
    lo = int(np.argmin(ratio))
    expansion = float(ratio[hi])
    contraction = float(1.0 / ratio[lo])
    return DistortionReport(
        expansion,
        contraction,
        (int(iu[hi]), int(ju[hi])),
        (int(iu[lo]), int(ju[lo])),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def quotient_to_json(q: QuotientSpace) -> dict:
    from .core import metric_to_json

    return {
        "base": metric_to_json(q.partition.base),
        "blocks": [list(b) for b in q.blocks],
        "provenance": q.provenance,
        "dist": q.metric.dist.tolist(),
    }


def quotient_from_json(doc: dict) -> QuotientSpace:
    from .core import metric_from_json

    base = metric_from_json(doc["base"])
    part = Partition(base, tuple(tuple(b) for b in doc["blocks"]))
    return QuotientSpace(part, MetricSpace(np.asarray(doc["dist"], dtype=np.float64)), doc["provenance"])

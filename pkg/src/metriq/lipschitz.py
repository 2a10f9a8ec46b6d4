"""Lipschitz / co-Lipschitz constants of finite surjections.

A surjection f between finite metric spaces is graded by two constants over
target pairs: lip compares target distances against minimum preimage
distances, colip compares Hausdorff preimage distances against target
distances.  Their product certifies f as an alpha-Lipschitz quotient; for
maps with singleton preimages it coincides with bi-Lipschitz distortion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MetricSpace, hausdorff, metric_from_json, metric_to_json, set_distance
from .errors import StructuralError


@dataclass(frozen=True)
class QuotientMap:
    """A surjective point assignment between two finite metric spaces."""

    source: MetricSpace
    target: MetricSpace
    assign: tuple[int, ...]

    def __post_init__(self):
        assign = tuple(int(a) for a in self.assign)
        if len(assign) != self.source.n:
            raise StructuralError("assignment length != source size")
        if any(a < 0 or a >= self.target.n for a in assign):
            raise StructuralError("assignment value out of target range")
        if len(set(assign)) != self.target.n:
            raise StructuralError("assignment is not surjective")
        object.__setattr__(self, "assign", assign)

    def preimage(self, y: int) -> list[int]:
        return [i for i, a in enumerate(self.assign) if a == y]

    @property
    def degenerate(self) -> bool:
        return self.target.n == 1


def lip_colip(qm: QuotientMap) -> tuple[float, float]:
    """(lip, colip) over all target pairs; (1, 1) when the target is a point.

    lip = max d_Y(y, z) / d(f^-1(y), f^-1(z));
    colip = max H(f^-1(y), f^-1(z)) / d_Y(y, z).
    """
    if qm.degenerate:
        return 1.0, 1.0
    pre = [qm.preimage(y) for y in range(qm.target.n)]
    lip = 0.0
    colip = 0.0
    for y in range(qm.target.n):
        for z in range(y + 1, qm.target.n):
            dy = qm.target.dist[y, z]
            sd = set_distance(qm.source, pre[y], pre[z])
            hd = hausdorff(qm.source, pre[y], pre[z])
            if sd <= 0:
                raise StructuralError("preimages of distinct points at distance 0")
            lip = max(lip, dy / sd)
            colip = max(colip, hd / dy)
    return float(lip), float(colip)


def certify_lip_quotient(qm: QuotientMap, alpha: float) -> bool:
    """True iff lip * colip <= alpha + 1e-9."""
    lip, colip = lip_colip(qm)
    return bool(lip * colip <= alpha + 1e-9)


def quotient_map_to_json(qm: QuotientMap) -> dict:
    return {
        "source": metric_to_json(qm.source),
        "target": metric_to_json(qm.target),
        "assign": list(qm.assign),
    }


def quotient_map_from_json(doc: dict) -> QuotientMap:
    return QuotientMap(
        metric_from_json(doc["source"]),
        metric_from_json(doc["target"]),
        tuple(int(a) for a in doc["assign"]),
    )

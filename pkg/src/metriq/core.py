"""Finite metric spaces: representation, validation, and elementary functionals.

A metric space is an n x n symmetric matrix of nonnegative floats with zero
diagonal, positive off-diagonal entries, and the triangle inequality holding
within an additive tolerance (needed because many of our metrics are computed,
not given).  Points are identified by index; labels are cosmetic.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError, UndefinedInputError

#: Additive tolerance for all metric checks on 64-bit floats.
TOL = 1e-9


@dataclass(frozen=True)
class MetricSpace:
    """An n-point metric given by its full distance matrix."""

    dist: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise StructuralError(f"distance matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise StructuralError("distance matrix contains non-finite entries")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != d.shape[0]:
                raise StructuralError("label count does not match point count")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    def min_distance(self) -> float:
        """Smallest off-diagonal distance."""
        if self.n < 2:
            raise UndefinedInputError("min_distance needs at least 2 points")
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    def restrict(self, points) -> "MetricSpace":
        """Induced subspace on the given point indices, in the given order."""
        idx = list(points)
        if len(idx) == 0:
            raise UndefinedInputError("cannot restrict to an empty point set")
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in idx)
        return MetricSpace(self.dist[np.ix_(idx, idx)], labels)


@dataclass(frozen=True)
class WeightedMetricSpace:
    """A metric space with a nonnegative weight attached to each point."""

    base: MetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != self.base.n:
            raise StructuralError("weights length must equal point count")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise StructuralError("weights must be finite and nonnegative")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def total(self) -> float:
        return float(self.weights.sum())

    def w_inf(self, points) -> float:
        """Maximum weight over a point set."""
        idx = list(points)
        if not idx:
            raise UndefinedInputError("w_inf of an empty set")
        return float(self.weights[idx].max())


# ---------------------------------------------------------------------------
# Special metric families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Star:
    """Star metric: a root at distance 1 from ``n`` leaves, leaves pairwise at ``tau``."""

    n: int
    tau: float = 2.0


@dataclass(frozen=True)
class Lacunary:
    """Metric on len(a)+1 points with d(i, j) = a[i] for i < j (0-based).

    The sequence must be nonincreasing with a[i+1] <= a[i]/k.
    """

    a: tuple[float, ...]
    k: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))


@dataclass(frozen=True)
class Equilateral:
    """All pairwise distances equal to ``edge``."""

    n: int
    edge: float = 1.0


SpecialMetric = Star | Lacunary | Equilateral


def realize_special(s: SpecialMetric) -> MetricSpace:
    """Materialize a special metric family member as a MetricSpace."""
    if isinstance(s, Star):
        if s.n < 1:
            raise StructuralError("star needs at least one leaf")
        if not (0.0 < s.tau <= 2.0):
            raise StructuralError(f"star leaf distance must be in (0, 2], got {s.tau}")
        d = np.full((s.n + 1, s.n + 1), s.tau)
        d[0, :] = 1.0
        d[:, 0] = 1.0
        np.fill_diagonal(d, 0.0)
        return MetricSpace(d)
    if isinstance(s, Lacunary):
        a = np.asarray(s.a, dtype=np.float64)
        if a.size < 1 or np.any(a <= 0):
            raise StructuralError("lacunary sequence must be nonempty and positive")
        if np.any(a[1:] > a[:-1] / s.k + TOL):
            raise StructuralError(f"sequence is not {s.k}-lacunary")
        n = a.size + 1
        d = np.zeros((n, n))
        for i in range(n - 1):
            d[i, i + 1 :] = a[i]
            d[i + 1 :, i] = a[i]
        return MetricSpace(d)
    if isinstance(s, Equilateral):
        if s.n < 1 or s.edge <= 0:
            raise StructuralError("equilateral needs n >= 1 and edge > 0")
        d = np.full((s.n, s.n), float(s.edge))
        np.fill_diagonal(d, 0.0)
        return MetricSpace(d)
    raise StructuralError(f"unknown special metric {s!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    """List of invariant violations; empty iff the object is valid."""

    violations: list[tuple[str, tuple, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, where: tuple, detail: str):
        self.violations.append((kind, tuple(where), detail))

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"{k} at {w}: {msg}" for k, w, msg in self.violations)


def validate_metric(m: MetricSpace | np.ndarray, tol: float = TOL) -> ValidationReport:
    """Check symmetry, zero diagonal, positivity, and the triangle inequality.

    Every violated invariant is reported with the indices where it fails.
    """
    d = m.dist if isinstance(m, MetricSpace) else np.asarray(m, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise StructuralError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    report = ValidationReport()

    bad = np.flatnonzero(np.abs(np.diag(d)) > tol)
    for i in bad:
        report.add("diagonal", (int(i),), f"d(i,i) = {d[i, i]!r} != 0")

    asym = np.argwhere(np.abs(d - d.T) > tol)
    for i, j in asym:
        if i < j:
            report.add("symmetry", (int(i), int(j)), f"{d[i, j]!r} != {d[j, i]!r}")

    nonpos = np.argwhere(d <= tol)
    for i, j in nonpos:
        if i < j:
            report.add("positivity", (int(i), int(j)), f"d = {d[i, j]!r} <= 0 off-diagonal")

    # Triangle inequality: for each middle point j, d[i,k] <= d[i,j] + d[j,k].
    for j in range(n):
        slack = d - (d[:, j][:, None] + d[j][None, :])
        viol = np.argwhere(slack > tol)
        for i, k in viol:
            if i != j and k != j and i < k:
                report.add(
                    "triangle",
                    (int(i), int(j), int(k)),
                    f"d(i,k) = {d[i, k]!r} > {d[i, j] + d[j, k]!r}",
                )
    return report


# ---------------------------------------------------------------------------
# Elementary functionals
# ---------------------------------------------------------------------------


def aspect_ratio(m: MetricSpace) -> float:
    """Diameter over the minimum positive distance (>= 1)."""
    if m.n < 2:
        raise UndefinedInputError("aspect ratio needs at least 2 points")
    return m.diameter() / m.min_distance()


def nearest_radius(m: MetricSpace, x: int) -> float:
    """Distance from x to its closest other point."""
    if m.n < 2:
        raise UndefinedInputError("nearest_radius needs at least 2 points")
    row = np.delete(m.dist[x], x)
    return float(row.min())


def nearest_radii(m: MetricSpace) -> np.ndarray:
    """Vector of nearest-neighbor distances for every point."""
    if m.n < 2:
        raise UndefinedInputError("nearest_radii needs at least 2 points")
    d = m.dist + np.diag(np.full(m.n, np.inf))
    return d.min(axis=1)


def band(m: MetricSpace, a: float, b: float) -> list[int]:
    """Points whose nearest-neighbor distance lies in the half-open band [a, b)."""
    if not (0 < a < b):
        raise UndefinedInputError(f"band needs 0 < a < b, got a={a}, b={b}")
    r = nearest_radii(m)
    return [int(i) for i in np.flatnonzero((r >= a) & (r < b))]


def set_distance(m: MetricSpace, U, V) -> float:
    """Minimum distance between two nonempty point sets."""
    U, V = list(U), list(V)
    if not U or not V:
        raise UndefinedInputError("set_distance of an empty set")
    return float(m.dist[np.ix_(U, V)].min())


def hausdorff(m: MetricSpace, U, V) -> float:
    """Hausdorff distance between two nonempty point sets."""
    U, V = list(U), list(V)
    if not U or not V:
        raise UndefinedInputError("hausdorff distance of an empty set")
    block = m.dist[np.ix_(U, V)]
    return float(max(block.min(axis=1).max(), block.min(axis=0).max()))


# ---------------------------------------------------------------------------
# Interchange formats
# ---------------------------------------------------------------------------


def metric_to_json(m: MetricSpace) -> dict:
    doc = {"n": m.n, "dist": m.dist.tolist()}
    if m.labels is not None:
        doc["labels"] = list(m.labels)
    return doc


def metric_from_json(doc: dict) -> MetricSpace:
    dist = np.asarray(doc["dist"], dtype=np.float64)
    if "n" in doc and int(doc["n"]) != dist.shape[0]:
        raise StructuralError("declared n does not match matrix size")
    labels = tuple(doc["labels"]) if doc.get("labels") else None
    return MetricSpace(dist, labels)


def metric_to_csv(m: MetricSpace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    for row in m.dist:
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def metric_from_csv(text: str) -> MetricSpace:
    rows = [
        [float(x) for x in row]
        for row in csv.reader(io.StringIO(text))
        if row and any(cell.strip() for cell in row)
    ]
    return MetricSpace(np.asarray(rows, dtype=np.float64))


def dumps(doc: dict) -> str:
    """Canonical JSON serialization: sorted keys, fixed separators.

    Used for every artifact so identical objects are byte-identical on disk.
    """
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))

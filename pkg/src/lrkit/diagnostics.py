"""Exact comparison instruments for spline collections.

Every member is expanded, per element, into the local tensor Bernstein basis
with rational coefficients (knots are taken exactly from their binary value).
Ranks, spans and partition-of-unity checks are then questions about these
rational vectors and are answered exactly.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import flint
import numpy as np

from .collection import Independence, SplineCollection
from .errors import InconsistencyError, InvalidInputError
from .errors import LRKitError as LRKitErrorBase
from .exact import exact_rank
from .lrmesh import BoxPartition, elements, from_bsplines
from .splinecore import refinement_rows

__all__ = [
    "ExtractionTable",
    "IndependenceReport",
    "PartitionReport",
    "NestednessReport",
    "extract",
    "linear_independence",
    "partition_of_unity",
    "nestedness",
    "polynomial_reproduction",
    "sample_grid",
    "growth_compare",
    "GrowthTable",
]


def _fr(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@lru_cache(maxsize=200_000)
def _bernstein_1d(knots: tuple, a, b) -> tuple:
    """Bernstein coefficients of ``B[knots]`` restricted to ``[a, b]``."""
    p = len(knots) - 2
    t = [_fr(v) for v in knots]
    a, b = _fr(a), _fr(b)
    if b <= t[0] or a >= t[-1]:
        return (Fraction(0),) * (p + 1)
    if a < t[0] or b > t[-1] or any(a < v < b for v in t):
        raise InconsistencyError(f"B-spline knots {knots} are not aligned with element [{a}, {b}]")
    extra = [a] * (p + 1 - t.count(a)) + [b] * (p + 1 - t.count(b))
    fine = sorted(t + extra)
    row = refinement_rows(t, fine, p)[0]
    k = fine.index(a)
    return tuple(Fraction(row.get(k + j, 0)) for j in range(p + 1))


def _ratio(x) -> tuple:
    f = _fr(x)
    return f.numerator, f.denominator


@lru_cache(maxsize=500_000)
def _tensor_block(knots: tuple, box: tuple) -> tuple:
    """Nonzero ``(local index, fmpq)`` pairs of a tensor B-spline on one element."""
    parts = []
    for values, (a, b) in zip(knots, box):
        parts.append([flint.fmpq(*_ratio(v)) for v in _bernstein_1d(values, a, b)])
    out = []
    for j, combo in enumerate(itertools.product(*parts)):
        v = math.prod(combo)
        if v != 0:
            out.append((j, v))
    return tuple(out)


def _bernstein_vals(p: int, a: float, b: float, x: np.ndarray) -> np.ndarray:
    s = (np.asarray(x, dtype=float) - a) / (b - a)
    return np.array([math.comb(p, j) * s**j * (1 - s) ** (p - j) for j in range(p + 1)])


@dataclass(frozen=True)
class ExtractionTable:
    """Per-element rational Bernstein coefficients of the basis functions.

    ``rows[f]`` maps ``(element index, local Bernstein index)`` to the
    coefficient of function ``f`` (the gamma-weighted sum of its members).
    """

    elements: tuple
    degrees: tuple
    functions: tuple
    rows: tuple

    @property
    def block_size(self) -> int:
        return math.prod(p + 1 for p in self.degrees)

    def element_block(self, e: int) -> dict:
        """``{function: [coefficients]}`` for the functions alive on element ``e``."""
        out = {}
        n = self.block_size
        for f, row in enumerate(self.rows):
            vals = [row.get((e, j), Fraction(0)) for j in range(n)]
            if any(vals):
                out[f] = vals
        return out

    def evaluate(self, f: int, x) -> float:
        """Evaluate function ``f`` from its Bernstein coefficients at the point ``x``."""
        x = tuple(float(v) for v in x)
        for e, box in enumerate(self.elements):
            if all(lo <= xi < hi or (xi == hi == self._top[k]) for k, (xi, (lo, hi)) in enumerate(zip(x, box))):
                break
        else:
            raise InvalidInputError("point outside all elements")
        coefs = np.array([float(self.rows[f].get((e, j), 0)) for j in range(self.block_size)])
        basis = [_bernstein_vals(p, lo, hi, np.array([xi]))[:, 0] for p, (lo, hi), xi in zip(self.degrees, box, x)]
        tensor = basis[0]
        for bv in basis[1:]:
            tensor = np.multiply.outer(tensor, bv).ravel()
        return float(coefs @ tensor)

    @property
    def _top(self):
        return tuple(max(box[k][1] for box in self.elements) for k in range(len(self.degrees)))


def _default_partition(c: SplineCollection) -> BoxPartition:
    if c.mesh is not None:
        return c.mesh
    return from_bsplines([s.bspline for s in c.splines], c.domain, c.degrees)


def extract(c: SplineCollection, partition: BoxPartition | None = None) -> ExtractionTable:
    """Exact Bernstein extraction of every function of ``c`` over ``partition``."""
    bp = partition if partition is not None else _default_partition(c)
    elems = elements(bp)
    d = c.dimension
    lo = np.array([[e[k][0] for k in range(d)] for e in elems])
    hi = np.array([[e[k][1] for k in range(d)] for e in elems])
    groups = c.function_groups()
    rows = []
    for members in groups:
        row = {}
        for i in members:
            s = c.splines[i]
            box = s.bspline.support()
            mask = np.ones(len(elems), dtype=bool)
            for k in range(d):
                mask &= (lo[:, k] < box[k][1]) & (hi[:, k] > box[k][0])
            g = flint.fmpq(*_ratio(s.gamma))
            knots = tuple(lk.values for lk in s.bspline.knots)
            for e in np.nonzero(mask)[0]:
                e = int(e)
                for j, v in _tensor_block(knots, elems[e]):
                    key = (e, j)
                    row[key] = row.get(key, 0) + g * v
        rows.append({k: Fraction(int(v.p), int(v.q)) for k, v in row.items() if v != 0})
    return ExtractionTable(tuple(elems), c.degrees, tuple(tuple(g) for g in groups), tuple(rows))


@dataclass(frozen=True)
class IndependenceReport:
    status: Independence
    count: int
    rank: int
    certificate: tuple | None = None


def linear_independence(c: SplineCollection, table: ExtractionTable | None = None) -> IndependenceReport:
    """Exact rank of the stacked extraction matrix, with a null-vector certificate."""
    table = table or extract(c)
    res = exact_rank(list(table.rows))
    n = len(table.rows)
    if res.rank == n:
        return IndependenceReport(Independence.INDEPENDENT, n, n)
    cert = _primitive(res.null_vectors[0]) if res.null_vectors else None
    return IndependenceReport(Independence.NOT_INDEPENDENT, n, res.rank, cert)


def _primitive(vec) -> tuple:
    """Scale a rational vector to coprime integers."""
    vec = [_fr(v) for v in vec]
    den = math.lcm(*(v.denominator for v in vec))
    ints = [int(v * den) for v in vec]
    g = math.gcd(*ints) or 1
    return tuple(Fraction(v // g) for v in ints)


def sample_grid(domain, n: int | None = None) -> np.ndarray:
    """Tensor grid of ``n`` Chebyshev-like interior points per direction."""
    if n is None:
        n = int(os.environ.get("LRKIT_SAMPLES", "50"))
    axes = []
    for a, b in domain:
        s = 0.5 * (1 - np.cos(np.pi * (np.arange(n) + 0.5) / n))
        axes.append(a + (b - a) * s)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class PartitionReport:
    max_deviation: float
    exact: bool

    @property
    def ok(self) -> bool:
        return self.exact


def partition_of_unity(c: SplineCollection, samples: int | None = None, exact: bool = True, table=None) -> PartitionReport:
    """Sampled ``max |sum gamma B - 1|`` plus the exact per-element Bernstein check."""
    pts = sample_grid(c.domain, samples)
    dev = float(np.abs(c.partition_sum(pts) - 1.0).max())
    ok = False
    if exact:
        table = table or extract(c)
        total = {}
        for row in table.rows:
            for k, v in row.items():
                total[k] = total.get(k, 0) + v
        n = table.block_size
        ok = all(total.get((e, j), 0) == 1 for e in range(len(table.elements)) for j in range(n))
    return PartitionReport(dev, ok)


@dataclass(frozen=True)
class NestednessReport:
    nested: bool
    residual: float

    def __bool__(self):
        return self.nested


def _common_partition(a: SplineCollection, b: SplineCollection) -> BoxPartition:
    members = [s.bspline for s in a.splines] + [s.bspline for s in b.splines]
    return from_bsplines(members, a.domain, a.degrees)


def nestedness(coarse: SplineCollection, fine: SplineCollection) -> NestednessReport:
    """Does every function of ``coarse`` lie in the span of ``fine``? (exact)"""
    if coarse.domain != fine.domain or coarse.degrees != fine.degrees:
        raise InvalidInputError("collections must share domain and degrees")
    bp = _common_partition(coarse, fine)
    tc = extract(coarse, bp)
    tf = extract(fine, bp)
    r_f = exact_rank(list(tf.rows), want_null=False).rank
    r_all = exact_rank(list(tf.rows) + list(tc.rows), want_null=False).rank
    if r_all == r_f:
        return NestednessReport(True, 0.0)
    return NestednessReport(False, _residual(tf, tc))


def _residual(tf: ExtractionTable, tc: ExtractionTable) -> float:
    cols = sorted({k for row in tf.rows + tc.rows for k in row})
    idx = {k: j for j, k in enumerate(cols)}

    def dense(rows):
        M = np.zeros((len(rows), len(cols)))
        for i, row in enumerate(rows):
            for k, v in row.items():
                M[i, idx[k]] = float(v)
        return M

    F, C = dense(tf.rows), dense(tc.rows)
    X, *_ = np.linalg.lstsq(F.T, C.T, rcond=None)
    return float(np.abs(F.T @ X - C.T).max())


def polynomial_reproduction(c: SplineCollection, partition: BoxPartition | None = None, table=None) -> list:
    """Per element: do the restricted functions span all local polynomials? (exact)"""
    table = table or extract(c, partition)
    n = table.block_size
    blocks = [[] for _ in table.elements]
    for row in table.rows:
        per = {}
        for (e, j), v in row.items():
            per.setdefault(e, {})[j] = v
        for e, r in per.items():
            blocks[e].append(r)
    out = []
    for rows in blocks:
        if len(rows) < n:
            out.append(False)
        else:
            out.append(exact_rank(rows, want_null=False).rank == n)
    return out


# growth comparison ---------------------------------------------------------

METHODS = ("HB", "THB", "LR", "TS")


@dataclass
class GrowthTable:
    """Basis sizes per method after each scenario step (``None`` = not applicable)."""

    steps: list
    counts: dict

    def format(self) -> str:
        head = ["step"] + list(METHODS)
        rows = [head]
        for i, label in enumerate(self.steps):
            rows.append([label] + ["n/a" if self.counts[m][i] is None else str(self.counts[m][i]) for m in METHODS])
        widths = [max(len(r[j]) for r in rows) for j in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def _lr_local(c, x, axis):
    from .lrmesh import MeshRectangle
    from .lrsplines import refine

    best = None
    for s in c.splines:
        box = s.bspline.support()
        if all(lo <= xi < hi or xi == hi == c.domain[k][1] for k, (xi, (lo, hi)) in enumerate(zip(x, box))):
            vol = math.prod(hi - lo for lo, hi in box)
            key = (vol, s.bspline.key)
            if best is None or key < best[0]:
                best = (key, s)
    if best is None:
        raise InvalidInputError(f"{x} lies outside the collection")
    s = best[1]
    t = s.bspline.knots[axis].values
    j = max(i for i in range(len(t) - 1) if t[i] <= x[axis] and t[i] < t[i + 1]) if x[axis] < t[-1] else len(t) - 2
    value = 0.5 * (t[j] + t[j + 1])
    box = s.bspline.support()
    ext = tuple(iv for k, iv in enumerate(box) if k != axis)
    return refine(c, MeshRectangle(axis, value, ext))


def _hb_local(sel, x):
    from .hbsplines import hb_refine

    level = 0
    while level < sel.depth and _point_in_region(sel, level + 1, x):
        level += 1
    best = None
    for idx in _functions_near(sel, level, x):
        rng = sel.support_cells(level, idx)
        if not sel.contains(level, rng, level):
            continue
        h = 2.0**-level
        centre = [a + h * (lo + hi) / 2 for (lo, hi), (a, _) in zip(rng, sel.domain)]
        key = (sum((ci - xi) ** 2 for ci, xi in zip(centre, x)), idx)
        if best is None or key < best[0]:
            best = (key, rng)
    if best is None:
        raise InvalidInputError(f"no level-{level} function to refine near {x}")
    cells = itertools.product(*[range(2 * lo, 2 * hi) for lo, hi in best[1]])
    return hb_refine(sel, level, cells)


def _point_in_region(sel, level, x) -> bool:
    reg = sel.region(level)
    h = 2**level
    n = sel.n_cells(level)
    cell = tuple(min(int((xi - a) * h), m - 1) for xi, (a, _), m in zip(x, sel.domain, n))
    return reg is None or cell in reg


def _functions_near(sel, level, x) -> list:
    h = 2**level
    n = sel.n_cells(level)
    cell = [min(int((xi - a) * h), m - 1) for xi, (a, _), m in zip(x, sel.domain, n)]
    return list(itertools.product(*[range(c, c + p + 1) for c, p in zip(cell, sel.degrees)]))


def _ts_local(m, x, axis):
    from .tsplines import _ray, semi_standard_insert

    anchors = m.anchors()
    order = sorted(anchors, key=lambda a: ((a[0][0] - x[0]) ** 2 + (a[1][0] - x[1]) ** 2, a))
    for a in order:
        for ax in (axis, 1 - axis):
            signs = (1, -1) if x[ax] >= a[ax][0] else (-1, 1)
            for sign in signs:
                hits = _ray(m, a, ax, sign)
                if not hits:
                    continue
                mid = (0.5 * (a[ax][0] + hits[0][0]), 0)
                if not a[ax][0] != mid[0] != hits[0][0]:
                    continue
                q = (mid, a[1]) if ax == 0 else (a[0], mid)
                if m._on_edge(q, ax) and not m._on_edge(q, 1 - ax):
                    return semi_standard_insert(m, q)[0]
    raise InvalidInputError(f"no edge near {x} for an anchor insertion")


def growth_compare(scenario: dict) -> GrowthTable:
    """Basis sizes of HB, THB, LR and semi-standard T-splines along a scenario.

    ``scenario`` holds ``domain`` (integer box), ``degrees`` and ``steps``;
    each step is ``{"kind": "local", "point": [...]}`` or ``{"kind": "global"}``.
    A local step refines around the point with the smallest unit of each
    method: the support of one B-spline for HB/THB, one meshrectangle for LR
    and one control point for T-splines. A global step moves every method to
    the uniform tensor space one dyadic level below the finest line in use.
    """
    from .hbsplines import HierarchySelection, hb_refine, level_knots
    from .lrsplines import from_tensor, refine_many
    from .tsplines import TMesh

    domain = tuple((int(a), int(b)) for a, b in scenario["domain"])
    degrees = tuple(int(p) for p in scenario["degrees"])
    steps = list(scenario.get("steps", []))
    state = {}
    errors = {}
    try:
        state["HB"] = HierarchySelection(domain, degrees)
    except LRKitErrorBase as e:  # pragma: no cover - domain validated above
        errors["HB"] = e
    kvs = [level_knots(a, b, p, 0) for (a, b), p in zip(domain, degrees)]
    state["LR"] = from_tensor(kvs, degrees)
    if degrees == (3, 3):
        state["TS"] = TMesh.from_tensor(*kvs)

    def count(method):
        if method in ("HB", "THB"):
            st = state.get("HB")
            return None if st is None else len(st.active_functions())
        st = state.get(method)
        if st is None:
            return None
        return len(st) if method == "LR" else len(st.functions)

    labels = ["initial"]
    counts = {m: [count(m)] for m in METHODS}
    for n, step in enumerate(steps):
        kind = step.get("kind")
        if kind == "local":
            x = tuple(float(v) for v in step["point"])
            axis = n % len(domain)
            updates = {
                "HB": lambda st: _hb_local(st, x),
                "LR": lambda st: _lr_local(st, x, axis),
                "TS": lambda st: _ts_local(st, x, axis),
            }
            labels.append(f"local {list(x)}")
        elif kind == "global":
            level = _finest_level(state) + 1
            updates = {
                "HB": lambda st: _hb_global(st, level),
                "LR": lambda st: refine_many(st, _uniform_lines(domain, degrees, level), require_split=False),
                "TS": lambda st: TMesh.from_tensor(*[level_knots(a, b, 3, level) for a, b in domain]),
            }
            labels.append(f"global level {level}")
        else:
            raise InvalidInputError(f"unknown step kind {kind!r}")
        for method, fn in updates.items():
            if state.get(method) is None:
                continue
            try:
                state[method] = fn(state[method])
            except LRKitErrorBase:
                state[method] = None
        for m in METHODS:
            counts[m].append(count(m))
    return GrowthTable(labels, counts)


def _finest_level(state) -> int:
    level = state["HB"].depth if state.get("HB") is not None else 0
    for method in ("LR",):
        c = state.get(method)
        if c is not None:
            level = max(level, _dyadic_depth(v for s in c.splines for lk in s.bspline.knots for v in lk.values))
    m = state.get("TS")
    if m is not None:
        level = max(level, _dyadic_depth(v[0] for q in m.vertices for v in q))
    return level


def _dyadic_depth(values) -> int:
    depth = 0
    for v in values:
        d = Fraction(v).denominator.bit_length() - 1
        depth = max(depth, d)
    return depth


def _hb_global(sel, level):
    from .hbsplines import HierarchySelection

    regions = []
    for l in range(1, level + 1):
        n = sel.n_cells(l)
        regions.append(frozenset(itertools.product(*[range(m) for m in n])))
    return HierarchySelection(sel.domain, sel.degrees, tuple(regions), sel.max_level)


def _uniform_lines(domain, degrees, level):
    from .lrmesh import MeshRectangle

    out = []
    h = 2**level
    for k, (a, b) in enumerate(domain):
        ext = tuple((float(x), float(y)) for j, (x, y) in enumerate(domain) if j != k)
        for j in range(1, (b - a) * h):
            out.append(MeshRectangle(k, a + j / h, ext, 1))
    return out

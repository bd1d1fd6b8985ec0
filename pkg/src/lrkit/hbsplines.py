"""Hierarchical and truncated hierarchical B-splines on dyadic grids.

The domain is an integer box ``[a_1, b_1] x ... x [a_d, b_d]``. Level ``l``
uses the uniform knots ``a + j / 2**l`` with clamped ends (multiplicity
``p + 1``). Refined regions are sets of level cells, identified by integer
index tuples; level ``l`` cell ``c`` covers ``[a + c / 2**l, a + (c+1) / 2**l]``
per direction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .collection import Independence, ScaledBSpline, SplineCollection, SplineType
from .errors import InvalidInputError
from .splinecore import KnotVector, LocalKnots, TensorBSpline, greville_abscissae, refinement_rows

__all__ = [
    "HierarchySelection",
    "TruncatedFunction",
    "level_knots",
    "hb_refine",
    "box_cells",
    "truncate",
    "disjoint_support_check",
    "hb_to_collection",
    "refit",
]


@lru_cache(maxsize=None)
def level_knots(lo: int, hi: int, degree: int, level: int) -> KnotVector:
    """Clamped uniform knot vector of the given dyadic level on ``[lo, hi]``."""
    h = 2**level
    inner = [lo + Fraction(j, h) for j in range(1, (hi - lo) * h)]
    vals = [lo] * (degree + 1) + inner + [hi] * (degree + 1)
    return KnotVector([float(v) for v in vals], degree)


@lru_cache(maxsize=None)
def _refine_rows(lo: int, hi: int, degree: int, level: int) -> tuple:
    """Level ``level`` to ``level + 1`` refinement rows, exact."""
    coarse = [Fraction(v) for v in level_knots(lo, hi, degree, level).values]
    fine = [Fraction(v) for v in level_knots(lo, hi, degree, level + 1).values]
    return tuple(tuple(sorted(r.items())) for r in refinement_rows(coarse, fine, degree))


@dataclass(frozen=True)
class HierarchySelection:
    """Dyadic hierarchy with nested refined regions.

    ``regions[l - 1]`` holds the level-``l`` cells of the refined region
    for ``l >= 1``; level 0 is the whole domain.
    """

    domain: tuple
    degrees: tuple
    regions: tuple = ()
    max_level: int = 10

    def __post_init__(self):
        dom = tuple((int(a), int(b)) for a, b in self.domain)
        if any(a != x or b != y for (a, b), (x, y) in zip(dom, self.domain)):
            raise InvalidInputError("hierarchical domains must have integer corners")
        if any(not a < b for a, b in dom):
            raise InvalidInputError("degenerate domain")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "degrees", tuple(int(p) for p in self.degrees))
        regions = tuple(frozenset(tuple(c) for c in r) for r in self.regions)
        while regions and not regions[-1]:
            regions = regions[:-1]
        object.__setattr__(self, "regions", regions)

    @property
    def dimension(self) -> int:
        return len(self.domain)

    @property
    def depth(self) -> int:
        """Index of the finest level in use."""
        return len(self.regions)

    def knots(self, level: int, k: int) -> KnotVector:
        a, b = self.domain[k]
        return level_knots(a, b, self.degrees[k], level)

    def n_cells(self, level: int) -> tuple:
        return tuple((b - a) * 2**level for a, b in self.domain)

    def region(self, level: int):
        """Level cells of the refined region; ``None`` means the whole domain."""
        if level == 0:
            return None
        if level > len(self.regions):
            return frozenset()
        return self.regions[level - 1]

    def support_cells(self, level: int, index: tuple) -> tuple:
        """Per-direction half-open cell index ranges covered by a level function."""
        n = self.n_cells(level)
        return tuple((max(i - p, 0), min(i + 1, m)) for i, p, m in zip(index, self.degrees, n))

    def contains(self, level: int, ranges: tuple, at_level: int) -> bool:
        """Is the box of level-``at_level`` cell ranges inside the level-``level`` region?"""
        reg = self.region(level)
        if reg is None:
            return True
        if not reg:
            return False
        s = 2 ** (level - at_level)
        cells = itertools.product(*[range(lo * s, hi * s) for lo, hi in ranges])
        return all(c in reg for c in cells)

    def is_active(self, level: int, index: tuple) -> bool:
        rng = self.support_cells(level, index)
        return self.contains(level, rng, level) and not self.contains(level + 1, rng, level)

    def active(self, level: int) -> list:
        """Sorted active function indices at ``level``."""
        reg = self.region(level)
        if reg is not None and not reg:
            return []
        if reg is None:
            cand = itertools.product(*[range(kv.dimension) for kv in (self.knots(0, k) for k in range(self.dimension))])
        else:
            found = set()
            for c in reg:
                found.update(itertools.product(*[range(ci, ci + p + 1) for ci, p in zip(c, self.degrees)]))
            cand = sorted(found)
        return [i for i in cand if self.is_active(level, i)]

    def active_functions(self) -> list:
        """All ``(level, index)`` pairs of the hierarchical basis, coarse to fine."""
        return [(l, i) for l in range(self.depth + 1) for i in self.active(l)]

    def bspline(self, level: int, index: tuple) -> TensorBSpline:
        return TensorBSpline([self.knots(level, k).local(i) for k, i in enumerate(index)])


def hb_refine(sel: HierarchySelection, level: int, region) -> HierarchySelection:
    """Add level-(``level`` + 1) cells to the refined region of that level."""
    cells = {tuple(int(x) for x in c) for c in region}
    if not cells:
        return sel
    if not 0 <= level < sel.max_level:
        raise InvalidInputError(f"level {level} outside 0..{sel.max_level - 1}")
    if level > sel.depth:
        raise InvalidInputError(f"level {level} has no refined region yet")
    n = sel.n_cells(level + 1)
    parent = sel.region(level)
    for c in cells:
        if len(c) != sel.dimension or any(not 0 <= x < m for x, m in zip(c, n)):
            raise InvalidInputError(f"cell {c} outside the level-{level + 1} grid")
        if parent is not None and tuple(x // 2 for x in c) not in parent:
            raise InvalidInputError(f"cell {c} is not inside the level-{level} refined region")
    regions = list(sel.regions) + [frozenset()] * (level + 1 - len(sel.regions))
    regions[level] = regions[level] | cells
    return HierarchySelection(sel.domain, sel.degrees, tuple(regions), sel.max_level)


def box_cells(sel: HierarchySelection, level: int, box) -> set:
    """Level cells inside the parameter box ``box`` (corners on the level grid)."""
    h = 2**level
    ranges = []
    for (lo, hi), (a, _) in zip(box, sel.domain):
        ranges.append(range(int(round((lo - a) * h)), int(round((hi - a) * h))))
    return set(itertools.product(*ranges))


@dataclass(frozen=True)
class TruncatedFunction:
    """An active function and its truncated expansion.

    ``terms`` maps ``(level, index)`` to a positive rational coefficient.
    """

    level: int
    index: tuple
    terms: dict = field(compare=False)
    selection: HierarchySelection = field(compare=False, repr=False)

    def members(self) -> list:
        return [(self.selection.bspline(l, i), c) for (l, i), c in sorted(self.terms.items())]


def _children(sel: HierarchySelection, level: int, index: tuple) -> list:
    per = [_refine_rows(a, b, p, level)[i] for (a, b), p, i in zip(sel.domain, sel.degrees, index)]
    out = []
    for combo in itertools.product(*per):
        w = Fraction(1)
        for _, v in combo:
            w *= v
        out.append((tuple(j for j, _ in combo), w))
    return out


def _truncate_one(sel: HierarchySelection, level: int, index: tuple) -> dict:
    terms = {(level, index): Fraction(1)}
    for m in range(level, sel.depth):
        nxt = {}
        for (l, i), c in terms.items():
            if l != m:
                nxt[(l, i)] = nxt.get((l, i), 0) + c
                continue
            kids = _children(sel, m, i)
            drop = [sel.contains(m + 1, sel.support_cells(m + 1, j), m + 1) for j, _ in kids]
            if not any(drop):
                nxt[(l, i)] = nxt.get((l, i), 0) + c
                continue
            for (j, w), gone in zip(kids, drop):
                if not gone and w:
                    nxt[(m + 1, j)] = nxt.get((m + 1, j), 0) + c * w
        terms = nxt
    return {k: v for k, v in terms.items() if v}


def truncate(sel: HierarchySelection) -> list:
    """Truncated expansion of every active function.

    Coefficients of finer functions whose support lies in the finer refined
    region are dropped, level by level. Terms whose children are all kept stay
    at their coarser level.
    """
    return [TruncatedFunction(l, i, _truncate_one(sel, l, i), sel) for l, i in sel.active_functions()]


def disjoint_support_check(t: TruncatedFunction) -> bool:
    """True iff the open set where the truncated function is nonzero is connected.

    The terms are nonnegative, so that set is the union of the open member
    supports; two supports meeting only along a face count as disjoint parts.
    """
    boxes = [b.support() for b, _ in t.members()]
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(len(boxes)):
            if j not in seen and _overlap(boxes[i], boxes[j]):
                seen.add(j)
                stack.append(j)
    return len(seen) == len(boxes)


def _overlap(a, b) -> bool:
    return all(max(x[0], y[0]) < min(x[1], y[1]) for x, y in zip(a, b))


def hb_to_collection(sel: HierarchySelection, truncated: bool, coefficients=None) -> SplineCollection:
    """Flat collection of the (truncated) hierarchical basis.

    ``coefficients`` holds one control value per active function; by default
    each function gets its Greville point, which reproduces the identity in
    the truncated case. Truncated functions are expanded into their terms,
    which share one ``group`` id and one control value.
    """
    funcs = sel.active_functions()
    if coefficients is None:
        coefficients = [_greville(sel, l, i) for l, i in funcs]
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.ndim == 1:
        coefficients = coefficients[:, None]
    if coefficients.shape[0] != len(funcs):
        raise InvalidInputError(f"expected {len(funcs)} coefficients, got {coefficients.shape[0]}")
    splines = []
    if truncated:
        for g, ((l, i), c) in enumerate(zip(funcs, coefficients)):
            terms = _truncate_one(sel, l, i)
            group = g if len(terms) > 1 else None
            for (tl, ti), w in sorted(terms.items()):
                splines.append(ScaledBSpline(sel.bspline(tl, ti), w, c, None, group))
    else:
        for (l, i), c in zip(funcs, coefficients):
            splines.append(ScaledBSpline(sel.bspline(l, i), Fraction(1), c))
    domain = tuple((float(a), float(b)) for a, b in sel.domain)
    return SplineCollection(splines, SplineType.HIERARCHICAL_BSPLINE, Independence.INDEPENDENT, domain=domain)


def _greville(sel: HierarchySelection, level: int, index: tuple) -> list:
    return [float(greville_abscissae(sel.knots(level, k))[i]) for k, i in enumerate(index)]


def refit(target: SplineCollection, source: SplineCollection) -> SplineCollection:
    """Control values for ``target`` reproducing the geometry of ``source``.

    Least squares over interior sample points of every polynomial piece;
    exact (to rounding) when the source lies in the target span.
    """
    from .lrmesh import elements, from_bsplines

    bp = from_bsplines([s.bspline for s in target.splines] + [s.bspline for s in source.splines], target.domain, target.degrees)
    pts = []
    for box in elements(bp):
        axes = []
        for (lo, hi), p in zip(box, target.degrees):
            s = 0.5 * (1 - np.cos(np.pi * (np.arange(p + 1) + 0.5) / (p + 1)))
            axes.append(lo + (hi - lo) * s)
        pts.extend(itertools.product(*axes))
    pts = np.array(pts)
    B = target.basis_values(pts) * target.gammas()
    groups = target.function_groups()
    F = np.stack([B[:, g].sum(axis=1) for g in groups], axis=1)
    vals = source.evaluate(pts)
    X, *_ = np.linalg.lstsq(F, vals, rcond=None)
    coefs = np.zeros((len(target.splines), X.shape[1]))
    for g, x in zip(groups, X):
        coefs[g] = x
    return target.with_coefficients(coefs)

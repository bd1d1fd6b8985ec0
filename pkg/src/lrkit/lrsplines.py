"""LR B-spline collections and meshrectangle refinement.

Scaling factors are kept as exact :class:`~fractions.Fraction` values so that
the scaled partition of unity survives any number of splits without rounding.
Control values are floats.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
import warnings
from collections import namedtuple
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .collection import Independence, ScaledBSpline, SplineCollection, SplineType
from .errors import IndependenceWarning, InvalidInputError, NoSplitError
from .lrmesh import BoxPartition, MeshRectangle, bspline_is_split, elements, from_tensor_space
from .splinecore import KnotVector, LocalKnots, TensorBSpline, greville_abscissae, split_weights

__all__ = [
    "from_tensor",
    "refine",
    "refine_many",
    "structured_refine",
    "minimal_support",
    "anchor",
    "RefinementStats",
]

RefinementStats = namedtuple("RefinementStats", "split produced removed")


def _as_kv(kv, p=None) -> KnotVector:
    return kv if isinstance(kv, KnotVector) else KnotVector(kv, p)


def from_tensor(knot_vectors: Sequence, degrees=None, coefficients=None, weights=None) -> SplineCollection:
    """All ``N_1 * ... * N_d`` tensor B-splines with unit scaling.

    ``coefficients`` is an array of shape ``(N_1, ..., N_d, g)`` or ``(N, g)``
    in C order; by default the Greville points (identity geometry) are used.
    """
    degrees = degrees or [None] * len(knot_vectors)
    kvs = [_as_kv(kv, p) for kv, p in zip(knot_vectors, degrees)]
    dims = [kv.dimension for kv in kvs]
    n = int(np.prod(dims))
    if coefficients is None:
        grev = [greville_abscissae(kv) if kv.degree > 0 else greville_abscissae(kv) for kv in kvs]
        coefficients = np.array([[g[i] for g, i in zip(grev, idx)] for idx in itertools.product(*[range(m) for m in dims])])
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.ndim == 1:
        coefficients = coefficients[:, None]
    if coefficients.shape[:-1] == tuple(dims):
        coefficients = coefficients.reshape(n, -1)
    if coefficients.shape[0] != n:
        raise InvalidInputError(f"expected {n} coefficients, got {coefficients.shape[0]}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float).reshape(n)
    splines = []
    for j, idx in enumerate(itertools.product(*[range(m) for m in dims])):
        b = TensorBSpline([kv.local(i) for kv, i in zip(kvs, idx)])
        w = None if weights is None else float(weights[j])
        splines.append(ScaledBSpline(b, Fraction(1), coefficients[j], w))
    mesh = from_tensor_space(kvs)
    return SplineCollection(splines, SplineType.LR_BSPLINE, Independence.INDEPENDENT, mesh=mesh)


def minimal_support(b: TensorBSpline, mesh: BoxPartition) -> bool:
    """True iff no meshrectangle of ``mesh`` splits ``b``."""
    return bspline_is_split(mesh, b) is None


def anchor(b: TensorBSpline) -> tuple:
    """Middle knot for odd degree, average of the two middle knots for even degree."""
    out = []
    for lk in b.knots:
        p = lk.degree
        t = lk.values
        if p % 2:
            out.append(float(t[(p + 1) // 2]))
        else:
            out.append(0.5 * (float(t[p // 2]) + float(t[p // 2 + 1])))
    return tuple(out)


def _homogeneous(s: ScaledBSpline) -> np.ndarray:
    if s.weight is None:
        return s.coefficient
    return np.append(s.weight * s.coefficient, s.weight)


def _split(key: tuple, direction: int, value) -> list:
    """Children ``[(key, weight), ...]`` of inserting ``value`` once in ``direction``."""
    t = key[direction]
    ft = [Fraction(v) for v in t]
    u = Fraction(value)
    w1, w2 = split_weights(ft, u)
    new = sorted(t + (value,))
    out = []
    if w1:
        out.append((key[:direction] + (tuple(new[:-1]),) + key[direction + 1 :], Fraction(w1)))
    if w2:
        out.append((key[:direction] + (tuple(new[1:]),) + key[direction + 1 :], Fraction(w2)))
    return out


def _bspline(key: tuple) -> TensorBSpline:
    return TensorBSpline([LocalKnots(t) for t in key])


def _volume(key: tuple) -> float:
    return math.prod(t[-1] - t[0] for t in key)


def _resolve(entries: dict, mesh: BoxPartition, queue: list, rng=None) -> None:
    """Split until every entry has minimal support on ``mesh`` (in place).

    Without ``rng`` the largest supports go first, so each B-spline has
    received all its contributions before it is split. With ``rng`` the
    order is random; the result is the same.
    """
    pending = set(queue)
    if rng is None:
        heap = [(-_volume(k), k) for k in pending]
        heapq.heapify(heap)
    else:
        heap = sorted(pending)
    verdict = {}
    while heap:
        if rng is None:
            key = heapq.heappop(heap)[1]
        else:
            i = rng.randrange(len(heap))
            heap[i], heap[-1] = heap[-1], heap[i]
            key = heap.pop()
        pending.discard(key)
        if key not in entries:
            continue
        if key not in verdict:
            verdict[key] = bspline_is_split(mesh, _bspline(key))
        hit = verdict[key]
        if hit is None:
            continue
        k, v, _ = hit
        gamma, hom = entries.pop(key)
        for child, w in _split(key, k, v):
            g = gamma * w
            if child in entries:
                g0, h0 = entries[child]
                gn = g0 + g
                entries[child] = (gn, (float(g0) * h0 + float(g) * hom) / float(gn))
            else:
                entries[child] = (g, hom)
            if child not in pending:
                pending.add(child)
                if rng is None:
                    heapq.heappush(heap, (-_volume(child), child))
                else:
                    heap.append(child)


def refine_many(
    c: SplineCollection,
    rects: Iterable[MeshRectangle],
    require_split: bool = True,
    check_independence: bool = False,
    rng: random.Random | None = None,
    return_stats: bool = False,
):
    """Insert several meshrectangles, then split B-splines to minimal support."""
    if c.mesh is None:
        raise InvalidInputError("LR refinement needs a collection carrying a box-partition")
    rects = list(rects)
    mesh = c.mesh.with_rectangles(rects)
    rational = c.rational
    entries = {}
    for s in c.splines:
        entries[s.bspline.key] = (Fraction(s.gamma), _homogeneous(s))
    old_keys = set(entries)
    queue = [k for k in entries if bspline_is_split(mesh, _bspline(k)) is not None]
    n_split = len(queue)
    if require_split and not queue:
        raise NoSplitError("the meshrectangle does not split the support of any B-spline")
    queue.sort()
    _resolve(entries, mesh, queue, rng)
    splines = []
    for key in sorted(entries):
        gamma, hom = entries[key]
        if rational:
            w = float(hom[-1])
            splines.append(ScaledBSpline(_bspline(key), gamma, hom[:-1] / w, w))
        else:
            splines.append(ScaledBSpline(_bspline(key), gamma, hom))
    out = c.replace(splines=splines, mesh=mesh, independence=Independence.NOT_TESTED)
    if check_independence:
        from .diagnostics import linear_independence

        out = out.replace(independence=linear_independence(out).status)
    if return_stats:
        new_keys = set(entries)
        stats = RefinementStats(n_split, len(new_keys - old_keys), len(old_keys - new_keys))
        return out, stats
    return out


def refine(c: SplineCollection, r: MeshRectangle, check_independence: bool = False, rng=None, return_stats=False):
    """Insert one meshrectangle and restore minimal support.

    Raises :class:`NoSplitError` when, after insertion, no B-spline is split.
    With ``check_independence`` the exact rank of the result decides the
    independence tag (otherwise it is ``NotTested``).
    """
    return refine_many(c, [r], True, check_independence, rng, return_stats)


def structured_refine(c: SplineCollection, selected, check_independence: bool = True) -> SplineCollection:
    """Bisect every element in the support of each selected B-spline in all directions.

    Up to degree 3 such refinements are known to stay independent. Above it
    an :class:`IndependenceWarning` is issued unless the exact check ran and
    found the result independent.
    """
    selected = sorted(set(selected))
    if not selected:
        raise InvalidInputError("structured refinement needs at least one selected B-spline")
    if c.mesh is None:
        raise InvalidInputError("LR refinement needs a collection carrying a box-partition")
    elems = elements(c.mesh)
    d = c.dimension
    rects = set()
    for i in selected:
        box = c.splines[i].bspline.support()
        for e in elems:
            if not all(a >= lo and b <= hi for (a, b), (lo, hi) in zip(e, box)):
                continue
            for k in range(d):
                mid = 0.5 * (e[k][0] + e[k][1])
                ext = tuple(iv for j, iv in enumerate(e) if j != k)
                if c.mesh.multiplicity_over(k, mid, ext) >= 1:
                    continue
                rects.add(MeshRectangle(k, mid, ext, 1))
    out = refine_many(c, sorted(rects, key=lambda r: (r.direction, r.value, r.extent)), False, check_independence)
    if max(c.degrees) > 3 and out.independence != Independence.INDEPENDENT:
        found = "is linearly dependent" if out.independence == Independence.NOT_INDEPENDENT else "was not checked"
        warnings.warn(
            f"structured refinement above degree 3 has no independence guarantee; the result {found}",
            IndependenceWarning,
            stacklevel=2,
        )
    return out

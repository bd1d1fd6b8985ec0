"""Bi-cubic T-meshes: knot inference by traversal and local refinement.

Lines of the T-mesh are identified by keys ``(value, tag)``. The tag is 0 for
interior lines and separates the repeated lines of a clamped boundary
(``-3..0`` at the start, ``0..3`` at the end), so that repeated knot values
still give distinct lines to traverse. A vertex is a pair of keys ``(s, t)``.

Blending functions are stored by their local knot keys; values for evaluation
are the first components.
"""

from __future__ import annotations

import bisect
import copy
import enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from .collection import Independence, ScaledBSpline, SplineCollection, SplineType
from .errors import FixpointError, InconsistencyError, InvalidInputError, MalformedMeshError
from .splinecore import KnotVector, LocalKnots, TensorBSpline, greville_abscissae, split_weights

__all__ = [
    "TMesh",
    "TSplineClass",
    "InferredBSpline",
    "infer_knots",
    "standard_rule_check",
    "semi_standard_insert",
    "tmesh_to_collection",
    "classify",
]

DEGREE = 3


class TSplineClass(str, enum.Enum):
    STANDARD = "Standard"
    SEMI_STANDARD = "SemiStandard"
    NON_STANDARD = "NonStandard"


class InferredBSpline:
    """A blending function: anchor, five knots per direction, scaling and control value."""

    __slots__ = ("anchor", "s_knots", "t_knots", "gamma", "coefficient")

    def __init__(self, anchor, s_knots, t_knots, gamma, coefficient):
        self.anchor = anchor
        self.s_knots = tuple(s_knots)
        self.t_knots = tuple(t_knots)
        self.gamma = gamma
        self.coefficient = np.asarray(coefficient, dtype=float)

    def bspline(self) -> TensorBSpline:
        return TensorBSpline([[k[0] for k in self.s_knots], [k[0] for k in self.t_knots]])

    def __repr__(self):
        s = [k[0] for k in self.s_knots]
        t = [k[0] for k in self.t_knots]
        return f"InferredBSpline(anchor={self.anchor[0][0], self.anchor[1][0]}, s={s}, t={t}, gamma={self.gamma})"


def _merge(intervals: list, new: tuple) -> list:
    out = []
    lo, hi = new
    for a, b in sorted(intervals):
        if b < lo or a > hi:
            out.append((a, b))
        else:
            lo, hi = min(lo, a), max(hi, b)
    out.append((lo, hi))
    return sorted(out)


def _covers(intervals, x) -> bool:
    return any(a <= x <= b for a, b in intervals)


def _line_keys(kv: KnotVector) -> list:
    vals = kv.values
    first, last = vals[0], vals[-1]
    keys = []
    for i, v in enumerate(vals):
        if v == first:
            keys.append((v, i - (kv.multiplicity(first) - 1)))
        elif v == last:
            keys.append((v, i - (len(vals) - kv.multiplicity(last))))
        else:
            if kv.multiplicity(v) > 1:
                raise InvalidInputError("interior knot multiplicity is not supported in T-meshes")
            keys.append((v, 0))
    return keys


class TMesh:
    """Bi-cubic T-mesh with its blending functions.

    ``edges[0]`` maps a t-line key to the intervals of horizontal edges on it;
    ``edges[1]`` maps an s-line key to vertical edge intervals. ``functions``
    maps ``(s_knots, t_knots)`` to ``(gamma, control value)``.
    """

    def __init__(self, s_range, t_range, vertices, h_edges, v_edges, functions=None):
        self.anchor_box = (tuple(s_range), tuple(t_range))
        self.vertices = set(vertices)
        self.edges = ({k: list(v) for k, v in h_edges.items()}, {k: list(v) for k, v in v_edges.items()})
        self.functions = dict(functions or {})
        for q in self.vertices:
            if not self._on_edge(q, 0) and not self._on_edge(q, 1):
                raise MalformedMeshError(f"vertex {q} does not lie on any edge")

    # construction -------------------------------------------------------
    @classmethod
    def from_tensor(cls, s_knots, t_knots, coefficients=None) -> "TMesh":
        """Tensor T-mesh of the bi-cubic space on two clamped knot vectors."""
        kvs = [k if isinstance(k, KnotVector) else KnotVector(k, DEGREE) for k in (s_knots, t_knots)]
        if any(kv.degree != DEGREE for kv in kvs):
            raise InvalidInputError("T-meshes are bi-cubic")
        sk, tk = (_line_keys(kv) for kv in kvs)
        ns, nt = (kv.dimension for kv in kvs)
        if coefficients is None:
            gs, gt = (greville_abscissae(kv) for kv in kvs)
            coefficients = np.array([[[gs[i], gt[j]] for j in range(nt)] for i in range(ns)])
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.ndim == 2:
            coefficients = coefficients.reshape(ns, nt, -1)
        if coefficients.shape[:2] != (ns, nt):
            raise InvalidInputError(f"expected {ns}x{nt} control values")
        vertices = {(a, b) for a in sk for b in tk}
        h = {b: [(sk[0], sk[-1])] for b in tk}
        v = {a: [(tk[0], tk[-1])] for a in sk}
        funcs = {}
        for i in range(ns):
            for j in range(nt):
                funcs[(tuple(sk[i : i + 5]), tuple(tk[j : j + 5]))] = (Fraction(1), coefficients[i, j])
        return cls((sk[2], sk[-3]), (tk[2], tk[-3]), vertices, h, v, funcs)

    @classmethod
    def from_edges(cls, s_range, t_range, vertices, h_edges, v_edges, coefficients=None) -> "TMesh":
        """Hand-built mesh; blending functions come from traversal with unit scaling."""
        m = cls(s_range, t_range, vertices, h_edges, v_edges)
        anchors = m.anchors()
        for n, a in enumerate(anchors):
            s, t = _infer_keys(m, a)
            c = np.asarray([a[0][0], a[1][0]] if coefficients is None else coefficients[n], dtype=float)
            m.functions[(s, t)] = (Fraction(1), c)
        return m

    def copy(self) -> "TMesh":
        return copy.deepcopy(self)

    # queries --------------------------------------------------------------
    def anchors(self) -> list:
        (s0, s1), (t0, t1) = self.anchor_box
        return sorted(q for q in self.vertices if s0 <= q[0] <= s1 and t0 <= q[1] <= t1)

    def _on_edge(self, q, axis: int) -> bool:
        # axis 0: on a horizontal edge (t-line q[1]); axis 1: vertical edge
        line, pos = (q[1], q[0]) if axis == 0 else (q[0], q[1])
        return _covers(self.edges[axis].get(line, ()), pos)

    def blending_functions(self) -> list:
        out = []
        for (s, t), (g, c) in sorted(self.functions.items()):
            out.append(InferredBSpline((s[2], t[2]), s, t, g, c))
        return out

    @property
    def domain(self) -> tuple:
        s = sorted({q[0] for q in self.vertices})
        t = sorted({q[1] for q in self.vertices})
        return (s[0][0], s[-1][0]), (t[0][0], t[-1][0])

    # edits ----------------------------------------------------------------
    def _add_edge(self, axis: int, line, a, b):
        lo, hi = min(a, b), max(a, b)
        self.edges[axis][line] = _merge(self.edges[axis].get(line, []), (lo, hi))

    def _visible(self, axis: int, line, a, b) -> bool:
        # no transversal edge strictly between a and b along the line
        lo, hi = min(a, b), max(a, b)
        for x, ivs in self.edges[1 - axis].items():
            if lo < x < hi and _covers(ivs, line):
                return False
        return True

    def _connect(self, q):
        for axis in (0, 1):
            line, pos = (q[1], q[0]) if axis == 0 else (q[0], q[1])
            same = sorted(v[axis] for v in self.vertices if v[1 - axis] == line and v != q)
            i = bisect.bisect_left(same, pos)
            for other in (same[i - 1] if i > 0 else None, same[i] if i < len(same) else None):
                if other is not None and self._visible(axis, line, pos, other):
                    self._add_edge(axis, line, pos, other)

    def _add_vertex(self, q):
        self.vertices.add(q)
        self._connect(q)


def _as_key(x):
    if isinstance(x, tuple):
        return (float(x[0]), int(x[1]))
    return (float(x), 0)


def _as_point(m: TMesh, a):
    q = (_as_key(a[0]), _as_key(a[1]))
    return q


def _ray(m: TMesh, q, axis: int, sign: int) -> list:
    """Keys hit along ``axis`` from vertex ``q``: vertices on the ray and crossing edges."""
    line, pos = (q[1], q[0]) if axis == 0 else (q[0], q[1])
    hits = {v[axis] for v in m.vertices if v[1 - axis] == line}
    hits |= {x for x, ivs in m.edges[1 - axis].items() if _covers(ivs, line)}
    if sign > 0:
        return sorted(h for h in hits if h > pos)
    return sorted((h for h in hits if h < pos), reverse=True)


def _infer_keys(m: TMesh, q) -> tuple:
    out = []
    for axis in (0, 1):
        up = _ray(m, q, axis, 1)[:2]
        down = _ray(m, q, axis, -1)[:2]
        if len(up) < 2 or len(down) < 2:
            raise MalformedMeshError(f"fewer than two lines around {q} in direction {axis}")
        out.append(tuple(down[::-1]) + (q[axis],) + tuple(up))
    return tuple(out)


def infer_knots(m: TMesh, a) -> tuple:
    """Knot values ``(s_knots, t_knots)`` of the blending function anchored at ``a``."""
    q = _as_point(m, a)
    if q not in m.anchors():
        raise InvalidInputError(f"{a} is not an anchor of the mesh")
    s, t = _infer_keys(m, q)
    return tuple(k[0] for k in s), tuple(k[0] for k in t)


def _insert_axis(m: TMesh, q) -> int:
    on_h, on_v = m._on_edge(q, 0), m._on_edge(q, 1)
    if not (on_h or on_v):
        raise InvalidInputError(f"{q} does not lie on an edge of the mesh")
    if on_h and on_v:
        raise InvalidInputError(f"{q} is already a junction of the mesh")
    return 0 if on_h else 1


def _refined_by(m: TMesh, q, axis: int) -> list:
    """Functions anchored on the line of ``q`` whose span in ``axis`` strictly contains it."""
    out = []
    for key in m.functions:
        kn = key[axis]
        if key[1 - axis][2] == q[1 - axis] and kn[0] < q[axis] < kn[-1] and q[axis] not in kn:
            out.append(key)
    return sorted(out)


def standard_rule_check(m: TMesh, insertion) -> bool:
    """May ``insertion`` be added as a standard T-spline refinement?

    The functions it refines must have identical knots in the transverse
    direction, and along the line they must be the four consecutive windows of
    one knot sequence that contain the new value (a local tensor product).
    """
    q = _as_point(m, insertion)
    if q in m.vertices:
        raise InvalidInputError(f"{insertion} is already a vertex")
    axis = _insert_axis(m, q)
    keys = _refined_by(m, q, axis)
    if not keys:
        return False
    if len({k[1 - axis] for k in keys}) != 1:
        return False
    seq = sorted({x for k in keys for x in k[axis]})
    windows = [tuple(seq[i : i + 5]) for i in range(len(seq) - 4)]
    holding = {w for w in windows if w[0] < q[axis] < w[-1]}
    return len(holding) == DEGREE + 1 and holding == {k[axis] for k in keys}


def _split(key: tuple, axis: int, x) -> list:
    kn = key[axis]
    w1, w2 = split_weights([Fraction(k[0]) for k in kn], Fraction(x[0]))
    new = sorted(kn + (x,))
    out = []
    for w, part in ((w1, tuple(new[:-1])), (w2, tuple(new[1:]))):
        if w:
            child = (part, key[1]) if axis == 0 else (key[0], part)
            out.append((child, Fraction(w)))
    return out


def _apply_split(funcs: dict, key, axis: int, x) -> None:
    gamma, coef = funcs.pop(key)
    for child, w in _split(key, axis, x):
        g = gamma * w
        if child in funcs:
            g0, c0 = funcs[child]
            gn = g0 + g
            funcs[child] = (gn, (float(g0) * c0 + float(g) * coef) / float(gn))
        else:
            funcs[child] = (g, coef)


def semi_standard_insert(m: TMesh, q, max_iterations: int | None = None):
    """Insert the control point ``q`` and restore traversal consistency.

    Returns the new mesh and its blending functions. Functions missing a knot
    dictated by traversal are refined by knot insertion; a function holding a
    knot that traversal does not dictate causes a new vertex at that knot on
    the anchor's line. The two repairs alternate until nothing changes.
    """
    q = _as_point(m, q)
    if q in m.vertices:
        raise InvalidInputError(f"{q} is already a vertex")
    axis = _insert_axis(m, q)
    (s0, s1), (t0, t1) = m.anchor_box
    if not (s0 < q[0] < s1 and t0 < q[1] < t1):
        raise InvalidInputError(f"{q} is outside the anchor region")
    out = m.copy()
    cap = max_iterations if max_iterations is not None else 10 * len(m.anchors())
    for key in _refined_by(out, q, axis):
        _apply_split(out.functions, key, axis, q[axis])
    out._add_vertex(q)
    _resolve(out, cap)
    return out, out.blending_functions()


def _resolve(m: TMesh, cap: int) -> None:
    funcs = m.functions
    for _ in range(cap):
        cache = {}

        def trav(a):
            if a not in cache:
                cache[a] = _infer_keys(m, a)
            return cache[a]

        # knots dictated by traversal but missing: knot insertion
        changed = True
        while changed:
            changed = False
            for key in sorted(funcs):
                a = (key[0][2], key[1][2])
                if a not in m.vertices:
                    continue
                t = trav(a)
                for ax in (0, 1):
                    miss = [x for x in t[ax] if x not in key[ax] and key[ax][0] < x < key[ax][-1]]
                    if miss:
                        _apply_split(funcs, key, ax, miss[0])
                        changed = True
                        break
                if changed:
                    break
        # knots not dictated by traversal: add a vertex
        added = None
        for key in sorted(funcs):
            a = (key[0][2], key[1][2])
            if a not in m.vertices:
                added = a
                break
            t = trav(a)
            for ax in (0, 1):
                extra = [x for x in key[ax] if x not in t[ax]]
                if extra:
                    added = (extra[0], a[1]) if ax == 0 else (a[0], extra[0])
                    break
            if added is not None:
                break
        if added is None:
            missing = [a for a in m.anchors() if not any((k[0][2], k[1][2]) == a for k in funcs)]
            if missing:
                raise InconsistencyError(f"anchors without a blending function: {missing}")
            return
        if added in m.vertices:
            raise InconsistencyError(f"cannot repair the function anchored near {added}")
        m._add_vertex(added)
    raise FixpointError(f"refinement did not settle within {cap} iterations")


def classify(m: TMesh) -> TSplineClass:
    """Standard, semi-standard or non-standard, from traversal consistency and scaling."""
    from .diagnostics import partition_of_unity

    anchors = m.anchors()
    by_anchor = {}
    for key in m.functions:
        by_anchor.setdefault((key[0][2], key[1][2]), []).append(key)
    consistent = sorted(by_anchor) == anchors and all(
        len(by_anchor[a]) == 1 and by_anchor[a][0] == _infer_keys(m, a) for a in anchors
    )
    pou = partition_of_unity(_collection(m, SplineType.SEMI_STANDARD_TSPLINE)).exact
    if consistent and pou:
        if all(g == 1 for g, _ in m.functions.values()):
            return TSplineClass.STANDARD
        return TSplineClass.SEMI_STANDARD
    return TSplineClass.NON_STANDARD


def _collection(m: TMesh, spline_type) -> SplineCollection:
    splines = [ScaledBSpline(f.bspline(), f.gamma, f.coefficient) for f in m.blending_functions()]
    return SplineCollection(splines, spline_type, Independence.NOT_TESTED, domain=m.domain)


def tmesh_to_collection(m: TMesh) -> SplineCollection:
    """One scaled B-spline per anchor.

    The type tag is ``StandardTSpline`` for unscaled partitions of unity and
    ``SemiStandardTSpline`` otherwise; use :func:`classify` to detect
    non-standard meshes.
    """
    cls = classify(m)
    kind = SplineType.STANDARD_TSPLINE if cls == TSplineClass.STANDARD else SplineType.SEMI_STANDARD_TSPLINE
    return _collection(m, kind)

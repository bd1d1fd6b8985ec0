"""Spline geometry: evaluation, iso-curves, minimal-basis conversion, triangles and slices."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .collection import Independence, ScaledBSpline, SplineCollection
from .errors import InvalidInputError, OutOfDomainError
from .lrmesh import elements, from_bsplines
from .splinecore import KnotVector, LocalKnots, TensorBSpline, eval_bspline, refinement_rows

__all__ = [
    "SplineGeometry",
    "TriangleSoup",
    "Polyline",
    "SliceResult",
    "eval_geometry",
    "extract_isocurve",
    "to_minimal_basis",
    "tessellate",
    "slice_soup",
    "box_soup",
]


class SplineGeometry:
    """A collection whose members carry control points in R^3 (and optional weights)."""

    def __init__(self, collection: SplineCollection, control_points=None, weights=None):
        if control_points is not None:
            collection = collection.with_coefficients(np.asarray(control_points, dtype=float))
        if weights is not None:
            weights = [float(w) for w in weights]
            if len(weights) != len(collection):
                raise InvalidInputError("one weight per member is required")
            collection = collection.replace(
                splines=[replace(s, weight=w) for s, w in zip(collection.splines, weights)]
            )
        if collection.dimension not in (1, 2, 3):
            raise InvalidInputError("parametric dimension must be 1, 2 or 3")
        self.collection = collection

    @property
    def dimension(self) -> int:
        return self.collection.dimension

    @property
    def domain(self) -> tuple:
        return self.collection.domain

    def __call__(self, u):
        return eval_geometry(self, u)


def _check_domain(domain, pts: np.ndarray) -> None:
    for k, (a, b) in enumerate(domain):
        if np.any(pts[:, k] < a) or np.any(pts[:, k] > b):
            raise OutOfDomainError(f"parameter outside [{a}, {b}] in direction {k}")


def eval_geometry(g, u) -> np.ndarray:
    """``sum gamma w c B / sum gamma w B`` at one point (1-D result) or many (2-D).

    Without weights the plain sum ``sum gamma c B`` is returned, so bases
    lacking partition of unity (untruncated HB) still evaluate polynomially.
    """
    c = g.collection if isinstance(g, SplineGeometry) else g
    pts = np.asarray(u, dtype=float)
    single = pts.ndim == 1 and c.dimension > 1 or pts.ndim == 0
    pts = np.atleast_2d(pts.reshape(-1, c.dimension))
    _check_domain(c.domain, pts)
    B = c.basis_values(pts) * (c.gammas() * c.weights())
    out = B @ c.coefficients()
    if c.rational:
        out = out / B.sum(axis=1)[:, None]
    return out[0] if single else out


def extract_isocurve(g, direction: int, value: float) -> SplineCollection:
    """Members restricted to the constant-parameter line (or plane) ``u_direction = value``.

    Each member keeps its other knots; the transverse factor evaluated at
    ``value`` is folded into its scaling. The result is usually redundant and
    is tagged ``NotTested``.
    """
    c = g.collection if isinstance(g, SplineGeometry) else g
    d = c.dimension
    if d < 2:
        raise InvalidInputError("iso-curves need a surface or a volume")
    if not 0 <= direction < d:
        raise InvalidInputError(f"direction {direction} out of range")
    lo, hi = c.domain[direction]
    if not lo <= value <= hi:
        raise OutOfDomainError(f"{value} outside [{lo}, {hi}]")
    at_end = value == hi
    splines = []
    for s in c.splines:
        f = eval_bspline(s.bspline.knots[direction], value, from_left=at_end)
        if f <= 0:
            continue
        knots = [lk for k, lk in enumerate(s.bspline.knots) if k != direction]
        gamma = s.gamma * Fraction(f) if isinstance(s.gamma, Fraction) else s.gamma * f
        splines.append(ScaledBSpline(TensorBSpline(knots), gamma, s.coefficient, s.weight))
    domain = tuple(iv for k, iv in enumerate(c.domain) if k != direction)
    return SplineCollection(splines, c.spline_type, Independence.NOT_TESTED, domain=domain)


def to_minimal_basis(curve: SplineCollection):
    """Exact conversion of a curve collection to one B-spline curve.

    Returns ``(knot_vector, coefficients, weights)`` on the union knot vector
    (largest multiplicity of every value); ``weights`` is ``None`` for
    polynomial curves.
    """
    if curve.dimension != 1:
        raise InvalidInputError("to_minimal_basis expects a curve collection")
    degrees = {s.bspline.knots[0].degree for s in curve.splines}
    if len(degrees) != 1:
        raise InvalidInputError("members have inconsistent degrees")
    p = degrees.pop()
    mult = Counter()
    for s in curve.splines:
        for v, m in Counter(s.bspline.knots[0].values).items():
            mult[v] = max(mult[v], m)
    union = [v for v in sorted(mult) for _ in range(mult[v])]
    kv = KnotVector(union, p)
    windows = {tuple(union[i : i + p + 2]): i for i in range(kv.dimension)}
    rational = curve.rational
    g = curve.coefficients().shape[1]
    num = np.zeros((kv.dimension, g))
    den = np.zeros(kv.dimension)
    for s in curve.splines:
        t = list(s.bspline.knots[0].values)
        inner = Counter(v for v in union if t[0] < v < t[-1])
        extra = list((inner - Counter(t)).elements())
        fine = sorted(t + extra)
        row = refinement_rows([Fraction(x) for x in t], [Fraction(x) for x in fine], p)[0]
        w = 1.0 if s.weight is None else s.weight
        for j, r in row.items():
            i = windows[tuple(fine[j : j + p + 2])]
            f = float(Fraction(s.gamma) * r) * w
            num[i] += f * s.coefficient
            den[i] += f
    if rational:
        ok = den > 0
        coefs = np.zeros_like(num)
        coefs[ok] = num[ok] / den[ok, None]
        return kv, coefs, den
    return kv, num, None


@dataclass(frozen=True, eq=False)
class TriangleSoup:
    """Triangles ``(n, 3, 3)`` with one normal ``(n, 3)`` each; zero normals allowed."""

    vertices: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3, 3)
        n = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(v) != len(n):
            raise InvalidInputError("one normal per triangle is required")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normals", n)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return (
            isinstance(other, TriangleSoup)
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.normals, other.normals)
        )

    @classmethod
    def from_triangles(cls, vertices) -> "TriangleSoup":
        v = np.asarray(vertices, dtype=float).reshape(-1, 3, 3)
        return cls(v, facet_normals(v))

    def without(self, index: int) -> "TriangleSoup":
        keep = np.arange(len(self)) != index
        return TriangleSoup(self.vertices[keep], self.normals[keep])


def facet_normals(v: np.ndarray, eps: float = 1e-14) -> np.ndarray:
    """Right-hand-rule unit normals; ``(0, 0, 0)`` for degenerate triangles."""
    v = np.asarray(v, dtype=float).reshape(-1, 3, 3)
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    length = np.linalg.norm(n, axis=1)
    scale = np.maximum(np.abs(v).reshape(len(v), -1).max(axis=1, initial=0.0), 1.0) if len(v) else length
    bad = length <= eps * scale**2
    out = np.zeros_like(n)
    out[~bad] = n[~bad] / length[~bad, None]
    return out


def _point_triangle_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    # closest point on triangle (region tests on barycentric coordinates)
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(ap))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(bp))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + v * ab)))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(cp))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + w * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + w * (c - b))))
    denom = va + vb + vc
    if denom == 0:
        # degenerate triangle: distance to its longest edge
        return min(_segment_distance(p, x, y) for x, y in ((a, b), (b, c), (a, c)))
    v, w = vb / denom, vc / denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


def _segment_distance(p, a, b) -> float:
    ab = b - a
    L = ab @ ab
    t = 0.0 if L == 0 else min(max((p - a) @ ab / L, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def _grid_triangles(u: np.ndarray, v: np.ndarray) -> list:
    tris = []
    for i, j in itertools.product(range(len(u) - 1), range(len(v) - 1)):
        p00, p10, p11, p01 = (u[i], v[j]), (u[i + 1], v[j]), (u[i + 1], v[j + 1]), (u[i], v[j + 1])
        tris.append((p00, p10, p11))
        tris.append((p00, p11, p01))
    return tris


def chordal_deviation(g, param_tri) -> float:
    """Largest distance of the surface at edge midpoints and centroid from the flat triangle."""
    pt = np.asarray(param_tri, dtype=float)
    probes = np.array([(pt[0] + pt[1]) / 2, (pt[1] + pt[2]) / 2, (pt[0] + pt[2]) / 2, pt.mean(axis=0)])
    xyz = eval_geometry(g, np.vstack([pt, probes]))
    a, b, c = xyz[:3]
    return max(_point_triangle_distance(x, a, b, c) for x in xyz[3:])


def _merge_close(values, tol: float) -> np.ndarray:
    vals = np.unique(np.asarray(values, dtype=float))
    keep = np.concatenate([[True], np.diff(vals) > tol])
    return vals[keep]


def tessellate(g, tolerance: float, max_level: int = 8) -> TriangleSoup:
    """Triangulate a surface within a chordal tolerance.

    Each polynomial element picks the smallest ``k`` for which a uniform
    ``2**k`` by ``2**k`` split passes the chordal test at triangle edge
    midpoints and centroids. The split lines of all elements are merged into
    one rectilinear parameter grid, so neighbouring elements share their
    vertices and the soup has no cracks.
    """
    c = g.collection if isinstance(g, SplineGeometry) else g
    if c.dimension != 2:
        raise InvalidInputError("tessellation needs a surface (parametric dimension 2)")
    if not tolerance > 0:
        raise InvalidInputError("tolerance must be positive")
    if c.coefficients().shape[1] != 3:
        raise InvalidInputError("tessellation needs control points in R^3")
    bp = c.mesh if c.mesh is not None else from_bsplines([s.bspline for s in c.splines], c.domain, c.degrees)
    us, vs = [], []
    for (u0, u1), (v0, v1) in elements(bp):
        for k in range(max_level + 1):
            n = 2**k
            u, v = np.linspace(u0, u1, n + 1), np.linspace(v0, v1, n + 1)
            if k == max_level or all(chordal_deviation(c, t) <= tolerance for t in _grid_triangles(u, v)):
                break
        us.append(u)
        vs.append(v)
    (a, b), (e, f) = c.domain
    u = _merge_close(np.concatenate(us), 1e-12 * max(1.0, b - a))
    v = _merge_close(np.concatenate(vs), 1e-12 * max(1.0, f - e))
    params = np.array(_grid_triangles(u, v))
    verts = eval_geometry(c, params.reshape(-1, 2)).reshape(-1, 3, 3)
    return TriangleSoup(verts, facet_normals(verts))


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        p = self.points
        if self.closed:
            p = np.vstack([p, p[:1]])
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


class SliceResult:
    """Polylines of one section; ``height`` is the plane actually used."""

    def __init__(self, polylines, height: float, requested: float):
        self.polylines = list(polylines)
        self.height = height
        self.requested = requested

    @property
    def perturbed(self) -> bool:
        return self.height != self.requested

    def __iter__(self):
        return iter(self.polylines)

    def __len__(self):
        return len(self.polylines)

    def __getitem__(self, i):
        return self.polylines[i]


def slice_soup(soup: TriangleSoup, h: float, tol: float = 1e-9) -> SliceResult:
    """Intersect a triangle soup with the plane ``z = h`` and chain the segments.

    If ``h`` equals a vertex height it is moved up by one unit in the last
    place until it does not. Segments are oriented by the facet normal, so
    loops of an outward-oriented solid run counter-clockwise seen from +z.
    """
    requested = float(h)
    z = soup.vertices[:, :, 2] if len(soup) else np.zeros((0, 3))
    zs = set(z.ravel().tolist())
    while h in zs:
        h = float(np.nextafter(h, np.inf))
    segs = []
    for tri, tz in zip(soup.vertices, z):
        above = tz > h
        if above.all() or (~above).all():
            continue
        pts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            if above[i] != above[j]:
                t = (h - tz[i]) / (tz[j] - tz[i])
                pts.append(tri[i] + t * (tri[j] - tri[i]))
        a, b = pts
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        if np.dot(b - a, np.cross((0.0, 0.0, 1.0), n)) < 0:
            a, b = b, a
        segs.append((a, b))
    return SliceResult(_chain(segs, tol), h, requested)


def _chain(segs: list, tol: float) -> list:
    if not segs:
        return []
    pts = np.array([p for s in segs for p in s])
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(pts).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    node = [find(i) for i in range(len(pts))]
    out_edges = {}
    indeg = Counter()
    for k in range(len(segs)):
        a, b = node[2 * k], node[2 * k + 1]
        if a == b:
            continue
        out_edges.setdefault(a, []).append((b, k))
        indeg[b] += 1
    used = set()
    lines = []

    def walk(start):
        path = [start]
        cur = start
        while True:
            nxt = next(((b, k) for b, k in out_edges.get(cur, []) if k not in used), None)
            if nxt is None:
                return path, False
            used.add(nxt[1])
            cur = nxt[0]
            if cur == start:
                return path, True
            path.append(cur)

    starts = sorted(n for n in out_edges if indeg[n] < len(out_edges[n]))
    for s in starts:
        while any(k not in used for _, k in out_edges[s]):
            path, closed = walk(s)
            lines.append((path, closed))
    for s in sorted(out_edges):
        while any(k not in used for _, k in out_edges[s]):
            path, closed = walk(s)
            lines.append((path, closed))
    result = []
    for path, closed in lines:
        p = pts[path]
        if closed:
            first = min(range(len(p)), key=lambda i: tuple(p[i]))
            p = np.roll(p, -first, axis=0)
        result.append(Polyline(p, closed))
    result.sort(key=lambda pl: (not pl.closed, tuple(pl.points[0]), len(pl.points)))
    return result


def box_soup(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0), n: int = 1) -> TriangleSoup:
    """Outward-oriented watertight triangulation of an axis-aligned box, ``n`` x ``n`` per face."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    tris = []
    s = np.linspace(0.0, 1.0, n + 1)
    for axis in range(3):
        u, v = [k for k in range(3) if k != axis]
        for side, val in ((0, lo[axis]), (1, hi[axis])):
            for i, j in itertools.product(range(n), range(n)):
                quad = []
                for a, b in ((s[i], s[j]), (s[i + 1], s[j]), (s[i + 1], s[j + 1]), (s[i], s[j + 1])):
                    p = np.empty(3)
                    p[axis] = val
                    p[u] = lo[u] + a * (hi[u] - lo[u])
                    p[v] = lo[v] + b * (hi[v] - lo[v])
                    quad.append(p)
                t1, t2 = (quad[0], quad[1], quad[2]), (quad[0], quad[2], quad[3])
                for t in (t1, t2):
                    nrm = np.cross(t[1] - t[0], t[2] - t[0])
                    outward = nrm[axis] > 0 if side else nrm[axis] < 0
                    tris.append(t if outward else (t[0], t[2], t[1]))
    return TriangleSoup.from_triangles(np.array(tris))

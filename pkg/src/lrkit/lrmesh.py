"""Box-partitions carried by meshrectangles with multiplicities.

A meshrectangle fixes one coordinate (``direction``) at ``value`` and spans a
box in the remaining directions. Meshrectangles sharing direction and value
live on one *plane*; each plane is stored canonically as maximal
non-overlapping pieces of constant multiplicity, so two partitions built from
the same rectangles in any order compare equal.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidInputError
from .splinecore import KnotVector, TensorBSpline

__all__ = [
    "MeshRectangle",
    "BoxPartition",
    "from_tensor_space",
    "from_bsplines",
    "insert",
    "splits_support",
    "elements",
]


@dataclass(frozen=True)
class MeshRectangle:
    direction: int
    value: float
    extent: tuple  # one (lo, hi) interval per remaining direction, in axis order
    multiplicity: int = 1

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extent)
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "value", float(self.value))
        if any(not a < b for a, b in ext):
            raise InvalidInputError(f"degenerate meshrectangle extent {ext}")
        if self.multiplicity < 1:
            raise InvalidInputError("meshrectangle multiplicity must be >= 1")

    def full_box(self) -> tuple:
        """The rectangle as a (degenerate) box in R^d."""
        ext = list(self.extent)
        ext.insert(self.direction, (self.value, self.value))
        return tuple(ext)


def _cells(coords: Sequence[Sequence[float]]):
    """Grid cells (as tuples of intervals) over per-axis sorted coordinates."""
    axes = [list(zip(c[:-1], c[1:])) for c in coords]
    return itertools.product(*axes)


def _contains(box, pt) -> bool:
    return all(a <= x <= b for (a, b), x in zip(box, pt))


def _clip(box, window):
    out = []
    for (a, b), (c, d) in zip(box, window):
        lo, hi = max(a, c), min(b, d)
        if not lo < hi:
            return None
        out.append((lo, hi))
    return tuple(out)


def _canonical(pieces: list) -> tuple:
    """Canonical maximal pieces for a plane given (box, mult) pieces (may overlap).

    Overlaps take the maximum multiplicity.
    """
    if not pieces:
        return ()
    dim = len(pieces[0][0])
    if dim == 0:
        return (((), max(m for _, m in pieces)),)
    coords = [sorted({v for box, _ in pieces for v in box[k]}) for k in range(dim)]
    mult = {}
    for cell in _cells(coords):
        mid = tuple(0.5 * (a + b) for a, b in cell)
        m = max((mm for box, mm in pieces if _contains(box, mid)), default=0)
        if m:
            mult[cell] = m
    # merge along axis 0 within each strip of the remaining axes
    runs = []
    other_axes = [list(zip(c[:-1], c[1:])) for c in coords[1:]]
    axis0 = list(zip(coords[0][:-1], coords[0][1:]))
    strips = {}
    for rest in itertools.product(*other_axes):
        current = None
        segs = []
        for iv in axis0:
            m = mult.get((iv,) + rest, 0)
            if current and current[2] == m and current[1] == iv[0] and m:
                current = (current[0], iv[1], m)
            else:
                if current and current[2]:
                    segs.append(current)
                current = (iv[0], iv[1], m) if m else None
        if current and current[2]:
            segs.append(current)
        strips[rest] = segs
    if dim == 1:
        return tuple((((a, b),), m) for a, b, m in strips[()])
    # dim == 2: merge identical segments across consecutive strips of axis 1
    axis1 = list(zip(coords[1][:-1], coords[1][1:]))
    open_pieces = {}
    for iv in axis1:
        segs = set(strips[(iv,)])
        nxt = {}
        for seg in segs:
            if seg in open_pieces and open_pieces[seg][1] == iv[0]:
                nxt[seg] = (open_pieces[seg][0], iv[1])
            else:
                nxt[seg] = iv
        for seg, span in open_pieces.items():
            if seg not in nxt or nxt[seg][0] != span[0]:
                runs.append((((seg[0], seg[1]), span), seg[2]))
        open_pieces = nxt
    for seg, span in open_pieces.items():
        runs.append((((seg[0], seg[1]), span), seg[2]))
    return tuple(sorted(runs))


def _min_cover(pieces, window) -> int:
    """Minimum multiplicity of a plane over ``window`` (0 if not fully covered)."""
    if len(window) == 0:
        return max((m for _, m in pieces), default=0)
    clipped = []
    for box, m in pieces:
        c = _clip(box, window)
        if c is not None:
            clipped.append((c, m))
    if not clipped:
        return 0
    coords = [
        sorted({window[k][0], window[k][1]} | {v for box, _ in clipped for v in box[k]})
        for k in range(len(window))
    ]
    best = math.inf
    for cell in _cells(coords):
        mid = tuple(0.5 * (a + b) for a, b in cell)
        m = next((mm for box, mm in clipped if _contains(box, mid)), 0)
        if m == 0:
            return 0
        best = min(best, m)
    return int(best)


class BoxPartition:
    """Axis-aligned box subdivided by meshrectangles (immutable)."""

    def __init__(self, domain, degrees, planes=None):
        self.domain = tuple((float(a), float(b)) for a, b in domain)
        self.degrees = tuple(int(p) for p in degrees)
        d = len(self.domain)
        if not 1 <= d <= 3:
            raise InvalidInputError("box partitions support dimensions 1, 2 and 3")
        if len(self.degrees) != d:
            raise InvalidInputError("one degree per direction is required")
        if any(not a < b for a, b in self.domain):
            raise InvalidInputError("degenerate domain")
        self._planes = dict(planes or {})
        self._values = [
            sorted(v for (k, v) in self._planes if k == axis) for axis in range(d)
        ]

    @property
    def dimension(self) -> int:
        return len(self.domain)

    @property
    def meshrectangles(self) -> tuple:
        out = []
        for (k, v), pieces in sorted(self._planes.items()):
            for box, m in pieces:
                out.append(MeshRectangle(k, v, box, m))
        return tuple(out)

    def plane(self, direction: int, value: float) -> tuple:
        return self._planes.get((direction, float(value)), ())

    def plane_values(self, direction: int) -> list:
        return list(self._values[direction])

    def multiplicity_over(self, direction: int, value: float, window) -> int:
        """Minimum multiplicity of the plane ``(direction, value)`` over ``window``."""
        return _min_cover(self.plane(direction, value), tuple(window))

    def __eq__(self, other):
        return (
            isinstance(other, BoxPartition)
            and self.domain == other.domain
            and self.degrees == other.degrees
            and self._planes == other._planes
        )

    def __hash__(self):
        return hash((self.domain, self.degrees, tuple(sorted(self._planes.items()))))

    def __repr__(self):
        return f"BoxPartition(domain={self.domain}, meshrectangles={len(self.meshrectangles)})"

    def validate(self) -> None:
        """Check the clamped-boundary invariant; raise on violation."""
        for k in range(self.dimension):
            window = tuple(iv for j, iv in enumerate(self.domain) if j != k)
            for v in self.domain[k]:
                if self.multiplicity_over(k, v, window) < self.degrees[k] + 1:
                    raise InvalidInputError(
                        f"domain boundary {v} in direction {k} lacks multiplicity "
                        f"{self.degrees[k] + 1}"
                    )

    def with_rectangles(self, rects: Iterable[MeshRectangle]) -> "BoxPartition":
        planes = dict(self._planes)
        grouped = {}
        for r in rects:
            self._check(r)
            grouped.setdefault((r.direction, r.value), []).append((r.extent, r.multiplicity))
        for key, pieces in grouped.items():
            planes[key] = _canonical(list(planes.get(key, ())) + pieces)
        return BoxPartition(self.domain, self.degrees, planes)

    def _check(self, r: MeshRectangle):
        d = self.dimension
        if not 0 <= r.direction < d or len(r.extent) != d - 1:
            raise InvalidInputError("meshrectangle dimension does not match the partition")
        lo, hi = self.domain[r.direction]
        if not lo <= r.value <= hi:
            raise InvalidInputError(f"meshrectangle value {r.value} outside the domain")
        others = [iv for j, iv in enumerate(self.domain) if j != r.direction]
        for (a, b), (c, e) in zip(r.extent, others):
            if a < c or b > e:
                raise InvalidInputError("meshrectangle extends outside the domain")
        if r.multiplicity > self.degrees[r.direction] + 1:
            raise InvalidInputError(
                f"multiplicity {r.multiplicity} exceeds degree+1 = {self.degrees[r.direction] + 1}"
            )


def from_tensor_space(knot_vectors: Sequence[KnotVector], degrees=None) -> BoxPartition:
    """Partition with one full-extent meshrectangle per unique knot value per direction."""
    if degrees is None:
        kvs = list(knot_vectors)
    else:
        kvs = [kv if isinstance(kv, KnotVector) else KnotVector(kv, p) for kv, p in zip(knot_vectors, degrees)]
    degrees = tuple(kv.degree for kv in kvs)
    domain = tuple((kv.values[0], kv.values[-1]) for kv in kvs)
    bp = BoxPartition(domain, degrees)
    rects = []
    for k, kv in enumerate(kvs):
        ext = tuple(iv for j, iv in enumerate(domain) if j != k)
        for v in kv.unique():
            rects.append(MeshRectangle(k, v, ext, kv.multiplicity(v)))
    return bp.with_rectangles(rects)


def from_bsplines(bsplines: Iterable[TensorBSpline], domain=None, degrees=None) -> BoxPartition:
    """Partition made of every knot line of every B-spline, spanning its support."""
    bsplines = list(bsplines)
    if not bsplines:
        raise InvalidInputError("need at least one B-spline")
    d = bsplines[0].dimension
    if domain is None:
        domain = tuple(
            (min(b.knots[k].values[0] for b in bsplines), max(b.knots[k].values[-1] for b in bsplines))
            for k in range(d)
        )
    if degrees is None:
        degrees = bsplines[0].degrees
    bp = BoxPartition(domain, degrees)
    rects = []
    for b in bsplines:
        box = [(lk.values[0], lk.values[-1]) for lk in b.knots]
        for k, lk in enumerate(b.knots):
            ext = tuple(iv for j, iv in enumerate(box) if j != k)
            for v in sorted(set(lk.values)):
                rects.append(MeshRectangle(k, v, ext, lk.multiplicity(v)))
    return bp.with_rectangles(rects)


def insert(bp: BoxPartition, r: MeshRectangle) -> BoxPartition:
    """Insert ``r``, merging with collinear pieces (maximum multiplicity on overlap)."""
    return bp.with_rectangles([r])


def splits_support(r: MeshRectangle, b: TensorBSpline) -> bool:
    """Does ``r`` traverse the support of ``b`` with more multiplicity than ``b`` has there?"""
    if len(r.extent) != b.dimension - 1:
        raise InvalidInputError("dimension mismatch between meshrectangle and B-spline")
    lk = b.knots[r.direction]
    lo, hi = lk.values[0], lk.values[-1]
    if not lo < r.value < hi:
        return False
    box = [(k.values[0], k.values[-1]) for j, k in enumerate(b.knots) if j != r.direction]
    if any(a > c or e < f for (a, e), (c, f) in zip(r.extent, box)):
        return False
    return lk.multiplicity(r.value) < r.multiplicity


def bspline_is_split(bp: BoxPartition, b: TensorBSpline):
    """First ``(direction, value, multiplicity)`` of the mesh splitting ``b``, else None."""
    box = [(k.values[0], k.values[-1]) for k in b.knots]
    for k, lk in enumerate(b.knots):
        lo, hi = box[k]
        window = tuple(iv for j, iv in enumerate(box) if j != k)
        vals = bp._values[k]
        i = bisect.bisect_right(vals, lo)
        while i < len(vals) and vals[i] < hi:
            v = vals[i]
            m = _min_cover(bp._planes[(k, v)], window)
            if m > lk.multiplicity(v):
                return k, v, m
            i += 1
    return None


def elements(bp: BoxPartition) -> list:
    """Boxes of the partition, sorted; they tile the domain with disjoint interiors."""
    d = bp.dimension
    coords = []
    for k in range(d):
        vals = set(bp._values[k]) | set(bp.domain[k])
        coords.append(sorted(v for v in vals if bp.domain[k][0] <= v <= bp.domain[k][1]))
    shape = [len(c) - 1 for c in coords]
    index = {idx: n for n, idx in enumerate(itertools.product(*[range(s) for s in shape]))}
    parent = list(range(len(index)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for idx, n in index.items():
        for k in range(d):
            if idx[k] + 1 >= shape[k]:
                continue
            nb = list(idx)
            nb[k] += 1
            face = tuple(
                (coords[j][idx[j]], coords[j][idx[j] + 1]) for j in range(d) if j != k
            )
            if _min_cover(bp.plane(k, coords[k][idx[k] + 1]), face) == 0:
                ra, rb = find(n), find(index[tuple(nb)])
                if ra != rb:
                    parent[ra] = rb
    groups = {}
    for idx, n in index.items():
        groups.setdefault(find(n), []).append(idx)
    out = []
    for cells in groups.values():
        lo = [min(c[k] for c in cells) for k in range(d)]
        hi = [max(c[k] for c in cells) + 1 for k in range(d)]
        if math.prod(h - l for l, h in zip(lo, hi)) == len(cells):
            out.append(tuple((coords[k][lo[k]], coords[k][hi[k]]) for k in range(d)))
        else:
            # region is not a box (dangling segment): fall back to its grid cells
            for c in cells:
                out.append(tuple((coords[k][c[k]], coords[k][c[k] + 1]) for k in range(d)))
    return sorted(out)

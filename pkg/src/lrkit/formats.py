"""Serialization: the ``.lrsp`` text format for spline collections, and STL.

``.lrsp`` layout (one item per line, ``#`` starts a comment)::

    LRSP 1
    type LRBSpline
    independence Independent
    pdim 2
    gdim 3
    rational 0
    degrees 3 3
    domain 0x0p+0 0x1.8p+1 0x0p+0 0x1.8p+1
    records 49
    bspline
    knots 0x0p+0:4 0x1p+0:1
    knots 0x0p+0:3 0x1p+0:1 0x1p+1:1
    gamma 1/1
    coef 0x0p+0 0x0p+0 0x0p+0
    end
    ...
    meshrectangles 8
    rect 0 0x0p+0 4 0x0p+0 0x1.8p+1
    ...

``weight`` and ``group`` lines are optional inside a record; the mesh section
is optional. Floats are hex by default (``float.hex``); the decimal mode
writes ``repr`` values, which also round-trip exactly. Scaling factors are
exact fractions ``n/d`` or floats.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .collection import Independence, ScaledBSpline, SplineCollection, SplineType
from .errors import InvalidInputError, LRKitError, ParseError, ValidationError
from .geometry import TriangleSoup, facet_normals
from .lrmesh import BoxPartition, MeshRectangle
from .splinecore import LocalKnots, TensorBSpline

__all__ = [
    "LocalBSplineRecord",
    "LRSplineDocument",
    "read_lr",
    "write_lr",
    "document_from_collection",
    "document_to_collection",
    "load_collection",
    "read_stl",
    "write_stl",
]

MAGIC = "LRSP 1"
MAX_DEGREE = 64


@dataclass(frozen=True)
class LocalBSplineRecord:
    """Run-length encoded knots: ``knots[k] = ((value, multiplicity), ...)``."""

    knots: tuple
    gamma: object
    coefficient: tuple
    weight: float | None = None
    group: int | None = None

    @staticmethod
    def encode(values) -> tuple:
        out = []
        for v in values:
            if out and out[-1][0] == v:
                out[-1] = (v, out[-1][1] + 1)
            else:
                out.append((v, 1))
        return tuple(out)

    def local_knots(self) -> list:
        return [tuple(v for v, m in runs for _ in range(m)) for runs in self.knots]


@dataclass(frozen=True)
class LRSplineDocument:
    spline_type: SplineType
    independence: Independence
    pdim: int
    gdim: int
    rational: bool
    degrees: tuple
    domain: tuple
    records: tuple
    meshrectangles: tuple | None = field(default=None)


def document_from_collection(c: SplineCollection) -> LRSplineDocument:
    records = []
    for s in c.splines:
        runs = tuple(LocalBSplineRecord.encode(lk.values) for lk in s.bspline.knots)
        gamma = s.gamma if isinstance(s.gamma, Fraction) else float(s.gamma)
        records.append(
            LocalBSplineRecord(runs, gamma, tuple(float(x) for x in s.coefficient), s.weight, s.group)
        )
    rects = None
    if c.mesh is not None:
        rects = tuple(
            (r.direction, float(r.value), r.multiplicity, tuple(r.extent)) for r in c.mesh.meshrectangles
        )
    return LRSplineDocument(
        SplineType(c.spline_type),
        Independence(c.independence),
        c.dimension,
        len(records[0].coefficient),
        c.rational,
        c.degrees,
        c.domain,
        tuple(records),
        rects,
    )


def document_to_collection(doc: LRSplineDocument) -> SplineCollection:
    splines = []
    for r in doc.records:
        b = TensorBSpline([LocalKnots(k, p) for k, p in zip(r.local_knots(), doc.degrees)])
        splines.append(ScaledBSpline(b, r.gamma, np.array(r.coefficient), r.weight, r.group))
    mesh = None
    if doc.meshrectangles is not None:
        mesh = BoxPartition(doc.domain, doc.degrees).with_rectangles(
            MeshRectangle(k, v, ext, m) for k, v, m, ext in doc.meshrectangles
        )
    return SplineCollection(splines, doc.spline_type, doc.independence, mesh=mesh, domain=doc.domain)


def _fmt(x: float, decimal: bool) -> str:
    x = float(x)
    return repr(x) if decimal else x.hex()


def _fmt_gamma(g, decimal: bool) -> str:
    if isinstance(g, Fraction):
        return f"{g.numerator}/{g.denominator}"
    return _fmt(g, decimal)


def write_lr(obj, decimal: bool = False) -> str:
    """Serialize a collection or document to ``.lrsp`` text."""
    doc = obj if isinstance(obj, LRSplineDocument) else document_from_collection(obj)
    f = lambda x: _fmt(x, decimal)  # noqa: E731
    lines = [
        MAGIC,
        f"type {doc.spline_type.value}",
        f"independence {doc.independence.value}",
        f"pdim {doc.pdim}",
        f"gdim {doc.gdim}",
        f"rational {int(doc.rational)}",
        "degrees " + " ".join(str(p) for p in doc.degrees),
        "domain " + " ".join(f(x) for iv in doc.domain for x in iv),
        f"records {len(doc.records)}",
    ]
    for r in doc.records:
        lines.append("bspline")
        for runs in r.knots:
            lines.append("knots " + " ".join(f"{f(v)}:{m}" for v, m in runs))
        lines.append(f"gamma {_fmt_gamma(r.gamma, decimal)}")
        lines.append("coef " + " ".join(f(x) for x in r.coefficient))
        if r.weight is not None:
            lines.append(f"weight {f(r.weight)}")
        if r.group is not None:
            lines.append(f"group {r.group}")
        lines.append("end")
    if doc.meshrectangles is not None:
        lines.append(f"meshrectangles {len(doc.meshrectangles)}")
        for k, v, m, ext in doc.meshrectangles:
            lines.append(f"rect {k} {f(v)} {m} " + " ".join(f(x) for iv in ext for x in iv))
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, text: str):
        self.items = []
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                self.items.append((n, line.split()))
        self.pos = 0

    def next(self, keyword: str | None = None):
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise ParseError(f"unexpected end of input, expected {keyword or 'more data'}", last + 1)
        n, toks = self.items[self.pos]
        self.pos += 1
        if keyword is not None and toks[0] != keyword:
            raise ParseError(f"expected '{keyword}', found '{toks[0]}'", n)
        return n, toks

    def peek(self):
        return self.items[self.pos][1][0] if self.pos < len(self.items) else None


def _float(tok: str, n: int) -> float:
    try:
        if "0x" in tok.lower():
            return float.fromhex(tok)
        return float(tok)
    except (ValueError, OverflowError):
        raise ParseError(f"bad number '{tok}'", n) from None


def _int(tok: str, n: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"bad integer '{tok}'", n) from None


def _gamma(tok: str, n: int):
    if "/" in tok:
        a, _, b = tok.partition("/")
        num, den = _int(a, n), _int(b, n)
        if den == 0:
            raise ParseError("zero denominator", n)
        return Fraction(num, den)
    return _float(tok, n)


def _single(toks, n, count=1):
    if len(toks) != count + 1:
        raise ParseError(f"'{toks[0]}' takes {count} value(s)", n)
    return toks[1:]


def read_lr(data) -> LRSplineDocument:
    """Parse and validate ``.lrsp`` text (``str`` or ``bytes``)."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = bytes(data).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not UTF-8 text: {e}") from None
    L = _Lines(data)
    n, toks = L.next()
    if " ".join(toks) != MAGIC:
        raise ParseError(f"missing '{MAGIC}' header", n)
    n, toks = L.next("type")
    try:
        stype = SplineType(_single(toks, n)[0])
    except ValueError:
        raise ParseError(f"unknown spline type '{toks[1]}'", n) from None
    n, toks = L.next("independence")
    try:
        indep = Independence(_single(toks, n)[0])
    except ValueError:
        raise ParseError(f"unknown independence status '{toks[1]}'", n) from None
    n, toks = L.next("pdim")
    pdim = _int(_single(toks, n)[0], n)
    n, toks = L.next("gdim")
    gdim = _int(_single(toks, n)[0], n)
    n, toks = L.next("rational")
    rat = _single(toks, n)[0]
    if rat not in ("0", "1"):
        raise ParseError("rational flag must be 0 or 1", n)
    rational = rat == "1"
    if not 1 <= pdim <= 3 or gdim < 1:
        raise ValidationError("pdim must be 1..3 and gdim at least 1")
    n, toks = L.next("degrees")
    degrees = tuple(_int(t, n) for t in _single(toks, n, pdim))
    if any(not 0 <= p <= MAX_DEGREE for p in degrees):
        raise ValidationError(f"degrees must lie in 0..{MAX_DEGREE}")
    n, toks = L.next("domain")
    vals = [_float(t, n) for t in _single(toks, n, 2 * pdim)]
    domain = tuple((vals[2 * k], vals[2 * k + 1]) for k in range(pdim))
    if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in domain):
        raise ValidationError("domain must be finite and nondegenerate")
    n, toks = L.next("records")
    count = _int(_single(toks, n)[0], n)
    if count < 1:
        raise ValidationError("a document needs at least one record")
    records = []
    for i in range(count):
        records.append(_read_record(L, i, pdim, gdim, degrees, rational))
    rects = None
    if L.peek() == "meshrectangles":
        n, toks = L.next("meshrectangles")
        m = _int(_single(toks, n)[0], n)
        rects = []
        for _ in range(m):
            n, toks = L.next("rect")
            vals = _single(toks, n, 3 + 2 * (pdim - 1))
            k, v, mult = _int(vals[0], n), _float(vals[1], n), _int(vals[2], n)
            ext = [_float(t, n) for t in vals[3:]]
            rects.append((k, v, mult, tuple((ext[2 * j], ext[2 * j + 1]) for j in range(pdim - 1))))
        rects = tuple(rects)
    if L.peek() is not None:
        n, toks = L.next()
        raise ParseError(f"unexpected '{toks[0]}' after the last section", n)
    doc = LRSplineDocument(stype, indep, pdim, gdim, rational, degrees, domain, tuple(records), rects)
    if rects is not None:
        try:
            document_to_collection(doc)
        except LRKitError as e:
            raise ValidationError(f"invalid mesh section: {e}") from None
    return doc


def _read_record(L: _Lines, i: int, pdim, gdim, degrees, rational) -> LocalBSplineRecord:
    L.next("bspline")
    knots = []
    for k in range(pdim):
        n, toks = L.next("knots")
        runs = []
        for t in toks[1:]:
            v, sep, m = t.rpartition(":")
            if not sep:
                raise ParseError(f"knot entry '{t}' lacks ':multiplicity'", n)
            runs.append((_float(v, n), _int(m, n)))
        vals = [v for v, _ in runs]
        if not all(math.isfinite(v) for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("knot values must be finite and strictly increasing", record=i)
        if any(m < 1 for _, m in runs):
            raise ValidationError("multiplicities must be at least 1", record=i)
        if sum(m for _, m in runs) != degrees[k] + 2:
            raise ValidationError(
                f"multiplicities sum to {sum(m for _, m in runs)}, expected {degrees[k] + 2}", record=i
            )
        knots.append(tuple(runs))
    n, toks = L.next("gamma")
    gamma = _gamma(_single(toks, n)[0], n)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValidationError("gamma must be positive", record=i)
    n, toks = L.next("coef")
    coef = tuple(_float(t, n) for t in _single(toks, n, gdim))
    weight = group = None
    if L.peek() == "weight":
        n, toks = L.next("weight")
        weight = _float(_single(toks, n)[0], n)
        if not (weight > 0 and math.isfinite(weight)):
            raise ValidationError("weights must be positive", record=i)
    if L.peek() == "group":
        n, toks = L.next("group")
        group = _int(_single(toks, n)[0], n)
    L.next("end")
    if rational != (weight is not None):
        raise ValidationError("rational flag requires a weight on every record", record=i)
    return LocalBSplineRecord(tuple(knots), gamma, coef, weight, group)


def load_collection(data) -> SplineCollection:
    return document_to_collection(read_lr(data))


# STL ------------------------------------------------------------------------

_RECORD = struct.Struct("<12fH")


def write_stl(soup: TriangleSoup, mode: str = "binary", name: str = "lrkit") -> bytes:
    """Binary (80-byte header, uint32 count, 50-byte records) or ASCII STL."""
    if mode == "binary":
        header = name.encode("ascii", "replace")[:80].ljust(80, b" ")
        parts = [header, struct.pack("<I", len(soup))]
        for tri, nrm in zip(soup.vertices, soup.normals):
            parts.append(_RECORD.pack(*nrm, *tri.ravel(), 0))
        return b"".join(parts)
    if mode == "ascii":
        f = lambda x: f"{float(np.float32(x)):.9g}"  # noqa: E731
        lines = [f"solid {name}"]
        for tri, nrm in zip(soup.vertices, soup.normals):
            lines.append("  facet normal " + " ".join(f(x) for x in nrm))
            lines.append("    outer loop")
            for v in tri:
                lines.append("      vertex " + " ".join(f(x) for x in v))
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append(f"endsolid {name}")
        return ("\n".join(lines) + "\n").encode("ascii")
    raise InvalidInputError(f"unknown STL mode '{mode}'")


def stl_mode(data: bytes) -> str:
    """``'binary'`` or ``'ascii'`` by size check and leading bytes."""
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * count == len(data):
            return "binary"
    if data.lstrip()[:5].lower() == b"solid":
        return "ascii"
    return "binary"


def read_stl(data: bytes, infer_normals: bool = False) -> TriangleSoup:
    """Parse STL bytes (format auto-detected).

    With ``infer_normals`` zero normals are replaced by the right-hand-rule
    normal of the vertex order.
    """
    data = bytes(data)
    if stl_mode(data) == "ascii":
        soup = _read_ascii(data)
    else:
        soup = _read_binary(data)
    if infer_normals and len(soup):
        zero = ~soup.normals.any(axis=1)
        if zero.any():
            n = soup.normals.copy()
            n[zero] = facet_normals(soup.vertices[zero])
            soup = TriangleSoup(soup.vertices, n)
    return soup


def _read_binary(data: bytes) -> TriangleSoup:
    if len(data) < 84:
        raise ParseError(f"binary STL truncated: {len(data)} bytes, header needs 84")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) != 84 + 50 * count:
        raise ParseError(f"binary STL declares {count} triangles but holds {len(data) - 84} record bytes")
    arr = np.frombuffer(data, dtype=np.dtype([("v", "<f4", 12), ("a", "<u2")]), count=count, offset=84)
    vals = arr["v"].astype(float)
    return TriangleSoup(vals[:, 3:].reshape(-1, 3, 3), vals[:, :3])


def _read_ascii(data: bytes) -> TriangleSoup:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise ParseError("ASCII STL contains non-ASCII bytes") from None
    toks = []
    for n, line in enumerate(text.splitlines(), start=1):
        toks.extend((n, t) for t in line.split())
    pos = 0

    def take(expect=None):
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of ASCII STL", toks[-1][0] if toks else 1)
        n, t = toks[pos]
        pos += 1
        if expect is not None and t.lower() != expect:
            raise ParseError(f"expected '{expect}', found '{t}'", n)
        return n, t

    def number():
        n, t = take()
        try:
            return float(np.float32(float(t)))
        except ValueError:
            raise ParseError(f"bad number '{t}'", n) from None

    take("solid")
    if pos < len(toks) and toks[pos][1].lower() not in ("facet", "endsolid"):
        pos += 1  # solid name
    verts, norms = [], []
    while True:
        n, t = take()
        if t.lower() == "endsolid":
            break
        if t.lower() != "facet":
            raise ParseError(f"expected 'facet' or 'endsolid', found '{t}'", n)
        take("normal")
        norms.append([number() for _ in range(3)])
        take("outer")
        take("loop")
        tri = []
        for _ in range(3):
            take("vertex")
            tri.append([number() for _ in range(3)])
        verts.append(tri)
        take("endloop")
        take("endfacet")
    return TriangleSoup(np.array(verts).reshape(-1, 3, 3), np.array(norms).reshape(-1, 3))

"""Univariate B-splines, knot insertion and tensor-product B-splines.

All knot arithmetic is double precision unless a function is explicitly fed
:class:`fractions.Fraction` values; the single-knot insertion kernel is
generic over the number type so that the diagnostics module can reuse it for
exact computations.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, NotAKnotError, NotNestedError

__all__ = [
    "KnotVector",
    "LocalKnots",
    "TensorBSpline",
    "eval_bspline",
    "eval_bspline_array",
    "continuity_at",
    "oslo_refine",
    "refinement_rows",
    "split_weights",
    "greville_abscissae",
    "eval_tensor",
    "support_box",
    "tensor_space_growth",
    "eval_spline_curve",
]


def _as_tuple(values) -> tuple:
    return tuple(float(v) if not isinstance(v, Fraction) else v for v in values)


@dataclass(frozen=True)
class KnotVector:
    """Nondecreasing knot sequence of a univariate spline space of degree ``degree``."""

    values: tuple
    degree: int

    def __init__(self, values: Sequence[float], degree: int):
        vals = _as_tuple(values)
        if degree < 0 or int(degree) != degree:
            raise InvalidInputError(f"degree must be a nonnegative integer, got {degree}")
        degree = int(degree)
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise InvalidInputError("knot values must be nondecreasing")
        if len(vals) - degree - 1 < 1:
            raise InvalidInputError(
                f"need at least {degree + 2} knots for degree {degree}, got {len(vals)}"
            )
        for i in range(len(vals) - degree - 1):
            if not vals[i] < vals[i + degree + 1]:
                raise InvalidInputError(
                    f"knot {vals[i]} repeats more than degree+1 = {degree + 1} times"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "degree", degree)

    @property
    def dimension(self) -> int:
        return len(self.values) - self.degree - 1

    @property
    def domain(self) -> tuple:
        return self.values[self.degree], self.values[-self.degree - 1]

    def multiplicity(self, value) -> int:
        return sum(1 for v in self.values if v == value)

    def unique(self) -> list:
        return sorted(set(self.values))

    def local(self, i: int) -> "LocalKnots":
        p = self.degree
        return LocalKnots(self.values[i : i + p + 2], p)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class LocalKnots:
    """The p+2 knots of one univariate B-spline."""

    values: tuple
    degree: int

    def __init__(self, values: Sequence[float], degree: int | None = None):
        vals = _as_tuple(values)
        if degree is None:
            degree = len(vals) - 2
        if degree < 0 or len(vals) != degree + 2:
            raise InvalidInputError(
                f"a degree-{degree} B-spline needs exactly {degree + 2} knots, got {len(vals)}"
            )
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise InvalidInputError("local knots must be nondecreasing")
        if not vals[0] < vals[-1]:
            raise InvalidInputError("local knots must have first knot < last knot")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "degree", int(degree))

    @property
    def support(self) -> tuple:
        return self.values[0], self.values[-1]

    def multiplicity(self, value) -> int:
        return sum(1 for v in self.values if v == value)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _coerce_local(knots) -> LocalKnots:
    if isinstance(knots, LocalKnots):
        return knots
    return LocalKnots(knots)


def eval_bspline_array(knots, x, from_left: bool = False) -> np.ndarray:
    """Vectorised Cox-de Boor evaluation of one B-spline at an array of points.

    ``from_left`` switches the base case to ``t_i < x <= t_{i+1}``, giving the
    left limit (used at the right end of a clamped domain).
    """
    t = [float(v) for v in _coerce_local(knots).values]
    p = len(t) - 2
    x = np.asarray(x, dtype=float)
    if from_left:
        N = [((t[i] < x) & (x <= t[i + 1])).astype(float) for i in range(p + 1)]
    else:
        N = [((t[i] <= x) & (x < t[i + 1])).astype(float) for i in range(p + 1)]
    for k in range(1, p + 1):
        for i in range(p + 1 - k):
            d1 = t[i + k] - t[i]
            d2 = t[i + k + 1] - t[i + 1]
            val = np.zeros_like(x)
            if d1 > 0:
                val = val + (x - t[i]) / d1 * N[i]
            if d2 > 0:
                val = val + (t[i + k + 1] - x) / d2 * N[i + 1]
            N[i] = val
    return N[0]


def eval_bspline(knots, x: float, from_left: bool = False) -> float:
    """Value of the B-spline with local knots ``knots`` at ``x``.

    Zero outside ``[t_1, t_{p+2})``; terms with zero denominators are dropped.
    """
    return float(eval_bspline_array(knots, np.asarray([x], dtype=float), from_left)[0])


def continuity_at(kv: KnotVector, value) -> int:
    """Order of continuity ``p - m`` at a knot of multiplicity ``m`` (-1 means a jump)."""
    m = kv.multiplicity(value)
    if m == 0:
        raise NotAKnotError(f"{value} is not a knot of the knot vector")
    return kv.degree - m


def split_weights(t: Sequence, u):
    """Weights of ``B[t] = w1 * B[t'[:-1]] + w2 * B[t'[1:]]`` after inserting ``u``.

    ``t`` holds p+2 knots and ``t[0] <= u <= t[-1]``. Generic over the number
    type; returns ``(w1, w2)``.
    """
    p = len(t) - 2
    w1 = 1 if u >= t[p] else (u - t[0]) / (t[p] - t[0])
    w2 = 1 if u <= t[1] else (t[p + 1] - u) / (t[p + 1] - t[1])
    return w1, w2


def _insert_rows(T: list, u, rows: list, p: int):
    """Insert ``u`` into knot list ``T``; ``rows[i]`` maps old function i to fine coefficients.

    Returns the new knot list and the new rows (each row a dict fine-index -> weight
    expressing an *old* basis function in the refined basis, composed with previous rows).
    """
    k = max(i for i, v in enumerate(T) if v <= u) if T[0] <= u else -1
    newT = T[: k + 1] + [u] + T[k + 1 :]
    n_old = len(T) - p - 1
    # single-step map: old function i -> {new index: weight}
    step = []
    for i in range(n_old):
        if i + p + 1 <= k:
            step.append({i: 1})
        elif i > k:
            step.append({i + 1: 1})
        else:
            w1, w2 = split_weights(T[i : i + p + 2], u)
            d = {}
            if w1 != 0:
                d[i] = w1
            if w2 != 0:
                d[i + 1] = w2
            step.append(d)
    new_rows = []
    for row in rows:
        acc = {}
        for j, w in row.items():
            for jj, ww in step[j].items():
                acc[jj] = acc.get(jj, 0) + w * ww
        new_rows.append(acc)
    return newT, new_rows


def _difference(coarse: Sequence, fine: Sequence) -> list:
    cc, cf = Counter(coarse), Counter(fine)
    missing = cc - cf
    if missing:
        raise NotNestedError(f"fine knots do not contain coarse knots {sorted(missing)}")
    return sorted((cf - cc).elements())


def refinement_rows(coarse: Sequence, fine: Sequence, degree: int) -> list:
    """Exact-capable refinement map as a list of sparse rows, one per coarse function.

    Row ``i`` is a dict ``{fine index: weight}`` with
    ``B_i^coarse = sum_j weight_j B_j^fine``. Works with floats or Fractions.
    """
    T = list(coarse)
    rows = [{i: 1} for i in range(len(T) - degree - 1)]
    for u in _difference(coarse, fine):
        T, rows = _insert_rows(T, u, rows, degree)
    if list(T) != list(fine):
        raise NotNestedError("fine knot vector is not a refinement of the coarse one")
    return rows


def oslo_refine(coarse: KnotVector, fine: KnotVector) -> np.ndarray:
    """Refinement matrix ``A`` (fine x coarse) with ``c_fine = A @ c_coarse``.

    Built by composing single-knot insertions.
    """
    if coarse.degree != fine.degree:
        raise InvalidInputError("coarse and fine knot vectors must share the degree")
    rows = refinement_rows(coarse.values, fine.values, coarse.degree)
    A = np.zeros((fine.dimension, coarse.dimension))
    for i, row in enumerate(rows):
        for j, w in row.items():
            A[j, i] = float(w)
    return A


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages; for degree 0 the knot-interval midpoints."""
    t = np.asarray([float(v) for v in kv.values])
    p = kv.degree
    n = kv.dimension
    if p == 0:
        return 0.5 * (t[:n] + t[1 : n + 1])
    return np.array([t[i + 1 : i + p + 1].sum() / p for i in range(n)])


def eval_spline_curve(kv: KnotVector, coefs, x) -> np.ndarray:
    """Evaluate ``sum_i c_i B_i(x)`` for a spline on ``kv`` (right end by left limit)."""
    coefs = np.asarray(coefs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = kv.domain
    at_end = x == hi
    out = np.zeros((x.size,) + coefs.shape[1:])
    for i in range(kv.dimension):
        loc = kv.local(i)
        b = eval_bspline_array(loc, x)
        if at_end.any():
            b = np.where(at_end, eval_bspline_array(loc, x, from_left=True), b)
        out += np.multiply.outer(b, coefs[i]) if coefs.ndim > 1 else b * coefs[i]
    return out


@dataclass(frozen=True)
class TensorBSpline:
    """Product of ``d`` univariate B-splines."""

    knots: tuple

    def __init__(self, knots: Sequence):
        if len(knots) == 0:
            raise InvalidInputError("a tensor B-spline needs at least one direction")
        object.__setattr__(self, "knots", tuple(_coerce_local(k) for k in knots))

    @property
    def dimension(self) -> int:
        return len(self.knots)

    @property
    def degrees(self) -> tuple:
        return tuple(k.degree for k in self.knots)

    @property
    def key(self) -> tuple:
        return tuple(k.values for k in self.knots)

    def support(self) -> tuple:
        return support_box(self)

    def __call__(self, x):
        return eval_tensor(self, x)


def support_box(b: TensorBSpline) -> tuple:
    """Cartesian product of the first/last knots in each direction."""
    return tuple((k.values[0], k.values[-1]) for k in b.knots)


def eval_tensor(b: TensorBSpline, x, from_left=None) -> float:
    """Product of univariate values at the point ``x``."""
    x = tuple(x)
    if len(x) != b.dimension:
        raise InvalidInputError(f"point has dimension {len(x)}, B-spline has {b.dimension}")
    from_left = from_left or (False,) * b.dimension
    val = 1.0
    for k, xi, fl in zip(b.knots, x, from_left):
        val *= eval_bspline(k, xi, fl)
        if val == 0.0:
            return 0.0
    return val


def tensor_space_growth(dims: Sequence[int], axis: int) -> int:
    """Control points added by one knot inserted along ``axis`` of a full tensor space."""
    if not 0 <= axis < len(dims):
        raise InvalidInputError(f"axis {axis} out of range for {len(dims)} directions")
    return math.prod(n for k, n in enumerate(dims) if k != axis)

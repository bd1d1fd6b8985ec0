"""Independent reference implementations used by the test suite.

Nothing here imports the library's evaluation or refinement kernels; the
oracles are written from the textbook definitions so that agreement is
meaningful.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def cox_de_boor(t, x):
    """Brute-force recursion for the B-spline on the local knots ``t``.

    Half-open base case, ``0/0 := 0``. Works for floats and Fractions.
    """
    p = len(t) - 2
    if p == 0:
        return 1 if t[0] <= x < t[1] else 0
    left = t[: p + 1]
    right = t[1:]
    out = 0
    if t[p] != t[0]:
        out += (x - t[0]) / (t[p] - t[0]) * cox_de_boor(left, x)
    if t[p + 1] != t[1]:
        out += (t[p + 1] - x) / (t[p + 1] - t[1]) * cox_de_boor(right, x)
    return out


def cox_de_boor_array(t, x):
    """The same recursion evaluated on an array of abscissae."""
    x = np.asarray(x, dtype=float)
    p = len(t) - 2
    if p == 0:
        return ((t[0] <= x) & (x < t[1])).astype(float)
    out = np.zeros_like(x)
    if t[p] != t[0]:
        out += (x - t[0]) / (t[p] - t[0]) * cox_de_boor_array(t[: p + 1], x)
    if t[p + 1] != t[1]:
        out += (t[p + 1] - x) / (t[p + 1] - t[1]) * cox_de_boor_array(t[1:], x)
    return out


def basis_row(knots, p, x):
    """All B-splines of a global knot vector at ``x`` (left limit at the end)."""
    n = len(knots) - p - 1
    if x == knots[-1]:
        x = np.nextafter(x, -np.inf)
    return np.array([cox_de_boor(knots[i : i + p + 2], x) for i in range(n)], dtype=float)


def curve(knots, p, coefs, x):
    return basis_row(knots, p, x) @ np.asarray(coefs, dtype=float)


def tensor_value(local_knots, x):
    """Product of univariate oracle values, with left limits at right ends."""
    v = 1.0
    for t, xi in zip(local_knots, x):
        v *= cox_de_boor(list(t), xi)
    return v


def collection_sum(c, x, top):
    """``sum gamma_i B_i(x)`` from the oracle; ``top`` is the domain's upper corner."""
    x = [np.nextafter(xi, -np.inf) if xi == ti else xi for xi, ti in zip(x, top)]
    return sum(float(s.gamma) * tensor_value([lk.values for lk in s.bspline.knots], x) for s in c.splines)


def svd_rank(M, tol=1e-8):
    """Numerical rank with a relative singular-value threshold."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > tol * max(1.0, s[0])).sum())


def greville(knots, p):
    return [sum(knots[i + 1 : i + p + 1]) / p for i in range(len(knots) - p - 1)]


def insert_knot(knots, p, coefs, u):
    """Boehm single knot insertion, written out from the textbook formula."""
    knots = [float(v) for v in knots]
    coefs = np.asarray(coefs, dtype=float)
    k = max(i for i in range(len(knots) - 1) if knots[i] <= u < knots[i + 1])
    new = []
    for i in range(len(coefs) + 1):
        if i <= k - p:
            new.append(coefs[i])
        elif i > k:
            new.append(coefs[i - 1])
        else:
            a = (u - knots[i]) / (knots[i + p] - knots[i])
            new.append((1 - a) * coefs[i - 1] + a * coefs[i])
    return knots[: k + 1] + [u] + knots[k + 1 :], np.array(new)


def exact_cubic_center() -> Fraction:
    return cox_de_boor([Fraction(v) for v in (0, 1, 2, 3, 4)], Fraction(2))


def grid_element_count(values_per_axis) -> int:
    n = 1
    for vals in values_per_axis:
        n *= len(set(vals)) - 1
    return n


def polyline_length(points, closed):
    pts = np.asarray(points, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

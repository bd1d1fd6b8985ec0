"""Shared generators for refinement tests."""

import numpy as np

from lrkit.lrmesh import MeshRectangle
from lrkit.lrsplines import from_tensor


def uniform_knots(n_interior, degree=3, hi=None):
    hi = n_interior + 1 if hi is None else hi
    return [0.0] * (degree + 1) + [float(v) for v in range(1, n_interior + 1)] + [float(hi)] * (degree + 1)


def tensor(n_interior=6, degree=3, dim=2, coefficients=None):
    kv = uniform_knots(n_interior, degree)
    return from_tensor([kv] * dim, (degree,) * dim, coefficients)


def random_rectangle(c, rng):
    """A meshrectangle that splits at least one member of ``c``."""
    s = c.splines[int(rng.integers(len(c)))]
    k = int(rng.integers(c.dimension))
    t = s.bspline.knots[k].values
    gaps = [i for i in range(len(t) - 1) if t[i] < t[i + 1]]
    i = gaps[int(rng.integers(len(gaps)))]
    value = 0.5 * (t[i] + t[i + 1])
    box = s.bspline.support()
    ext = tuple(iv for j, iv in enumerate(box) if j != k)
    return MeshRectangle(k, value, ext, 1)


def random_points(domain, n, rng):
    lo = np.array([a for a, _ in domain])
    hi = np.array([b for _, b in domain])
    return lo + (hi - lo) * rng.random((n, len(domain)))

"""Collections of scaled tensor-product B-splines.

This is the common currency of the three refinement engines: LR B-splines,
(truncated) hierarchical B-splines and T-splines all end up as a list of
``(B-spline, gamma, coefficient)`` terms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Real

import numpy as np

from .errors import InvalidInputError
from .splinecore import TensorBSpline, eval_bspline_array

__all__ = ["Independence", "SplineType", "ScaledBSpline", "SplineCollection"]


class Independence(str, enum.Enum):
    INDEPENDENT = "Independent"
    NOT_INDEPENDENT = "NotIndependent"
    NOT_TESTED = "NotTested"


class SplineType(str, enum.Enum):
    ANALYSIS_SUITABLE_TSPLINE = "AnalysisSuitableTSpline"
    HIERARCHICAL_BSPLINE = "HierarchicalBSpline"
    LR_BSPLINE = "LRBSpline"
    SEMI_STANDARD_TSPLINE = "SemiStandardTSpline"
    STANDARD_TSPLINE = "StandardTSpline"


@dataclass(frozen=True, eq=False)
class ScaledBSpline:
    """One collection member: ``gamma * B`` with a control value and optional weight.

    ``group`` ties several members into a single basis function (used for
    expanded truncated hierarchical B-splines); ``None`` means the member is
    its own function.
    """

    bspline: TensorBSpline
    gamma: Real = 1
    coefficient: np.ndarray = field(default_factory=lambda: np.zeros(1))
    weight: float | None = None
    group: int | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInputError(f"scaling factor must be positive, got {self.gamma}")
        coef = np.atleast_1d(np.asarray(self.coefficient, dtype=float))
        object.__setattr__(self, "coefficient", coef)
        if self.weight is not None and not self.weight > 0:
            raise InvalidInputError("rational weights must be positive")

    def __eq__(self, other):
        return (
            isinstance(other, ScaledBSpline)
            and self.bspline == other.bspline
            and self.gamma == other.gamma
            and np.array_equal(self.coefficient, other.coefficient)
            and self.weight == other.weight
            and self.group == other.group
        )

    def __hash__(self):
        return hash((self.bspline, self.gamma))


class SplineCollection:
    """Immutable list of :class:`ScaledBSpline` with type and independence tags."""

    def __init__(
        self,
        splines,
        spline_type=SplineType.LR_BSPLINE,
        independence=Independence.NOT_TESTED,
        mesh=None,
        domain=None,
    ):
        self.splines = tuple(splines)
        if not self.splines:
            raise InvalidInputError("a collection needs at least one B-spline")
        d = self.splines[0].bspline.dimension
        degs = self.splines[0].bspline.degrees
        for s in self.splines:
            if s.bspline.degrees != degs:
                raise InvalidInputError("all members must share dimension and degrees")
        self.spline_type = SplineType(spline_type)
        self.independence = Independence(independence)
        self.mesh = mesh
        if domain is None:
            domain = mesh.domain if mesh is not None else tuple(
                (
                    min(s.bspline.knots[k].values[0] for s in self.splines),
                    max(s.bspline.knots[k].values[-1] for s in self.splines),
                )
                for k in range(d)
            )
        self.domain = tuple((float(a), float(b)) for a, b in domain)

    @property
    def dimension(self) -> int:
        return self.splines[0].bspline.dimension

    @property
    def degrees(self) -> tuple:
        return self.splines[0].bspline.degrees

    @property
    def rational(self) -> bool:
        return any(s.weight is not None for s in self.splines)

    def __len__(self):
        return len(self.splines)

    def __iter__(self):
        return iter(self.splines)

    def replace(self, **changes) -> "SplineCollection":
        kw = dict(
            splines=self.splines,
            spline_type=self.spline_type,
            independence=self.independence,
            mesh=self.mesh,
            domain=self.domain,
        )
        kw.update(changes)
        return SplineCollection(**kw)

    def function_groups(self) -> list:
        """Member indices grouped into basis functions, in first-appearance order."""
        groups = {}
        order = []
        for i, s in enumerate(self.splines):
            key = ("g", s.group) if s.group is not None else ("m", i)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(i)
        return [groups[k] for k in order]

    def basis_values(self, points) -> np.ndarray:
        """Matrix ``(n_points, n_members)`` of ``B_i(x)`` (without gamma).

        Points on the upper domain face are evaluated by left limit.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dimension:
            raise InvalidInputError("point dimension does not match the collection")
        at_end = [pts[:, k] == self.domain[k][1] for k in range(self.dimension)]
        cache = {}
        out = np.ones((pts.shape[0], len(self.splines)))
        for i, s in enumerate(self.splines):
            for k, lk in enumerate(s.bspline.knots):
                key = (k, lk.values)
                vals = cache.get(key)
                if vals is None:
                    vals = eval_bspline_array(lk, pts[:, k])
                    if at_end[k].any():
                        vals = np.where(at_end[k], eval_bspline_array(lk, pts[:, k], from_left=True), vals)
                    cache[key] = vals
                out[:, i] *= vals
        return out

    def gammas(self) -> np.ndarray:
        return np.array([float(s.gamma) for s in self.splines])

    def coefficients(self) -> np.ndarray:
        return np.array([s.coefficient for s in self.splines])

    def weights(self) -> np.ndarray:
        return np.array([1.0 if s.weight is None else float(s.weight) for s in self.splines])

    def partition_sum(self, points) -> np.ndarray:
        """``sum_i gamma_i B_i(x)`` at each point."""
        return self.basis_values(points) @ self.gammas()

    def evaluate(self, points) -> np.ndarray:
        """``sum gamma w c B / sum gamma w B`` at each point (weights default to 1)."""
        B = self.basis_values(points) * (self.gammas() * self.weights())
        num = B @ self.coefficients()
        den = B.sum(axis=1)
        if self.rational:
            return num / den[:, None]
        return num

    def with_coefficients(self, coefs) -> "SplineCollection":
        coefs = np.asarray(coefs, dtype=float)
        if coefs.shape[0] != len(self.splines):
            raise InvalidInputError("coefficient count does not match the collection")
        return self.replace(splines=[replace(s, coefficient=c) for s, c in zip(self.splines, coefs)])


def as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)

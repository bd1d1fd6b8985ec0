"""Geometry evaluation, iso-curves, minimal bases, tessellation and slicing."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrkit.collection import Independence, ScaledBSpline, SplineCollection
from lrkit.errors import InvalidInputError, OutOfDomainError
from lrkit.geometry import (
    SplineGeometry,
    TriangleSoup,
    box_soup,
    eval_geometry,
    extract_isocurve,
    slice_soup,
    tessellate,
    to_minimal_basis,
)
from lrkit.hbsplines import HierarchySelection, box_cells, hb_refine, hb_to_collection, refit
from lrkit.lrsplines import from_tensor, refine
from lrkit.splinecore import TensorBSpline

from helpers import random_points, random_rectangle, tensor, uniform_knots
from oracles import basis_row, curve, polyline_length, tensor_value


def lift(c, fz):
    """Greville control points with a third coordinate ``fz(x, y)``."""
    xy = c.coefficients()
    return SplineGeometry(c, np.column_stack([xy, fz(xy[:, 0], xy[:, 1])]))


def bump(x, y):
    return np.exp(-((x - 2.5) ** 2 + (y - 2.5) ** 2))


@pytest.fixture(scope="module")
def bump_geometry():
    return lift(tensor(4), bump)


def plane_distance(p, tri):
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    return abs((p - tri[0]) @ n) / np.linalg.norm(n)


def sampled_triangle_distance(p, tri, n=40):
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    a, b = i[keep][:, None] / n, j[keep][:, None] / n
    q = tri[0] + (tri[1] - tri[0]) * a + (tri[2] - tri[0]) * b
    return float(np.linalg.norm(q - p, axis=1).min())


class TestEvaluation:
    def test_linear_precision(self, rng):
        c = tensor(3)
        g = lift(c, lambda x, y: 2 * x - y)
        pts = random_points(c.domain, 100, rng)
        want = np.column_stack([pts, 2 * pts[:, 0] - pts[:, 1]])
        assert np.abs(eval_geometry(g, pts) - want).max() < 1e-10

    def test_unit_weights_match_polynomial(self, bump_geometry, rng):
        c = bump_geometry.collection
        w = SplineGeometry(c, weights=np.ones(len(c)))
        pts = random_points(c.domain, 50, rng)
        assert np.abs(eval_geometry(w, pts) - c.evaluate(pts)).max() < 1e-12

    def test_constant_weights_match_unit_weights(self, bump_geometry, rng):
        c = bump_geometry.collection
        a = SplineGeometry(c, weights=np.full(len(c), 3.7))
        pts = random_points(c.domain, 50, rng)
        assert np.abs(eval_geometry(a, pts) - eval_geometry(bump_geometry, pts)).max() < 1e-12

    def test_rational_against_oracle(self, bump_geometry, rng):
        c = bump_geometry.collection
        w = 0.5 + rng.random(len(c))
        g = SplineGeometry(c, weights=w)
        for x in random_points(c.domain, 20, rng):
            b = np.array([tensor_value([lk.values for lk in s.bspline.knots], x) for s in c.splines])
            want = (b * w) @ c.coefficients() / (b @ w)
            assert np.abs(g(x) - want).max() < 1e-12

    def test_single_point_shape(self, bump_geometry):
        assert eval_geometry(bump_geometry, [1.0, 2.0]).shape == (3,)

    def test_outside_domain(self, bump_geometry):
        with pytest.raises(OutOfDomainError):
            eval_geometry(bump_geometry, [5.5, 1.0])

    def test_nonpositive_weight(self, bump_geometry):
        with pytest.raises(InvalidInputError):
            SplineGeometry(bump_geometry.collection, weights=np.zeros(len(bump_geometry.collection)))

    def test_weight_count(self, bump_geometry):
        with pytest.raises(InvalidInputError):
            SplineGeometry(bump_geometry.collection, weights=[1.0, 2.0])


class TestRefinementInvariance:
    def test_lr(self, bump_geometry, rng):
        c = bump_geometry.collection
        r = c
        for _ in range(5):
            r = refine(r, random_rectangle(r, rng))
        pts = random_points(c.domain, 300, rng)
        assert np.abs(eval_geometry(r, pts) - eval_geometry(c, pts)).max() < 1e-10

    def test_thb(self, rng):
        s = HierarchySelection(((0, 4), (0, 4)), (3, 3))
        coarse = hb_to_collection(s, truncated=True)
        coarse = coarse.with_coefficients(np.column_stack([coarse.coefficients(), bump(*coarse.coefficients().T)]))
        s = hb_refine(s, 0, box_cells(s, 1, ((1, 3), (1, 3))))
        fine = refit(hb_to_collection(s, truncated=True), coarse)
        pts = random_points(coarse.domain, 300, rng)
        assert np.abs(eval_geometry(fine, pts) - eval_geometry(coarse, pts)).max() < 1e-10


class TestIsocurve:
    def test_tensor_contraction(self, rng):
        kv = uniform_knots(3)
        n = len(kv) - 4
        P = rng.normal(size=(n, n, 3))
        c = from_tensor([kv, kv], (3, 3), coefficients=P.reshape(-1, 3))
        v = 2.3
        iso = extract_isocurve(c, 1, v)
        Q = np.einsum("ijk,j->ik", P, basis_row(kv, 3, v))
        xs = np.linspace(0, 4, 200)
        got = iso.evaluate(xs[:, None])
        want = np.array([curve(kv, 3, Q, x) for x in xs])
        assert np.abs(got - want).max() < 1e-12

    def test_flagged_not_tested(self, bump_geometry):
        iso = extract_isocurve(bump_geometry, 0, 1.5)
        assert iso.independence == Independence.NOT_TESTED
        assert iso.dimension == 1

    def test_refined_surface_agreement(self, bump_geometry, rng):
        c = bump_geometry.collection
        for _ in range(6):
            c = refine(c, random_rectangle(c, rng))
        for direction, value in ((0, 1.7), (1, 3.25)):
            iso = extract_isocurve(c, direction, value)
            ts = np.linspace(0, 5, 200)
            pts = np.insert(ts[:, None], direction, value, axis=1)
            assert np.abs(iso.evaluate(ts[:, None]) - c.evaluate(pts)).max() < 1e-10

    def test_boundary_curve_uses_boundary_controls(self, bump_geometry):
        c = bump_geometry.collection
        iso = extract_isocurve(c, 1, 5.0)
        boundary = {tuple(s.coefficient) for s in c.splines if s.bspline.knots[1].values[1] == 5.0}
        assert {tuple(s.coefficient) for s in iso.splines} == boundary
        assert all(s.gamma == 1 for s in iso.splines)

    def test_bad_direction(self, bump_geometry):
        with pytest.raises(InvalidInputError):
            extract_isocurve(bump_geometry, 2, 1.0)

    def test_value_outside(self, bump_geometry):
        with pytest.raises(OutOfDomainError):
            extract_isocurve(bump_geometry, 0, 7.0)

    def test_needs_surface(self):
        with pytest.raises(InvalidInputError):
            extract_isocurve(from_tensor([uniform_knots(2)], (3,)), 0, 1.0)


class TestMinimalBasis:
    def test_already_minimal(self, rng):
        kv = uniform_knots(4)
        P = rng.normal(size=(len(kv) - 4, 2))
        c = from_tensor([kv], (3,), coefficients=P)
        knots, coefs, weights = to_minimal_basis(c)
        assert list(knots.values) == kv
        assert np.allclose(coefs, P, atol=1e-15)
        assert weights is None

    def test_redundant_isocurve(self, bump_geometry, rng):
        c = bump_geometry.collection
        for _ in range(6):
            c = refine(c, random_rectangle(c, rng))
        iso = extract_isocurve(c, 1, 2.6)
        knots, coefs, _ = to_minimal_basis(iso)
        assert len(coefs) == knots.dimension
        assert len(coefs) <= len(iso)
        xs = np.linspace(0, 5, 500)
        want = iso.evaluate(xs[:, None])
        got = np.array([curve(list(knots.values), 3, coefs, x) for x in xs])
        assert np.abs(got - want).max() < 1e-12

    def test_two_halves_merge(self):
        b = TensorBSpline([[0, 1, 2, 3, 4]])
        half = Fraction(1, 2)
        c = SplineCollection([ScaledBSpline(b, half, [2.0]), ScaledBSpline(b, half, [2.0])])
        knots, coefs, _ = to_minimal_basis(c)
        assert knots.dimension == 1
        assert coefs[0, 0] == pytest.approx(2.0, abs=1e-15)

    def test_rational_curve(self, bump_geometry, rng):
        c = bump_geometry.collection
        g = SplineGeometry(c, weights=0.5 + rng.random(len(c)))
        iso = extract_isocurve(g, 0, 1.3)
        knots, coefs, weights = to_minimal_basis(iso)
        xs = np.linspace(0, 5, 200)
        kv = list(knots.values)
        num = np.array([curve(kv, 3, coefs * weights[:, None], x) for x in xs])
        den = np.array([curve(kv, 3, weights, x) for x in xs])
        assert np.abs(num / den[:, None] - eval_geometry(iso, xs[:, None])).max() < 1e-12

    def test_rejects_surfaces(self, bump_geometry):
        with pytest.raises(InvalidInputError):
            to_minimal_basis(bump_geometry.collection)

    def test_mixed_degrees_rejected(self):
        with pytest.raises(InvalidInputError):
            SplineCollection([ScaledBSpline(TensorBSpline([[0, 1, 2]])), ScaledBSpline(TensorBSpline([[0, 1, 2, 3]]))])


class TestTessellate:
    def test_planar_patch(self):
        kv = [0, 0, 1, 1]
        c = from_tensor([kv, kv], (1, 1), coefficients=[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0.5]])
        flat = from_tensor([kv, kv], (1, 1), coefficients=[[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]])
        assert len(tessellate(flat, 1e-6)) == 2
        assert len(tessellate(c, 10.0)) == 2

    def test_counts_non_decreasing(self, bump_geometry):
        counts = [len(tessellate(bump_geometry, tol)) for tol in (0.1, 0.05, 0.025, 0.0125)]
        assert counts == sorted(counts)
        assert counts[-1] > counts[0]

    def test_no_cracks_between_elements(self, bump_geometry, rng):
        c = bump_geometry.collection
        for _ in range(3):
            c = refine(c, random_rectangle(c, rng))
        soup = tessellate(c, 0.01)
        edges = {}
        for tri in soup.vertices:
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = frozenset((tuple(tri[a]), tuple(tri[b])))
                edges[key] = edges.get(key, 0) + 1
        for key, n in edges.items():
            ends = np.array(list(key))
            side = np.isclose(ends[:, :2], 0.0, atol=1e-9) | np.isclose(ends[:, :2], 5.0, atol=1e-9)
            on_boundary = np.any(np.all(side, axis=0))
            assert n == (1 if on_boundary else 2)

    def test_chordal_bound_and_vertices_on_surface(self, bump_geometry):
        tol = 0.02
        soup = tessellate(bump_geometry, tol)
        # the surface is a graph over its parameters, so x and y are the parameters
        params = np.clip(soup.vertices[:, :, :2], 0.0, 5.0)
        on = eval_geometry(bump_geometry, params.reshape(-1, 2)).reshape(-1, 3, 3)
        assert np.abs(on - soup.vertices).max() < 1e-12
        for tri, uv in zip(soup.vertices, params):
            probes = np.array([(uv[0] + uv[1]) / 2, (uv[1] + uv[2]) / 2, (uv[0] + uv[2]) / 2, uv.mean(axis=0)])
            xs = eval_geometry(bump_geometry, probes)
            assert max(plane_distance(x, tri) for x in xs) <= tol + 1e-12
        edge = np.linalg.norm(soup.vertices[:, 1] - soup.vertices[:, 0], axis=1).max()
        for tri, uv in list(zip(soup.vertices, params))[::5]:
            x = eval_geometry(bump_geometry, uv.mean(axis=0))
            assert sampled_triangle_distance(x, tri) <= tol + 2 * edge / 40

    def test_normals_follow_right_hand_rule(self, bump_geometry):
        soup = tessellate(bump_geometry, 0.05)
        for tri, n in zip(soup.vertices, soup.normals):
            rh = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            cos = rh @ n / np.linalg.norm(rh)
            assert np.arccos(min(cos, 1.0)) < 1e-6

    def test_collapsed_edge_gives_zero_normal(self):
        kv = [0, 0, 1, 1]
        c = from_tensor([kv, kv], (1, 1), coefficients=[[0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0]])
        soup = tessellate(c, 0.1)
        assert any(not n.any() for n in soup.normals)

    def test_bad_tolerance(self, bump_geometry):
        with pytest.raises(InvalidInputError):
            tessellate(bump_geometry, 0.0)

    def test_needs_three_coordinates(self):
        with pytest.raises(InvalidInputError):
            tessellate(tensor(2), 0.1)


class TestSlice:
    def test_unit_cube_square(self):
        res = slice_soup(box_soup(), 0.5)
        assert len(res) == 1
        assert res[0].closed
        assert polyline_length(res[0].points, closed=True) == pytest.approx(4.0, abs=1e-12)
        assert not res.perturbed

    @pytest.mark.parametrize("h", [-0.5, 1.5])
    def test_outside_is_empty(self, h):
        assert len(slice_soup(box_soup(), h)) == 0

    def test_vertex_height_is_perturbed(self):
        res = slice_soup(box_soup(n=2), 0.5)
        assert res.perturbed
        assert res.height > 0.5
        assert len(res) == 1 and res[0].closed

    def test_missing_triangle_leaves_open_chain(self):
        soup = box_soup()
        hit = [i for i, t in enumerate(soup.vertices) if t[:, 2].min() < 0.5 < t[:, 2].max()]
        res = slice_soup(soup.without(hit[0]), 0.5)
        assert not any(pl.closed for pl in res)
        assert len(res) == 1

    def test_counter_clockwise_from_above(self):
        p = slice_soup(box_soup(), 0.3)[0].points
        x, y = p[:, 0], p[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        assert area == pytest.approx(1.0)

    def test_independent_of_triangle_order(self, rng):
        soup = box_soup(n=3)
        perm = rng.permutation(len(soup))
        shuffled = TriangleSoup(soup.vertices[perm], soup.normals[perm])
        a, b = slice_soup(soup, 0.4), slice_soup(shuffled, 0.4)
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            assert pa.closed == pb.closed
            assert np.array_equal(pa.points, pb.points)

    @given(st.floats(0.001, 0.999))
    def test_watertight_loops_closed(self, h):
        res = slice_soup(box_soup((0, 0, 0), (2, 1, 1), n=3), h)
        assert len(res) == 1 and res[0].closed

    def test_tessellated_bump_closed_slice(self, bump_geometry):
        soup = tessellate(bump_geometry, 0.05)
        res = slice_soup(soup, 0.5)
        assert len(res) == 1
        assert res[0].closed

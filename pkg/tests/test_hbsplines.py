"""Hierarchical and truncated hierarchical B-splines."""

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrkit.collection import SplineType
from lrkit.diagnostics import linear_independence, nestedness, partition_of_unity, sample_grid
from lrkit.errors import InvalidInputError
from lrkit.hbsplines import (
    HierarchySelection,
    box_cells,
    disjoint_support_check,
    hb_refine,
    hb_to_collection,
    level_knots,
    truncate,
)
from lrkit.lrsplines import from_tensor
from lrkit.splinecore import oslo_refine

from oracles import basis_row, collection_sum, tensor_value


def brute_force_active_count(domain, degrees, boxes, depth):
    """Brute-force active count: enumerate every function of every level.

    ``boxes[l]`` lists parameter boxes forming the level-``l`` refined region
    for ``l >= 1``. Containment is tested on cell midpoints of the finest grid.
    """
    h = 2.0 ** -(depth + 1)

    def inside(region, supp):
        if region is None:
            return True
        axes = [np.arange(lo + h / 2, hi, h) for lo, hi in supp]
        for x in itertools.product(*axes):
            if not any(all(a <= xi <= b for xi, (a, b) in zip(x, box)) for box in region):
                return False
        return True

    total = 0
    for lev in range(depth + 1):
        knots = []
        for (a, b), p in zip(domain, degrees):
            step = 2.0**-lev
            inner = list(np.arange(a + step, b - step / 2, step))
            knots.append([a] * (p + 1) + inner + [b] * (p + 1))
        region = None if lev == 0 else boxes[lev]
        finer = boxes[lev + 1] if lev + 1 < len(boxes) else []
        for idx in itertools.product(*[range(len(t) - p - 1) for t, p in zip(knots, degrees)]):
            supp = [(t[i], t[i + p + 1]) for t, p, i in zip(knots, degrees, idx)]
            if inside(region, supp) and not (finer and inside(finer, supp)):
                total += 1
    return total


def open_support_connected(t, n=64):
    """Connectivity of ``{f != 0}`` on a sample lattice, via face midpoints."""
    members = [([lk.values for lk in b.knots], float(c)) for b, c in t.members()]
    lo = [min(m[0][k][0] for m in members) for k in range(2)]
    hi = [max(m[0][k][-1] for m in members) for k in range(2)]
    hx = [(b - a) / n for a, b in zip(lo, hi)]

    def f(x):
        return sum(c * tensor_value(kn, x) for kn, c in members)

    def mid(i, j):
        return (lo[0] + (i + 0.5) * hx[0], lo[1] + (j + 0.5) * hx[1])

    alive = {(i, j) for i in range(n) for j in range(n) if f(mid(i, j)) > 1e-14}
    if not alive:
        return True
    start = next(iter(alive))
    seen = {start}
    stack = [start]
    while stack:
        i, j = stack.pop()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (i + di, j + dj)
            if nb in alive and nb not in seen:
                a, b = mid(i, j), mid(*nb)
                if f(((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)) > 1e-14:
                    seen.add(nb)
                    stack.append(nb)
    return len(seen) == len(alive)


def fig2_selection():
    s = HierarchySelection(((0, 6), (0, 6)), (3, 3))
    s = hb_refine(s, 0, box_cells(s, 1, ((1, 5), (1, 5))))
    return hb_refine(s, 1, box_cells(s, 2, ((2, 4), (2, 4))))


@pytest.fixture(scope="module")
def fig2():
    return fig2_selection()


class TestLevels:
    def test_level_zero_is_integer_grid(self):
        kv = level_knots(0, 3, 2, 0)
        assert list(kv.values) == [0, 0, 0, 1, 2, 3, 3, 3]

    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_dyadic_nesting(self, level):
        coarse = set(level_knots(0, 2, 3, level).values)
        fine = set(level_knots(0, 2, 3, level + 1).values)
        assert coarse <= fine

    @pytest.mark.parametrize("level", [0, 1, 2])
    def test_level_space_nested_in_next(self, level):
        coarse = level_knots(0, 2, 3, level)
        fine = level_knots(0, 2, 3, level + 1)
        rng = np.random.default_rng(level)
        c = rng.normal(size=coarse.dimension)
        refined = oslo_refine(coarse, fine) @ c
        for x in np.linspace(0, 2, 41):
            a = sum(ci * b for ci, b in zip(c, _basis(coarse, x)))
            b = sum(ci * b for ci, b in zip(refined, _basis(fine, x)))
            assert abs(a - b) < 1e-12


def _basis(kv, x):
    return basis_row(list(kv.values), kv.degree, x)


class TestSelection:
    def test_single_level_is_tensor(self):
        s = HierarchySelection(((0, 4), (0, 3)), (2, 2))
        assert len(s.active_functions()) == 6 * 5

    def test_non_integer_domain_rejected(self):
        with pytest.raises(InvalidInputError):
            HierarchySelection(((0, 1.5), (0, 1)), (2, 2))

    def test_empty_region_keeps_selection(self):
        s = HierarchySelection(((0, 4), (0, 4)), (2, 2))
        assert hb_refine(s, 0, set()) == s

    def test_full_replacement(self):
        s = HierarchySelection(((0, 2), (0, 2)), (2, 2))
        for lev in range(2):
            s = hb_refine(s, lev, box_cells(s, lev + 1, ((0, 2), (0, 2))))
        funcs = s.active_functions()
        assert {l for l, _ in funcs} == {2}
        assert len(funcs) == (2 * 4 + 2) ** 2

    def test_region_outside_parent_rejected(self):
        s = HierarchySelection(((0, 4), (0, 4)), (2, 2))
        s = hb_refine(s, 0, box_cells(s, 1, ((0, 2), (0, 2))))
        with pytest.raises(InvalidInputError):
            hb_refine(s, 1, box_cells(s, 2, ((2, 3), (2, 3))))

    def test_cell_outside_grid_rejected(self):
        s = HierarchySelection(((0, 2), (0, 2)), (2, 2))
        with pytest.raises(InvalidInputError):
            hb_refine(s, 0, {(4, 0)})

    def test_skipping_a_level_rejected(self):
        s = HierarchySelection(((0, 2), (0, 2)), (2, 2))
        with pytest.raises(InvalidInputError):
            hb_refine(s, 1, {(0, 0)})

    def test_two_level_counts_match_brute_force(self, fig2):
        boxes = [None, [((1, 5), (1, 5))], [((2, 4), (2, 4))]]
        want = brute_force_active_count(((0, 6), (0, 6)), (3, 3), boxes, 2)
        assert len(fig2.active_functions()) == want

    def test_coarse_removed_fine_added(self):
        s = HierarchySelection(((0, 6), (0, 6)), (3, 3))
        r = hb_refine(s, 0, box_cells(s, 1, ((1, 5), (1, 5))))
        assert len(r.active(0)) < len(s.active(0))
        assert len(r.active(1)) > 0

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=6), st.data())
    def test_regions_stay_nested(self, cells, data):
        s = HierarchySelection(((0, 2), (0, 2)), (2, 2))
        s = hb_refine(s, 0, cells)
        parents = sorted(s.region(1)) if s.depth else []
        if parents:
            pick = data.draw(st.lists(st.sampled_from(parents), max_size=3))
            kids = {(2 * a + i, 2 * b + j) for a, b in pick for i in (0, 1) for j in (0, 1)}
            s = hb_refine(s, 1, kids)
        for lev in range(2, s.depth + 1):
            assert all((a // 2, b // 2) in s.region(lev - 1) for a, b in s.region(lev))


class TestTruncation:
    def test_single_level_is_identity(self):
        s = HierarchySelection(((0, 3), (0, 3)), (2, 2))
        for t in truncate(s):
            assert t.terms == {(t.level, t.index): 1}

    def test_function_without_refined_children_unchanged(self, fig2):
        for t in truncate(fig2):
            if t.level == fig2.depth:
                assert t.terms == {(t.level, t.index): 1}

    def test_terms_are_positive(self, fig2):
        assert all(v > 0 for t in truncate(fig2) for v in t.terms.values())

    def test_thb_partition_of_unity(self, fig2):
        c = hb_to_collection(fig2, truncated=True)
        pts = sample_grid(c.domain, 25)
        assert np.abs(c.partition_sum(pts) - 1).max() < 1e-10

    def test_hb_partition_exceeds_one(self, fig2):
        c = hb_to_collection(fig2, truncated=False)
        pts = sample_grid(c.domain, 25)
        assert c.partition_sum(pts).max() > 1 + 1e-3

    def test_oracle_sum_at_random_points(self, fig2, rng):
        c = hb_to_collection(fig2, truncated=True)
        for x in rng.random((20, 2)) * 6:
            assert abs(collection_sum(c, x, (6, 6)) - 1) < 1e-10


class TestDisjointSupport:
    def test_untruncated_function_connected(self):
        s = HierarchySelection(((0, 3), (0, 3)), (2, 2))
        assert all(disjoint_support_check(t) for t in truncate(s))

    def test_middle_band_removed(self):
        s = HierarchySelection(((0, 4), (0, 4)), (1, 1))
        s = hb_refine(s, 0, box_cells(s, 1, ((1.5, 2.5), (0, 4))))
        split = [t for t in truncate(s) if t.level == 0 and len(t.terms) > 1]
        assert split
        for t in split:
            assert not disjoint_support_check(t)
            assert not open_support_connected(t)

    def test_refined_end_stays_connected(self):
        s = HierarchySelection(((0, 4), (0, 4)), (2, 2))
        s = hb_refine(s, 0, box_cells(s, 1, ((0, 2), (0, 4))))
        touched = [t for t in truncate(s) if t.level == 0 and len(t.terms) > 1]
        assert touched
        for t in touched:
            assert disjoint_support_check(t)
            assert open_support_connected(t)


class TestCollection:
    def test_single_level_matches_tensor(self):
        s = HierarchySelection(((0, 3), (0, 3)), (2, 2))
        c = hb_to_collection(s, truncated=False)
        kv = list(level_knots(0, 3, 2, 0).values)
        t = from_tensor([kv, kv], (2, 2))
        assert {m.bspline for m in c.splines} == {m.bspline for m in t.splines}
        assert c.spline_type == SplineType.HIERARCHICAL_BSPLINE

    def test_thb_members_grouped(self, fig2):
        c = hb_to_collection(fig2, truncated=True)
        assert len(c.function_groups()) == len(fig2.active_functions())
        assert len(c) > len(fig2.active_functions())

    def test_hb_gammas_all_one(self, fig2):
        c = hb_to_collection(fig2, truncated=False)
        assert all(s.gamma == 1 for s in c.splines)

    def test_coefficient_count_checked(self, fig2):
        with pytest.raises(InvalidInputError):
            hb_to_collection(fig2, truncated=False, coefficients=np.zeros((3, 2)))


@pytest.fixture(scope="module")
def pair():
    s = HierarchySelection(((0, 4), (0, 4)), (2, 2))
    s = hb_refine(s, 0, box_cells(s, 1, ((1, 3), (1, 4))))
    return hb_to_collection(s, truncated=False), hb_to_collection(s, truncated=True)


class TestSmallHierarchyDiagnostics:
    def test_hb_independent(self, pair):
        hb, _ = pair
        rep = linear_independence(hb)
        assert rep.rank == len(hb)

    def test_thb_exact_partition(self, pair):
        _, thb = pair
        assert partition_of_unity(thb, samples=10).exact

    def test_same_span_both_ways(self, pair):
        hb, thb = pair
        assert nestedness(hb, thb).nested
        assert nestedness(thb, hb).nested

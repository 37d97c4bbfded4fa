import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenshare.geometry import (
    AreaSpec,
    Coverage,
    DegenerateCellError,
    Point,
    UserClass,
    UserDistribution,
    assign_users,
    build_grid,
    ceil_count,
    expected_path_loss_factor,
    grid_sites,
)

UNIFORM = UserDistribution("uniform")


def gaussian_counts_mc(sites, area, mean, var, n_users, samples=1_000_000, seed=7):
    """Per-cell head counts from Monte-Carlo sampling of the (untruncated) Gaussian."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(loc=(mean.x, mean.y), scale=np.sqrt(var), size=(samples, 2))
    inside = (pts[:, 0] >= 0) & (pts[:, 0] <= area.width) & (pts[:, 1] >= 0) & (pts[:, 1] <= area.height)
    pts = pts[inside]
    sx = np.array([p.x for p in sites])
    sy = np.array([p.y for p in sites])
    d2 = (pts[:, :1] - sx) ** 2 + (pts[:, 1:] - sy) ** 2
    share = np.bincount(np.argmin(d2, axis=1), minlength=len(sites)) / samples
    return np.ceil(n_users * share).astype(int)


class TestGrid:
    def test_point_count_and_cell_size(self):
        g = build_grid(AreaSpec(5, 5), 2)
        assert g.size == 100
        assert (g.dx, g.dy) == (0.5, 0.5)

    def test_single_point(self):
        g = build_grid(AreaSpec(1, 1), 1)
        assert g.size == 1
        assert (g.x[0], g.y[0]) == (0.5, 0.5)

    def test_uniform_mass_sums_to_one(self):
        g = build_grid(AreaSpec(5, 5), 50)
        assert g.size == 62_500
        assert abs(g.weights(UNIFORM).sum() - 1.0) < 1e-9

    def test_rejects_non_positive_resolution(self):
        with pytest.raises(ValueError):
            build_grid(AreaSpec(1, 1), 0)

    def test_gaussian_mass_below_one(self):
        g = build_grid(AreaSpec(5, 5), 50)
        m = g.weights(UserDistribution("gaussian", Point(2.5, 2.5), 1.0)).sum()
        # mass of the box [-2.5, 2.5]^2 under a unit normal
        assert m == pytest.approx(math.erf(2.5 / math.sqrt(2)) ** 2, abs=1e-5)

    def test_grid_sites_margins(self):
        sites = grid_sites(AreaSpec(6, 3), 1, 3)
        assert [(p.x, p.y) for p in sites] == [(1, 1.5), (3, 1.5), (5, 1.5)]


class TestAssignment:
    def test_symmetric_cells_get_ceiling(self):
        area = AreaSpec(5, 5)
        sites = [(0, p) for p in grid_sites(area, 5, 5)]
        a = assign_users(sites, np.ones(25, bool), build_grid(area, 10), [UserClass(0, 200, UNIFORM)])
        np.testing.assert_array_equal(a.counts[:, 0], 8)

    def test_single_active_bs_hosts_everyone(self):
        area = AreaSpec(2, 2)
        sites = [(0, Point(0.5, 1)), (1, Point(1.5, 1))]
        classes = [UserClass(0, 30, UNIFORM), UserClass(1, 40, UNIFORM)]
        a = assign_users(sites, [False, True], build_grid(area, 10), classes)
        assert a.roamed[0, 1] == 30
        assert a.roamed[1, 0] == 0
        assert np.all(np.diag(a.roamed) == 0)
        np.testing.assert_array_equal(a.counts[0], 0)

    def test_no_active_bs(self):
        area = AreaSpec(1, 1)
        with pytest.raises(ValueError):
            assign_users([(0, Point(0.5, 0.5))], [False], build_grid(area, 4), [UserClass(0, 1, UNIFORM)])

    def test_tie_goes_to_lowest_index(self):
        area = AreaSpec(2, 1)
        # two co-located sites: every point ties
        sites = [(0, Point(1, 0.5)), (1, Point(1, 0.5))]
        a = assign_users(sites, [True, True], build_grid(area, 4), [UserClass(0, 5, UNIFORM)])
        assert np.all(a.labels == 0)

    def test_gaussian_center_heavier_than_corner(self):
        area = AreaSpec(5, 5)
        sites = grid_sites(area, 3, 3)
        dist = UserDistribution("gaussian", Point(2.5, 2.5), 1.0)
        a = assign_users([(0, p) for p in sites], np.ones(9, bool), build_grid(area, 50), [UserClass(0, 200, dist)])
        assert a.counts[4, 0] > a.counts[0, 0]

    def test_gaussian_counts_match_monte_carlo(self):
        area = AreaSpec(5, 5)
        sites = grid_sites(area, 3, 3)
        mean = Point(2.5, 2.5)
        dist = UserDistribution("gaussian", mean, 1.0)
        a = assign_users([(0, p) for p in sites], np.ones(9, bool), build_grid(area, 50), [UserClass(0, 200, dist)])
        mc = gaussian_counts_mc(sites, area, mean, 1.0, 200)
        assert np.max(np.abs(a.counts[:, 0] - mc)) <= 1

    def test_incremental_matches_full_scan(self, rng):
        area = AreaSpec(3, 3)
        sites = [(int(k % 2), Point(*rng.uniform(0, 3, 2))) for k in range(8)]
        cov = Coverage(sites, build_grid(area, 12), [UserClass(0, 50, UNIFORM), UserClass(1, 30, UNIFORM)], 3.76)
        prev = cov.assign(np.ones(8, bool))
        active = np.ones(8, bool)
        for j in rng.permutation(8)[:7]:
            active[j] = False
            inc = cov.assign(active, base=prev)
            assert inc.same_as(cov.assign(active))
            prev = inc

    def test_parallel_equals_serial(self, rng):
        area = AreaSpec(4, 4)
        sites = [(0, Point(*rng.uniform(0, 4, 2))) for _ in range(10)]
        cov = Coverage(sites, build_grid(area, 30), [UserClass(0, 80, UNIFORM)], 3.76)
        active = rng.random(10) < 0.6
        active[0] = True
        assert cov.assign(active, workers=4).same_as(cov.assign(active, workers=None))


class TestExpectedPathLoss:
    def test_unit_square_eta_two(self):
        area = AreaSpec(1, 1)
        g = build_grid(area, 50)
        val = expected_path_loss_factor(np.arange(g.size), Point(0.5, 0.5), UNIFORM, 2.0, g)
        assert abs(val - 1 / 6) < 1e-4

    def test_unit_square_monte_carlo(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.5, 0.5, size=(1_000_000, 2))
        mc = np.mean(np.sum(pts ** 2, axis=1) ** (3.76 / 2))
        g = build_grid(AreaSpec(1, 1), 50)
        val = expected_path_loss_factor(np.arange(g.size), Point(0.5, 0.5), UNIFORM, 3.76, g)
        assert val == pytest.approx(mc, rel=5e-3)

    def test_literal_scales_with_cell_mass(self):
        area = AreaSpec(5, 5)
        g = build_grid(area, 20)
        cell = np.flatnonzero((g.x > 2) & (g.x < 3) & (g.y > 2) & (g.y < 3))
        site = Point(2.5, 2.5)
        cond = expected_path_loss_factor(cell, site, UNIFORM, 2.0, g, "conditional")
        lit = expected_path_loss_factor(cell, site, UNIFORM, 2.0, g, "literal")
        assert lit == pytest.approx(cond / 25, rel=1e-12)

    def test_conditional_invariant_to_area_rescaling(self):
        site = Point(0.5, 0.5)
        small = build_grid(AreaSpec(1, 1), 20)
        big = build_grid(AreaSpec(2, 2), 20)
        cell_big = np.flatnonzero((big.x < 1) & (big.y < 1))
        a = expected_path_loss_factor(np.arange(small.size), site, UNIFORM, 3.0, small)
        b = expected_path_loss_factor(cell_big, site, UNIFORM, 3.0, big)
        assert a == pytest.approx(b, rel=1e-12)

    def test_zero_mass_cell(self):
        area = AreaSpec(20, 20)
        g = build_grid(area, 2)
        far = UserDistribution("gaussian", Point(0, 0), 0.01)
        cell = np.flatnonzero((g.x > 19) & (g.y > 19))
        with pytest.raises(DegenerateCellError):
            expected_path_loss_factor(cell, Point(19.5, 19.5), far, 2.0, g, "conditional")


@st.composite
def layouts(draw):
    n = draw(st.integers(1, 7))
    coords = st.floats(0, 3, allow_nan=False)
    sites = [(draw(st.integers(0, 1)), Point(draw(coords), draw(coords))) for _ in range(n)]
    active = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    if not any(active):
        active[draw(st.integers(0, n - 1))] = True
    return sites, np.array(active)


class TestProperties:
    grid = build_grid(AreaSpec(3, 3), 8)
    classes = [UserClass(0, 37, UNIFORM), UserClass(1, 55, UserDistribution("gaussian", Point(1, 2), 0.7))]

    @settings(max_examples=60, deadline=None)
    @given(layouts())
    def test_partition_and_ceiling_slack(self, layout):
        sites, active = layout
        cov = Coverage(sites, self.grid, self.classes, 3.76, n_ops=2)
        a = cov.assign(active)
        total_mass = cov.weights.sum(axis=0)
        np.testing.assert_allclose(a.mass.sum(axis=0), total_mass, atol=1e-6)
        served = a.counts.sum(axis=0)
        floor = cov.totals * total_mass
        assert np.all(served >= floor - 1e-6)
        assert np.all(served <= floor + active.sum())
        assert np.all(a.counts[~active] == 0)

    @settings(max_examples=60, deadline=None)
    @given(layouts())
    def test_nearest_active_site(self, layout):
        sites, active = layout
        cov = Coverage(sites, self.grid, self.classes, 3.76, n_ops=2)
        a = cov.assign(active)
        d_own = cov.d2[np.arange(self.grid.size), a.labels]
        d_best = cov.d2[:, active].min(axis=1)
        np.testing.assert_array_equal(d_own, d_best)
        assert np.all(active[a.labels])

    @settings(max_examples=60, deadline=None)
    @given(layouts(), st.data())
    def test_switch_off_never_shrinks_cells(self, layout, data):
        sites, active = layout
        if active.sum() < 2:
            return
        cov = Coverage(sites, self.grid, self.classes, 3.76, n_ops=2)
        before = cov.assign(active)
        j = data.draw(st.sampled_from(list(np.flatnonzero(active))))
        after_active = active.copy()
        after_active[j] = False
        after = cov.assign(after_active)
        for k in np.flatnonzero(after_active):
            assert set(before.cell(k)) <= set(after.cell(k))

    def test_ceil_count_tolerates_float_noise(self):
        assert ceil_count(200, np.array([1 / 25]))[0] == 8
        assert ceil_count(10, np.array([0.0]))[0] == 0
        assert ceil_count(10, np.array([1e-6]))[0] == 1

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenshare.lp import LinearProgram, is_feasible, solve

from conftest import random_lp, vertex_oracle


class TestSmallPrograms:
    def test_textbook_optimum(self):
        out = solve(LinearProgram([1, 1], [[1, 0], [0, 1]], [1, 1]))
        assert out.optimal
        np.testing.assert_allclose(out.x, [1, 1])
        assert out.value == pytest.approx(2.0)

    def test_infeasible(self):
        out = solve(LinearProgram([1], [[1], [-1]], [1, -2]))
        assert out.status == "infeasible"

    def test_unbounded(self):
        out = solve(LinearProgram([1, 0], [[-1, 1]], [1]))
        assert out.status == "unbounded"

    def test_negative_lower_bounds(self):
        # max -x  with x in [-3, 4] -> x = -3
        out = solve(LinearProgram([-1], np.zeros((0, 1)), [], lower=[-3], upper=[4]))
        assert out.optimal
        assert out.x[0] == pytest.approx(-3.0)

    def test_negative_rhs_needs_phase_one(self):
        # x + y >= 2 written as -x - y <= -2, minimise x + 2y
        out = solve(LinearProgram([-1, -2], [[-1, -1]], [-2]))
        assert out.optimal
        np.testing.assert_allclose(out.x, [2, 0], atol=1e-12)

    def test_degenerate_cycling_example(self):
        # Beale's example cycles under the textbook rule; Bland's rule terminates
        c = np.array([0.75, -150, 0.02, -6])
        A = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
        b = np.array([0, 0, 1])
        out = solve(LinearProgram(c, A, b))
        assert out.optimal
        assert out.value == pytest.approx(0.05)

    def test_redundant_equalities(self):
        # x = 1 given twice as a pair of inequalities
        A = [[1], [-1], [1], [-1]]
        out = solve(LinearProgram([1], A, [1, -1, 1, -1]))
        assert out.optimal and out.x[0] == pytest.approx(1.0)

    def test_feasibility_helper(self):
        assert is_feasible([[1, 1]], [1])
        assert not is_feasible([[1, 1], [-1, -1]], [1, -2])

    def test_deterministic_vertex(self):
        # objective parallel to a facet: the same vertex comes back every time
        lp = LinearProgram([1, 1], [[1, 1]], [1])
        xs = {tuple(solve(lp).x) for _ in range(5)}
        assert len(xs) == 1

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            LinearProgram([1, 1], [[1, 1]], [1, 2])
        with pytest.raises(ValueError):
            LinearProgram([1], [[np.nan]], [1])
        with pytest.raises(ValueError):
            LinearProgram([1], [[1]], [1], lower=[2], upper=[1])


class TestAgainstOracles:
    def test_vertex_enumeration(self, rng):
        for _ in range(100):
            c, A, b, lo, up = random_lp(rng)
            expect = vertex_oracle(c, A, b, lo, up)
            out = solve(LinearProgram(c, A, b, lo, up))
            if expect is None:
                assert out.status == "infeasible"
            else:
                assert out.optimal
                assert out.value == pytest.approx(expect, abs=1e-6)

    def test_matches_highs(self, rng):
        linprog = pytest.importorskip("scipy.optimize").linprog
        agree = 0
        for _ in range(200):
            c, A, b, lo, up = random_lp(rng)
            ref = linprog(-c, A_ub=A, b_ub=b, bounds=list(zip(lo, up)), method="highs")
            out = solve(LinearProgram(c, A, b, lo, up))
            if ref.status == 0:
                assert out.optimal
                assert out.value == pytest.approx(-ref.fun, abs=1e-6)
            elif ref.status == 2:
                assert out.status == "infeasible"
            agree += 1
        assert agree == 200


@st.composite
def feasible_lps(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 6))
    vals = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
    c = np.array(draw(st.lists(vals, min_size=n, max_size=n)))
    A = np.array(draw(st.lists(vals, min_size=m * n, max_size=m * n))).reshape(m, n)
    x0 = np.array(draw(st.lists(st.floats(0, 3), min_size=n, max_size=n)))
    slack = np.array(draw(st.lists(st.floats(0, 2), min_size=m, max_size=m)))
    return c, A, A @ x0 + slack, x0


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(feasible_lps())
    def test_feasible_by_construction(self, lp):
        c, A, b, x0 = lp
        out = solve(LinearProgram(c, A, b, upper=np.full(c.size, 10.0)))
        assert out.optimal
        # returned point is feasible and at least as good as the witness
        assert np.all(A @ out.x <= b + 1e-7 * (1 + np.abs(b)))
        assert np.all(out.x >= -1e-9) and np.all(out.x <= 10 + 1e-9)
        assert out.value >= c @ x0 - 1e-7 * (1 + abs(c @ x0))

    @settings(max_examples=100, deadline=None)
    @given(feasible_lps(), st.floats(0.1, 10))
    def test_objective_scaling(self, lp, k):
        c, A, b, _ = lp
        up = np.full(c.size, 10.0)
        a = solve(LinearProgram(c, A, b, upper=up))
        s = solve(LinearProgram(k * c, A, b, upper=up))
        assert s.value == pytest.approx(k * a.value, rel=1e-7, abs=1e-7)

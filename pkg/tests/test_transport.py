import itertools

import numpy as np
import pytest

import otrom.transport as transport
from otrom.errors import NotConverged, ShapeMismatch, TooLarge
from otrom.measure import DiscreteMeasure, Grid
from otrom.transport import (
    CostMatrix,
    SinkhornOptions,
    build_cost_matrix,
    exact_lp,
    sinkhorn,
    transport_cost,
)


def cost_from_entries(entries):
    entries = np.asarray(entries, dtype=float)
    n, m = entries.shape
    return CostMatrix(entries=entries, p=2, src_coords=np.zeros((n, 2)),
                      dst_coords=np.zeros((m, 2)))


def random_instance(rng, grid, n, m):
    """Random positive weights on distinct cells of a grid."""
    cells = rng.choice(grid.n_cells, size=n + m, replace=False)
    mu = DiscreteMeasure(support=np.sort(cells[:n]),
                         weights=_normalized(rng.uniform(0.1, 1.0, n)), mass=1.0)
    nu = DiscreteMeasure(support=np.sort(cells[n:]),
                         weights=_normalized(rng.uniform(0.1, 1.0, m)), mass=1.0)
    return mu, nu


def _normalized(w):
    return w / w.sum()


class TestBuildCostMatrix:
    def test_single_atom_zero(self):
        g = Grid(nx=4, nz=1, hx=1.0, hz=1.0)
        mu = DiscreteMeasure(support=[2], weights=[1.0], mass=1.0)
        C = build_cost_matrix(mu, mu, g)
        np.testing.assert_array_equal(C.entries, [[0.0]])

    def test_squared_distance(self):
        g = Grid(nx=8, nz=1, hx=1.5, hz=1.0)
        mu = DiscreteMeasure(support=[0], weights=[1.0], mass=1.0)
        nu = DiscreteMeasure(support=[4], weights=[1.0], mass=1.0)
        C = build_cost_matrix(mu, nu, g, p=2)
        np.testing.assert_allclose(C.entries, [[36.0]])
        C1 = build_cost_matrix(mu, nu, g, p=1)
        np.testing.assert_allclose(C1.entries, [[6.0]])

    def test_two_by_two_unit_grid(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        mu = DiscreteMeasure(support=[0, 1], weights=[0.5, 0.5], mass=1.0)
        C = build_cost_matrix(mu, mu, g, p=2)
        np.testing.assert_allclose(C.entries, [[0.0, 1.0], [1.0, 0.0]])

    def test_invalid_exponent(self):
        g = Grid(nx=2, nz=1, hx=1.0, hz=1.0)
        mu = DiscreteMeasure(support=[0], weights=[1.0], mass=1.0)
        with pytest.raises(ValueError):
            build_cost_matrix(mu, mu, g, p=3)


class TestSinkhorn:
    def test_single_atom(self):
        P = sinkhorn([1.0], [1.0], cost_from_entries([[7.0]]))
        np.testing.assert_allclose(P.dense, [[1.0]], atol=1e-12)
        assert P.marginal_violation <= 1e-9

    def test_two_by_two_concentrates(self):
        C = cost_from_entries([[0.0, 1.0], [1.0, 0.0]])
        P = sinkhorn([0.5, 0.5], [0.5, 0.5], C, SinkhornOptions(epsilon=0.01))
        assert P.dense[0, 1] < 1e-3 and P.dense[1, 0] < 1e-3
        np.testing.assert_allclose(np.diag(P.dense), [0.5, 0.5], atol=1e-3)

    def test_two_by_two_matches_brute_force(self):
        # Feasible set is P(x) = [[x, .5-x], [.5-x, x]]; scan the scalar
        # objective <C,P> - eps*H(P) on a 1e-6 grid and compare entrywise.
        eps = 0.01
        C = np.array([[0.0, 1.0], [1.0, 0.0]])

        def objective(x):
            P = np.array([[x, 0.5 - x], [0.5 - x, x]])
            ent = -np.sum(np.where(P > 0, P * (np.log(P, where=P > 0) - 1.0), 0.0))
            return (P * C).sum() - eps * ent

        xs = np.arange(1e-9, 0.5, 1e-6)
        best_x = xs[np.argmin([objective(x) for x in xs])]
        oracle = np.array([[best_x, 0.5 - best_x], [0.5 - best_x, best_x]])
        P = sinkhorn([0.5, 0.5], [0.5, 0.5], cost_from_entries(C),
                     SinkhornOptions(epsilon=eps))
        np.testing.assert_allclose(P.dense, oracle, atol=2e-6)

    def test_three_atom_cost_matches_lp(self, rng):
        C = rng.uniform(0.0, 2.0, size=(3, 3))
        a = np.full(3, 1.0 / 3.0)
        opts = SinkhornOptions(epsilon=1e-3 * C.mean(), max_iters=2000)
        P = sinkhorn(a, a, cost_from_entries(C), opts)
        _, lp_cost = exact_lp(a, a, C)
        ent_cost = transport_cost(P, cost_from_entries(C))
        assert ent_cost <= lp_cost * 1.01 + 1e-12

    def test_feasibility_random_instances(self, rng):
        g = Grid(nx=16, nz=16, hx=1.0, hz=1.0)
        for _ in range(40):
            n, m = rng.integers(2, 33, size=2)
            mu, nu = random_instance(rng, g, int(n), int(m))
            C = build_cost_matrix(mu, nu, g)
            P = sinkhorn(mu.weights, nu.weights, C)
            assert P.marginal_violation <= 1e-9
            assert np.abs(P.row_marginals() - mu.weights).sum() <= 1e-9
            assert np.abs(P.col_marginals() - nu.weights).sum() <= 1e-9
            assert abs(P.total_mass() - 1.0) <= 1e-9

    def test_epsilon_monotonicity(self, rng):
        C = rng.uniform(0.5, 3.0, size=(6, 5))
        a = _normalized(rng.uniform(0.2, 1.0, 6))
        b = _normalized(rng.uniform(0.2, 1.0, 5))
        costs = []
        for scale in (1.0, 0.1, 0.01):
            opts = SinkhornOptions(epsilon=scale * C.mean(), max_iters=2000)
            P = sinkhorn(a, b, cost_from_entries(C), opts)
            costs.append(transport_cost(P, cost_from_entries(C)))
        assert costs[1] <= costs[0] + 1e-9
        assert costs[2] <= costs[1] + 1e-9

    def test_symmetry(self, rng):
        C = rng.uniform(0.1, 2.0, size=(4, 6))
        a = _normalized(rng.uniform(0.2, 1.0, 4))
        b = _normalized(rng.uniform(0.2, 1.0, 6))
        opts = SinkhornOptions(epsilon=0.05)
        P = sinkhorn(a, b, cost_from_entries(C), opts)
        Pt = sinkhorn(b, a, cost_from_entries(C.T), opts)
        np.testing.assert_allclose(P.dense, Pt.dense.T, atol=1e-9)

    def test_determinism(self, rng):
        C = rng.uniform(0.1, 2.0, size=(5, 5))
        a = _normalized(rng.uniform(0.2, 1.0, 5))
        opts = SinkhornOptions(epsilon=0.02)
        P1 = sinkhorn(a, a, cost_from_entries(C), opts)
        P2 = sinkhorn(a, a, cost_from_entries(C), opts)
        assert np.array_equal(P1.dense, P2.dense)
        assert P1.iterations == P2.iterations

    def test_not_converged_carries_best_plan(self):
        C = cost_from_entries([[0.0, 1.0], [1.0, 0.0]])
        opts = SinkhornOptions(epsilon=1e-6, max_iters=1,
                               eps_start_multiplier=1.0)
        with pytest.raises(NotConverged) as exc:
            sinkhorn([0.3, 0.7], [0.6, 0.4], C, opts)
        assert exc.value.plan is not None
        assert exc.value.violation > 1e-9

    def test_rejects_bad_weights(self):
        C = cost_from_entries([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            sinkhorn([0.0, 1.0], [0.5, 0.5], C)
        with pytest.raises(ValueError):
            sinkhorn([0.4, 0.4], [0.5, 0.5], C)
        with pytest.raises(ShapeMismatch):
            sinkhorn([1.0], [0.5, 0.5], C)

    def test_sparse_plan_path(self, rng, monkeypatch):
        monkeypatch.setattr(transport, "DENSE_CAP_ENTRIES", 8)
        C = rng.uniform(0.1, 2.0, size=(4, 4))
        a = _normalized(rng.uniform(0.2, 1.0, 4))
        P = sinkhorn(a, a, cost_from_entries(C), SinkhornOptions(epsilon=0.5))
        assert P.is_sparse
        assert P.marginal_violation <= 1e-9
        assert np.abs(P.row_marginals() - a).sum() <= 1e-9
        dense = P.to_dense()
        assert dense.shape == (4, 4)
        assert transport_cost(P, cost_from_entries(C)) >= 0


class TestTransportCost:
    def test_zero_cost(self):
        P = sinkhorn([1.0], [1.0], cost_from_entries([[0.0]]))
        assert transport_cost(P, cost_from_entries([[0.0]])) == 0.0

    def test_single_entry(self):
        P = sinkhorn([1.0], [1.0], cost_from_entries([[3.5]]))
        assert transport_cost(P, cost_from_entries([[3.5]])) == pytest.approx(3.5)

    def test_diagonal_plan(self):
        C = cost_from_entries([[0.0, 1.0], [1.0, 0.0]])
        P = sinkhorn([0.5, 0.5], [0.5, 0.5], C, SinkhornOptions(epsilon=0.005))
        assert transport_cost(P, C) == pytest.approx(0.0, abs=1e-6)

    def test_shape_mismatch(self):
        P = sinkhorn([1.0], [1.0], cost_from_entries([[1.0]]))
        with pytest.raises(ShapeMismatch):
            transport_cost(P, cost_from_entries([[0.0, 1.0]]))


class TestExactLp:
    def test_zero_cost_matching(self):
        plan, cost = exact_lp([0.5, 0.5], [0.5, 0.5], np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert cost == pytest.approx(0.0)
        np.testing.assert_allclose(plan, np.diag([0.5, 0.5]))

    def test_antidiagonal(self):
        plan, cost = exact_lp([0.5, 0.5], [0.5, 0.5], np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert cost == pytest.approx(0.0)
        np.testing.assert_allclose(plan, [[0.0, 0.5], [0.5, 0.0]])

    def test_nonuniform_marginals(self):
        # One-parameter family P = [[x, .7-x], [.4-x, x-.1]], x in [.1, .4];
        # cost 1.1 - 2x is minimized at x = .4.
        plan, cost = exact_lp([0.7, 0.3], [0.4, 0.6], np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert cost == pytest.approx(0.3)
        np.testing.assert_allclose(plan, [[0.4, 0.3], [0.0, 0.3]], atol=1e-10)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            exact_lp(np.full(9, 1 / 9), np.full(9, 1 / 9), np.zeros((9, 9)))

    def test_permutation_route_matches_lp_route(self, rng):
        # Uniform square instances solve via Birkhoff enumeration; the scipy
        # LP must agree when forced through perturbed-uniform marginals.
        for n in (2, 3, 4):
            C = rng.uniform(0.0, 5.0, size=(n, n))
            a = np.full(n, 1.0 / n)
            _, cost_perm = exact_lp(a, a, C)
            brute = min(
                sum(C[i, p[i]] for i in range(n)) / n
                for p in itertools.permutations(range(n))
            )
            assert cost_perm == pytest.approx(brute)
            eps_a = a + np.concatenate([[1e-13], np.zeros(n - 1)])
            eps_a = eps_a / eps_a.sum()
            _, cost_lp = exact_lp(eps_a, a, C)
            assert cost_lp == pytest.approx(cost_perm, abs=1e-9)

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_connected_graph, random_labels
from ilgraph.graph import InvalidParameterError, WeightGraph
from ilgraph.linalg import DisconnectedGraphError
from ilgraph.solver import (LabelAssignment, SolverConfig, choose_c, gl_solve,
                            il_solve, nonlocal_inf_metric, objective,
                            wnll_solve)


def four_node_graph():
    """Symmetric 4-node fixture; nodes 0, 1 labeled with 2 and 0."""
    w = np.array([
        [0.0, 1 / 3, 1 / 2, 0.0],
        [1 / 3, 0.0, 1 / 2, 1 / 2],
        [1 / 2, 1 / 2, 0.0, 0.0],
        [0.0, 1 / 2, 0.0, 0.0],
    ])
    graph = WeightGraph(sp.csr_matrix(w))
    labels = LabelAssignment([0, 1], [2.0, 0.0])
    return graph, labels


class TestObjective:
    def test_hand_value_alpha0(self):
        # row energies at u = (2, 0, 1, 0): row 0 carries
        # (1/3)*4 + (1/2)*1 = 11/6, the largest row
        graph, _ = four_node_graph()
        assert np.isclose(objective([2.0, 0.0, 1.0, 0.0], graph, 0.0), 11 / 6)

    def test_hand_value_alpha1(self):
        # double sum = 2 * (w01*4 + w02*1 + w12*1 + w13*0 + w23*1) = 14/3
        graph, _ = four_node_graph()
        assert np.isclose(objective([2.0, 0.0, 1.0, 0.0], graph, 1.0),
                          11 / 6 + 14 / 3)

    def test_row_subset(self):
        graph, _ = four_node_graph()
        full = objective([2.0, 0.0, 1.0, 0.0], graph, 0.0)
        sub = objective([2.0, 0.0, 1.0, 0.0], graph, 0.0, row_subset=[3])
        assert sub < full

    def test_metric_is_alpha0_objective(self):
        graph, _ = four_node_graph()
        u = [1.0, -1.0, 0.5, 0.0]
        assert np.isclose(nonlocal_inf_metric(u, graph),
                          objective(u, graph, 0.0))


class TestLabelAssignment:
    def test_rejects_duplicates(self):
        with pytest.raises(InvalidParameterError):
            LabelAssignment([0, 0], [1.0, 2.0])

    def test_rejects_empty(self):
        with pytest.raises(InvalidParameterError):
            LabelAssignment([], [])

    def test_rejects_nonfinite_values(self):
        with pytest.raises(InvalidParameterError):
            LabelAssignment([0], [np.inf])

    def test_unlabeled_complement(self):
        lab = LabelAssignment([1, 3], [0.0, 0.0])
        assert lab.unlabeled(5).tolist() == [0, 2, 4]


class TestBaselines:
    def test_gl_matches_dense_laplacian_solve(self):
        rng = np.random.default_rng(0)
        graph = random_connected_graph(25, rng)
        labels = random_labels(25, rng)
        u = gl_solve(graph, labels)
        # independent oracle: dense solve of the Laplacian system with
        # symmetrized coefficients nu_i w_ij + nu_j w_ji (nu = 1)
        w = graph.weights.toarray()
        B = w + w.T
        L = np.diag(B.sum(axis=1)) - B
        unl = labels.unlabeled(25)
        rhs = -L[np.ix_(unl, labels.indices)] @ labels.values
        x = np.linalg.solve(L[np.ix_(unl, unl)], rhs)
        assert np.allclose(u[unl], x, atol=1e-8)
        assert np.allclose(u[labels.indices], labels.values)

    def test_wnll_matches_dense_boosted_solve(self):
        rng = np.random.default_rng(1)
        n = 30
        graph = random_connected_graph(n, rng)
        labels = random_labels(n, rng, n_labels=4)
        u = wnll_solve(graph, labels)
        nu = np.ones(n)
        nu[labels.indices] = n / labels.count
        w = graph.weights.toarray() * nu[:, None]
        B = w + w.T
        L = np.diag(B.sum(axis=1)) - B
        unl = labels.unlabeled(n)
        rhs = -L[np.ix_(unl, labels.indices)] @ labels.values
        x = np.linalg.solve(L[np.ix_(unl, unl)], rhs)
        assert np.allclose(u[unl], x, atol=1e-8)

    def test_disconnected_raises(self):
        dense = np.zeros((4, 4))
        dense[0, 1] = dense[1, 0] = 1.0
        dense[2, 3] = dense[3, 2] = 1.0
        graph = WeightGraph(sp.csr_matrix(dense))
        with pytest.raises(DisconnectedGraphError):
            gl_solve(graph, LabelAssignment([0], [1.0]))


class TestChooseC:
    def test_first_iteration_ratio_near_quarter(self):
        from ilgraph.solver import (_nonlocal_gradient, _solve_u,
                                    _update_D_flat)
        rng = np.random.default_rng(2)
        graph = random_connected_graph(30, rng)
        labels = random_labels(30, rng)
        c = choose_c(graph, labels, alpha=0.0, eps=1e-4)
        u1, _ = _solve_u(np.ones(30), np.zeros(graph.weights.nnz), graph,
                        labels, lin_tol=1e-10)
        t1 = _nonlocal_gradient(u1, graph)
        d1 = _update_D_flat(u1, np.zeros_like(t1), np.full(30, c), graph, 0.0)
        ratio = np.sum((d1 - t1) ** 2) / np.sum(t1 * t1)
        assert abs(ratio - 0.25) <= 1e-4

    def test_constant_labels_warn_and_default(self):
        # all labels equal: the first pass is constant, T1 = 0
        rng = np.random.default_rng(3)
        graph = random_connected_graph(12, rng)
        labels = LabelAssignment([0, 5], [1.0, 1.0])
        with pytest.warns(UserWarning):
            c = choose_c(graph, labels, alpha=0.0)
        assert c == 1.0

    def test_alpha_seeds_initial_c(self):
        rng = np.random.default_rng(4)
        graph = random_connected_graph(12, rng)
        labels = LabelAssignment([0, 5], [1.0, 1.0])
        with pytest.warns(UserWarning):
            c = choose_c(graph, labels, alpha=0.5)
        assert c == 0.5


class TestILSolve:
    def test_four_node_reaches_hand_optimum(self):
        graph, labels = four_node_graph()
        u, diag = il_solve(graph, labels,
                           SolverConfig(alpha=0.0, primal_tol=1e-4))
        assert diag.objective <= 11 / 6 + 1e-6
        assert np.allclose(u[:2], [2.0, 0.0])

    def test_beats_baselines_on_objective(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            n = int(rng.integers(10, 40))
            graph = random_connected_graph(n, rng)
            labels = random_labels(n, rng)
            u_il, _ = il_solve(graph, labels, SolverConfig(alpha=0.0))
            f_il = objective(u_il, graph, 0.0)
            f_gl = objective(gl_solve(graph, labels), graph, 0.0)
            f_wn = objective(wnll_solve(graph, labels), graph, 0.0)
            assert f_il <= min(f_gl, f_wn) + 1e-8

    def test_history_and_best_iterate(self):
        rng = np.random.default_rng(7)
        graph = random_connected_graph(20, rng)
        labels = random_labels(20, rng)
        u, diag = il_solve(graph, labels, SolverConfig(alpha=0.0))
        assert diag.history.size == diag.iterations
        assert np.isclose(objective(u, graph, 0.0), diag.objective)
        assert diag.objective <= diag.history.min() + 1e-15

    def test_fixed_c_bypasses_adaptation(self):
        graph, labels = four_node_graph()
        _, diag = il_solve(graph, labels,
                           SolverConfig(alpha=0.0, fixed_c=0.7))
        assert diag.c_star == 0.7

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        graph = random_connected_graph(25, rng)
        labels = random_labels(25, rng)
        u1, d1 = il_solve(graph, labels, SolverConfig(alpha=1e-3))
        u2, d2 = il_solve(graph, labels, SolverConfig(alpha=1e-3))
        assert np.array_equal(u1, u2)
        assert d1.iterations == d2.iterations

    def test_maximum_principle(self):
        rng = np.random.default_rng(9)
        graph = random_connected_graph(30, rng)
        labels = random_labels(30, rng)
        lo, hi = labels.values.min(), labels.values.max()
        for u in (gl_solve(graph, labels), wnll_solve(graph, labels),
                  il_solve(graph, labels, SolverConfig())[0]):
            assert u.min() >= lo - 1e-6
            assert u.max() <= hi + 1e-6

    def test_rejects_negative_alpha(self):
        with pytest.raises(InvalidParameterError):
            SolverConfig(alpha=-1.0)

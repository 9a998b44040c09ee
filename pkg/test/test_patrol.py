""" Patrol-agent test cases for PythonDDRO """

import os
import tempfile
import unittest

import numpy as np

import pythonddro
from pythonddro.distributions import Ball, BallKind
from pythonddro.errors import DimensionMismatch, GraphFormatError, InfeasibleParam, SingularSystem
from pythonddro.patrol import (ROW_CAP, WEIGHT_FLOOR, Graph, HittingTimeCost, ReversibleChainParam,
                               build_transition_matrix, check_param, cvar_table, cycle_graph, grid_graph, hitting_times,
                               mean_hitting_time, mean_hitting_time_gradient, mean_std_table, patrol_ddro,
                               patrol_soc, random_connected_graph, read_graph, write_graph)
from pythonddro.verify import central_difference, gradients_agree

FIXTURE = os.path.join(os.path.dirname(__file__), "cycle5.txt")

def kemeny_times(matrix):
    """ Mean hitting time of every goal from the uniform start via the fundamental matrix """
    n = matrix.shape[0]
    fundamental = np.linalg.inv(np.eye(n) - matrix + np.ones((n, n)) / n)
    return n * np.diag(fundamental) - 1.0

class TestGraphs(unittest.TestCase):

    def test_read_fixture(self):
        graph = read_graph(FIXTURE)
        self.assertEqual(graph.n, 5)
        self.assertEqual(graph.edge_count, 5)
        self.assertTrue(graph.connected)
        np.testing.assert_array_equal(graph.degree, [2, 2, 2, 2, 2])

    def test_write_then_read(self):
        graph = grid_graph(2, 3)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "grid.txt")
            write_graph(graph, path)
            np.testing.assert_array_equal(read_graph(path).edges, graph.edges)

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as directory:
            for name, content in (("three.txt", "0 1 2\n"), ("letters.txt", "a b\n"),
                                  ("empty.txt", "# nothing\n"), ("loop.txt", "0 0\n"), ("negative.txt", "-1 2\n")):
                path = os.path.join(directory, name)
                with open(path, "w") as file:
                    file.write(content)
                with self.assertRaises(GraphFormatError):
                    read_graph(path)

    def test_generators(self):
        self.assertEqual(cycle_graph(6).edge_count, 6)
        grid = grid_graph(3, 4)
        self.assertEqual(grid.n, 12)
        self.assertEqual(grid.edge_count, 17)
        graph = random_connected_graph(10, 5, np.random.default_rng(0))
        self.assertTrue(graph.connected)
        self.assertEqual(graph.edge_count, 14)
        with self.assertRaises(ValueError):
            cycle_graph(1)

    def test_duplicate_edges_collapse(self):
        graph = Graph(3, [(0, 1), (1, 0), (1, 2)])
        self.assertEqual(graph.edge_count, 2)
        self.assertFalse(Graph(4, [(0, 1), (2, 3)]).connected)
        with self.assertRaises(GraphFormatError):
            Graph(3, [(0, 5)])

class TestTransitionMatrix(unittest.TestCase):

    def test_two_nodes(self):
        matrix = build_transition_matrix(Graph(2, [(0, 1)]), ReversibleChainParam(np.array([0.3])))
        np.testing.assert_allclose(matrix, [[0.7, 0.3], [0.3, 0.7]])

    def test_path(self):
        matrix = build_transition_matrix(Graph(3, [(0, 1), (1, 2)]), ReversibleChainParam(np.array([0.4, 0.5])))
        np.testing.assert_allclose(matrix, [[0.6, 0.4, 0.0], [0.4, 0.1, 0.5], [0.0, 0.5, 0.5]])

    def test_infeasible(self):
        graph = Graph(3, [(0, 1), (1, 2)])
        with self.assertRaises(InfeasibleParam):
            build_transition_matrix(graph, ReversibleChainParam(np.array([0.6, 0.5])))
        with self.assertRaises(InfeasibleParam):
            build_transition_matrix(graph, ReversibleChainParam(np.array([0.0, 0.5])))
        with self.assertRaises(DimensionMismatch):
            build_transition_matrix(graph, ReversibleChainParam(np.array([0.5])))

    def test_reversible_with_uniform_stationary(self):
        rng = np.random.default_rng(1)
        graph = random_connected_graph(9, 6, rng)
        model = HittingTimeCost(graph)
        matrix = model.matrix(model.project(rng.uniform(0.0, 1.0, graph.edge_count)))
        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_allclose(matrix.sum(axis = 1), np.ones(9))
        np.testing.assert_allclose(np.full(9, 1.0 / 9) @ matrix, np.full(9, 1.0 / 9))
        self.assertTrue(np.all(matrix >= 0.0))

    def test_projection_is_feasible(self):
        rng = np.random.default_rng(2)
        graph = random_connected_graph(12, 10, rng)
        model = HittingTimeCost(graph)
        for _ in range(20):
            x = model.project(rng.normal(0.3, 0.5, graph.edge_count))
            check_param(graph, ReversibleChainParam(x))
            self.assertTrue(np.all(x >= WEIGHT_FLOOR))
            np.testing.assert_allclose(model.project(x), x)

    def test_projection_is_euclidean(self):
        graph = cycle_graph(5)
        model = HittingTimeCost(graph)
        # edges are (0,1), (0,4), (1,2), (2,3), (3,4); only node 1 is over the cap
        projected = model.project(np.array([0.7, 0.1, 0.4, 0.1, 0.1]))
        np.testing.assert_allclose(projected, [0.65, 0.1, 0.35, 0.1, 0.1], atol = 1e-8)

        rng = np.random.default_rng(8)
        graph = random_connected_graph(10, 6, rng)
        model = HittingTimeCost(graph)
        for _ in range(20):
            target = rng.normal(0.4, 0.4, graph.edge_count)
            projected = model.project(target)
            check_param(graph, ReversibleChainParam(projected))
            for _ in range(20):
                other = rng.uniform(0.0, 1.0, graph.edge_count) / graph.max_degree
                other = np.clip(other * (1.0 - 1e-6), WEIGHT_FLOOR, None)
                self.assertLessEqual(float(np.dot(target - projected, other - projected)), 1e-8)

    def test_projection_reaches_the_vertex(self):
        model = HittingTimeCost(cycle_graph(5))
        np.testing.assert_allclose(model.project(np.full(5, 0.9)), np.full(5, ROW_CAP / 2.0), atol = 1e-12)
        inside = np.full(5, 0.3)
        np.testing.assert_array_equal(model.project(inside), inside)

class TestHittingTimes(unittest.TestCase):

    def test_two_nodes(self):
        graph = Graph(2, [(0, 1)])
        matrix = build_transition_matrix(graph, ReversibleChainParam(np.array([0.5])))
        np.testing.assert_allclose(hitting_times(matrix, 1), [2.0, 0.0])
        self.assertAlmostEqual(mean_hitting_time(graph, matrix, 1), 1.0)

        matrix = build_transition_matrix(graph, ReversibleChainParam(np.array([ROW_CAP])))
        self.assertAlmostEqual(mean_hitting_time(graph, matrix, 0), 0.5, places = 6)

        gradient = mean_hitting_time_gradient(graph, ReversibleChainParam(np.array([0.5])), 1)
        np.testing.assert_allclose(gradient, [-2.0])

    def test_disconnected_is_singular(self):
        matrix = np.eye(4)
        matrix[:2, :2] = [[0.5, 0.5], [0.5, 0.5]]
        with self.assertRaises(SingularSystem):
            hitting_times(matrix, 0)
        with self.assertRaises(GraphFormatError):
            HittingTimeCost(Graph(4, [(0, 1), (2, 3)]))

    def test_matches_the_fundamental_matrix(self):
        rng = np.random.default_rng(3)
        for n in (3, 6, 10):
            graph = random_connected_graph(n, n // 2, rng)
            model = HittingTimeCost(graph)
            x = model.project(rng.uniform(0.05, 0.4, graph.edge_count))
            np.testing.assert_allclose(model.costs(x), kemeny_times(model.matrix(x)), rtol = 1e-8)

    def test_symmetric_cycle_has_equal_costs(self):
        model = HittingTimeCost(cycle_graph(5))
        costs = model.costs(model.feasible_start())
        np.testing.assert_allclose(costs, np.full(5, costs[0]))

    def test_gradient_against_finite_differences(self):
        rng = np.random.default_rng(4)
        graph = random_connected_graph(6, 3, rng)
        model = HittingTimeCost(graph)
        x = rng.uniform(0.05, 0.9, graph.edge_count) / graph.max_degree
        values, jacobian = model.costs_and_jacobian(x)
        np.testing.assert_allclose(values, model.costs(x))
        for goal in range(graph.n):
            numeric = central_difference(lambda z: model.evaluate(z, goal), x)
            self.assertTrue(gradients_agree(jacobian[goal], numeric))
            np.testing.assert_allclose(model.gradient_x(x, goal), jacobian[goal])

    def test_convex_along_segments(self):
        rng = np.random.default_rng(5)
        graph = random_connected_graph(7, 4, rng)
        model = HittingTimeCost(graph)
        for _ in range(100):
            a = rng.uniform(0.02, 0.95, graph.edge_count) / graph.max_degree
            b = rng.uniform(0.02, 0.95, graph.edge_count) / graph.max_degree
            middle = model.costs(0.5 * (a + b))
            self.assertTrue(np.all(middle <= 0.5 * (model.costs(a) + model.costs(b)) + 1e-9))

class TestPatrolDesigns(unittest.TestCase):

    def test_cycle_matches_the_oracle(self):
        graph = read_graph(FIXTURE)
        ref = pythonddro.uniform_reference(5)
        result = patrol_ddro(graph, BallKind.DENSITY_RATIO, 1.0)
        self.assertTrue(result.report.converged)
        oracle = pythonddro.oracle_worst_expectation(result.report.costs, ref, Ball(BallKind.DENSITY_RATIO, 1.0, ref))
        self.assertAlmostEqual(result.report.objective, oracle, delta = 1e-4)
        self.assertEqual(set(result.summary.cvar), {0.0, 0.5, 0.75})
        self.assertAlmostEqual(result.summary.cvar[0.0], result.summary.mean)

    def test_small_radius_matches_the_expected_cost(self):
        graph = cycle_graph(5)
        soc = patrol_soc(graph)
        ddro = patrol_ddro(graph, BallKind.DENSITY_RATIO, 1e-6)
        self.assertAlmostEqual(ddro.summary.mean, soc.summary.mean, delta = 1e-4 * soc.summary.mean)
        self.assertTrue(soc.report.converged and ddro.report.converged)

    def test_cvar_design_beats_the_expected_cost_design(self):
        graph = random_connected_graph(8, 4, np.random.default_rng(7))
        soc = patrol_soc(graph, eval_betas = (0.75,))
        ddro = patrol_ddro(graph, BallKind.DENSITY_RATIO, pythonddro.radius_from_beta(0.75), eval_betas = (0.75,))
        self.assertLessEqual(ddro.summary.cvar[0.75], soc.summary.cvar[0.75] + 1e-6 * soc.summary.cvar[0.75])
        self.assertLessEqual(soc.summary.mean, ddro.summary.mean + 1e-6 * ddro.summary.mean)

    def test_each_design_is_best_at_its_own_level(self):
        graph = random_connected_graph(8, 4, np.random.default_rng(7))
        betas = [0.0, 0.5, 0.75]
        table = cvar_table(graph, betas[1:], betas)
        self.assertTrue(table["converged"].all())
        for beta in betas:
            column = table[table["beta_eval"] == beta]
            own = float(column.loc[column["beta_design"] == beta, "cvar"].iloc[0])
            self.assertLessEqual(own, float(column["cvar"].min()) + 1e-6 * own)

    def test_cvar_table(self):
        table = cvar_table(grid_graph(2, 2), [0.5], [0.0, 0.5], threads = 2)
        self.assertEqual(len(table), 4)
        self.assertEqual(list(table.columns), ["beta_design", "beta_eval", "cvar", "cvar_hat", "mean", "std", "worst", "converged"])
        self.assertEqual(sorted(set(table["beta_design"])), [0.0, 0.5])
        level_zero = table[table["beta_eval"] == 0.0]
        np.testing.assert_allclose(level_zero["cvar"], level_zero["mean"])

    def test_mean_std_table(self):
        table = mean_std_table(grid_graph(2, 2), [0.5], [0.0, 1.0], threads = 1)
        self.assertEqual(len(table), 4)
        level_zero = table[table["c_eval"] == 0.0]
        np.testing.assert_allclose(level_zero["objective"], level_zero["mean"])

if __name__ == '__main__':
    unittest.main()

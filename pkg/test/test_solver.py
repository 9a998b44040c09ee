""" Solver test cases for PythonDDRO """

import json
import unittest

import numpy as np

import pythonddro
from pythonddro.DDROSolver import CostModel, DDROSolver, QuadraticCostModel, SolverConfig
from pythonddro.distributions import Ball, BallKind
from pythonddro.errors import ModelGradientMismatch, NonPositiveRadius, NotConverged

class ConstantModel(CostModel):
    thread_safe = True

    @property
    def dimension(self):
        return 1

    @property
    def outcomes(self):
        return 3

    def evaluate(self, x, i):
        return 7.0

    def gradient_x(self, x, i):
        return np.zeros(1)

    def project(self, x):
        return np.clip(x, -1.0, 1.0)

    def feasible_start(self):
        return np.zeros(1)

class WrongGradientModel(QuadraticCostModel):
    def jacobian(self, x):
        return 3.0 * (np.asarray(x, dtype = float) - self.anchors)

class TestSolverConfig(unittest.TestCase):

    def test_defaults_come_from_presets(self):
        config = SolverConfig()
        self.assertEqual(config.barrier_weight, 0.1)
        self.assertEqual(config.barrier_rounds, 4)
        self.assertEqual(config.lambda_floor, 1e-10)
        np.testing.assert_allclose(config.barrier_schedule(), [0.1, 0.02, 0.004, 0.0008])

    def test_from_dict(self):
        self.assertEqual(SolverConfig.from_dict({"memory": 0}).memory, 0)
        with self.assertRaises(ValueError):
            SolverConfig.from_dict({"step": 1.0})
        with self.assertRaises(ValueError):
            SolverConfig.from_dict({"barrier_weight": -1.0})
        with self.assertRaises(ValueError):
            SolverConfig.from_dict({"armijo_shrink": 1.0})

class TestCostModels(unittest.TestCase):

    def test_gradient_check(self):
        QuadraticCostModel([[0.0, 1.0], [2.0, -1.0], [3.0, 3.0]]).check_gradient(np.array([0.3, -0.2]))
        with self.assertRaises(ModelGradientMismatch):
            WrongGradientModel([0.0, 1.0, 2.0]).check_gradient(np.array([0.5]))

    def test_quadratic_model(self):
        model = QuadraticCostModel([0.0, 1.0, 2.0, 3.0])
        self.assertEqual(model.dimension, 1)
        self.assertEqual(model.outcomes, 4)
        np.testing.assert_allclose(model.costs([1.5]), [2.25, 0.25, 0.25, 2.25])
        np.testing.assert_allclose(model.project([20.0]), [10.0])
        np.testing.assert_allclose(model.feasible_start(), [0.0])

class TestSolve(unittest.TestCase):

    def setUp(self):
        self.model = QuadraticCostModel([0.0, 1.0, 2.0, 3.0])
        self.ref = pythonddro.uniform_reference(4)
        self.solver = DDROSolver()

    def test_soc(self):
        report = self.solver.solve_soc(self.model, self.ref)
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.x_star[0], 1.5, places = 5)
        self.assertAlmostEqual(report.objective, 1.25, places = 8)
        self.assertIsNone(report.dual_star)

    def test_soc_degenerate_models(self):
        report = self.solver.solve_soc(ConstantModel(), None)
        self.assertAlmostEqual(report.objective, 7.0)
        report = self.solver.solve_soc(QuadraticCostModel([[2.0]]), pythonddro.uniform_reference(1))
        self.assertAlmostEqual(report.x_star[0], 2.0, places = 5)
        self.assertAlmostEqual(report.objective, 0.0, places = 8)

    def test_dr_toy(self):
        report = self.solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 1.0)
        self.assertAlmostEqual(report.x_star[0], 1.5, delta = 0.05)
        self.assertAlmostEqual(report.objective, 2.25, delta = 1e-3)
        self.assertEqual(report.kind, "dr")
        self.assertEqual(len(report.round_objectives), 4)

    def test_small_radius_matches_soc(self):
        report = self.solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 1e-6)
        self.assertAlmostEqual(report.objective, 1.25, delta = 1e-3)

    def test_l2_toy_matches_grid(self):
        report = self.solver.solve_ddro(self.model, self.ref, BallKind.WEIGHTED_L2, 0.5)
        grid = min(pythonddro.mean_std_objective(self.model.costs([x]), self.ref, 0.5) for x in np.arange(-1.0, 4.0, 1e-3))
        self.assertAlmostEqual(report.objective, grid, delta = 1e-3)
        self.assertTrue(report.smooth_conditions.holds)

    def test_objective_matches_the_oracle(self):
        model = QuadraticCostModel([0.0, 1.0, 2.0, 7.0])
        for kind, c in ((BallKind.DENSITY_RATIO, 1.0), (BallKind.WEIGHTED_L2, 0.5)):
            report = self.solver.solve_ddro(model, self.ref, kind, c)
            oracle = pythonddro.oracle_worst_expectation(model.costs(report.x_star), self.ref, Ball(kind, c, self.ref))
            self.assertAlmostEqual(report.objective, oracle, delta = 1e-4)

    def test_ddro_dominates_soc(self):
        model = QuadraticCostModel([0.0, 1.0, 2.0, 7.0])
        soc = self.solver.solve_soc(model, self.ref)
        ddro = self.solver.solve_ddro(model, self.ref, BallKind.DENSITY_RATIO, 1.0)
        soc_worst = pythonddro.worst_expectation_dr(model.costs(soc.x_star), self.ref, 1.0).value
        ddro_worst = pythonddro.worst_expectation_dr(model.costs(ddro.x_star), self.ref, 1.0).value
        self.assertLessEqual(ddro_worst, soc_worst + 1e-6)
        self.assertAlmostEqual(ddro.x_star[0], 3.5, delta = 0.05)

    def test_barrier_rounds_do_not_increase_the_objective(self):
        report = self.solver.solve_ddro(QuadraticCostModel([0.0, 1.0, 2.0, 7.0]), self.ref, BallKind.DENSITY_RATIO, 1.0)
        for a, b in zip(report.round_objectives, report.round_objectives[1:]):
            self.assertLessEqual(b, a + 1e-6 * max(1.0, abs(a)))

    def test_deterministic(self):
        first = self.solver.solve_ddro(self.model, self.ref, BallKind.WEIGHTED_L2, 0.5)
        second = DDROSolver().solve_ddro(self.model, self.ref, BallKind.WEIGHTED_L2, 0.5)
        self.assertEqual(first.history, second.history)
        self.assertEqual(first.to_json(), second.to_json())

    def test_strict_raises_not_converged(self):
        solver = DDROSolver(SolverConfig(max_iterations = 1, barrier_rounds = 1))
        with self.assertRaises(NotConverged) as raised:
            solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 1.0, strict = True)
        self.assertFalse(raised.exception.report.converged)
        self.assertFalse(solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 1.0).converged)

    def test_gradient_is_verified(self):
        with self.assertRaises(ModelGradientMismatch):
            self.solver.solve_ddro(WrongGradientModel([0.0, 1.0, 2.0, 3.0]), self.ref, BallKind.DENSITY_RATIO, 1.0)

    def test_bad_inputs(self):
        with self.assertRaises(NonPositiveRadius):
            self.solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 0.0)
        with self.assertRaises(ValueError):
            self.solver.solve_ddro(self.model, self.ref, BallKind.TOTAL_VARIATION, 1.0)

    def test_report_serialization(self):
        report = self.solver.solve_ddro(self.model, self.ref, BallKind.DENSITY_RATIO, 1.0)
        data = json.loads(report.to_json())
        self.assertEqual(data["kind"], "dr")
        self.assertEqual(len(data["dual_star"]["lambdas"]), 4)
        frame = report.history_frame()
        self.assertEqual(list(frame.columns), ["iteration", "round", "objective", "gradient_norm"])
        self.assertEqual(len(frame), report.iterations)

class TestMinimizeDuals(unittest.TestCase):

    def test_matches_the_worst_case(self):
        solver = DDROSolver()
        rng = np.random.default_rng(6)
        for k in range(20):
            m = int(rng.integers(3, 9))
            costs = rng.uniform(0.0, 10.0, m)
            ref = pythonddro.reference_distribution(rng.dirichlet(np.ones(m)) * 0.9 + 0.1 / m)
            c = (0.3, 0.7, 1.5)[k % 3]
            value, dual = solver.minimize_duals(BallKind.DENSITY_RATIO, costs, ref, c)
            self.assertAlmostEqual(value, pythonddro.worst_expectation_dr(costs, ref, c).value, delta = 1e-9)
            self.assertEqual(len(dual.lambdas), m)

    def test_l2_closed_form(self):
        value, dual = DDROSolver().minimize_duals(BallKind.WEIGHTED_L2, [1.0, 2.0, 3.0, 4.0], pythonddro.uniform_reference(4), 0.5)
        self.assertAlmostEqual(value, 3.059017, delta = 1e-6)
        self.assertAlmostEqual(dual.lam, 1.118034, delta = 1e-3)
        self.assertAlmostEqual(dual.nu, 2.5, delta = 1e-3)

class TestParetoSweep(unittest.TestCase):

    def setUp(self):
        self.model = QuadraticCostModel([0.0, 1.0, 2.0, 7.0])
        self.ref = pythonddro.uniform_reference(4)

    def test_monotone(self):
        points = pythonddro.pareto_sweep(self.model, self.ref, [1e-6, 0.1, 0.25, 0.5])
        self.assertEqual([p.c for p in points], [1e-6, 0.1, 0.25, 0.5])
        for a, b in zip(points, points[1:]):
            self.assertGreaterEqual(b.mean, a.mean - 1e-5)
            self.assertLessEqual(b.std, a.std + 1e-5)
        soc = DDROSolver().solve_soc(self.model, self.ref)
        self.assertAlmostEqual(points[0].mean, soc.objective, delta = 1e-4)

    def test_duplicates_and_threads(self):
        serial = pythonddro.pareto_sweep(self.model, self.ref, [0.5, 0.5], threads = 1)
        threaded = pythonddro.pareto_sweep(self.model, self.ref, [0.5, 0.5], threads = 2)
        self.assertEqual(serial[0].mean, serial[1].mean)
        self.assertEqual(serial[0].mean, threaded[1].mean)

    def test_validation(self):
        with self.assertRaises(ValueError):
            pythonddro.pareto_sweep(self.model, self.ref, [])
        with self.assertRaises(ValueError):
            pythonddro.pareto_sweep(self.model, self.ref, [1.0, 0.5])
        with self.assertRaises(NonPositiveRadius):
            pythonddro.pareto_sweep(self.model, self.ref, [0.0, 0.5])

    def test_errors_are_recorded(self):
        points = pythonddro.pareto_sweep(WrongGradientModel([0.0, 1.0]), pythonddro.uniform_reference(2), [0.5, 1.0])
        self.assertEqual(len(points), 2)
        self.assertTrue(all(p.error and not p.converged for p in points))

if __name__ == '__main__':
    unittest.main()

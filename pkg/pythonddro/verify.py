"""
Property suites run by `ddro verify`.

Each suite draws seeded random instances, checks one family of identities
and returns a SuiteResult; the first failing check ends its suite.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .DDROSolver import DDROSolver, QuadraticCostModel, SolverConfig
from .debug import Debug
from .distributions import Ball, BallKind, ball_contains, reference_distribution, sample_dirichlet, uniform_reference
from .duals import evaluate_dual
from .patrol import HittingTimeCost, ReversibleChainParam, build_transition_matrix, cvar_table, mean_hitting_time, mean_hitting_time_gradient, random_connected_graph
from .risk import cvar_hat, cvar_nonstrict, f_beta, mean_std_objective, value_at_risk, worst_c_average
from .worst_case import l2_condition, oracle_worst_expectation, worst_expectation_dr, worst_expectation_l2

FD_STEP = 1e-6
FD_TOLERANCE = 1e-5
RADII = (0.3, 0.7, 1.5)

@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    checks: int
    detail: str = ""

class VerificationFailure(Exception):
    pass

def expect(condition, message):
    if not condition:
        raise VerificationFailure(message)

def central_difference(function, point, step = FD_STEP) -> np.ndarray:
    point = np.array(point, dtype = float)
    gradient = np.zeros_like(point)
    for j in range(len(point)):
        shifted = point.copy()
        shifted[j] = point[j] + step
        upper = function(shifted)
        shifted[j] = point[j] - step
        lower = function(shifted)
        gradient[j] = (upper - lower) / (2.0 * step)
    return gradient

def gradients_agree(analytic, numeric, tolerance = FD_TOLERANCE) -> bool:
    return float(np.linalg.norm(analytic - numeric)) <= tolerance * max(float(np.linalg.norm(analytic)), 1.0)

def random_instance(rng, low = 3, high = 8):
    m = int(rng.integers(low, high + 1))
    return rng.uniform(0.0, 10.0, m), sample_dirichlet(rng, m, 1)[0] * 0.9 + 0.1 / m

class Verifier(object):
    def __init__(self, seed = 0, quick = False, corrupt_gradient = False):
        self.seed = seed
        self.quick = quick
        self.corrupt_gradient = corrupt_gradient
        self.solver = DDROSolver(SolverConfig(verify_gradient = False))

    def count(self, full, quick):
        return quick if self.quick else full

    def rng(self, offset):
        # every suite gets its own stream so selecting suites does not shift the draws
        return np.random.default_rng([self.seed, offset])

    def suites(self) -> List[tuple]:
        return [
            ("strong duality", self.strong_duality),
            ("cvar equivalence", self.cvar_equivalence),
            ("worst-c equivalence", self.worst_c_equivalence),
            ("mean-std equivalence", self.mean_std_equivalence),
            ("ball inclusion", self.ball_inclusion),
            ("gradient check", self.gradient_check),
            ("patrol pattern", self.patrol_pattern),
        ]

    def run(self, names: Optional[List[str]] = None) -> List[SuiteResult]:
        known = dict(self.suites())
        if names:
            unknown = [name for name in names if name not in known]
            if unknown:
                raise ValueError("unknown verification suites: {}. Valid suites include: ({})".format(
                    ", ".join(unknown), ", ".join(known)))
        selected = [(name, suite) for name, suite in self.suites() if not names or name in names]

        results = []
        for name, suite in selected:
            results.append(self.run_suite(name, suite))
            Debug.log_message(f"{name}: {'pass' if results[-1].passed else 'FAIL'} ({results[-1].checks} checks)")
        return results

    def run_suite(self, name, suite: Callable) -> SuiteResult:
        checks = [0]
        def check(condition, message):
            checks[0] += 1
            expect(condition, message)
        try:
            suite(check)
        except VerificationFailure as failure:
            return SuiteResult(name, False, checks[0], str(failure))
        return SuiteResult(name, True, checks[0])

    def strong_duality(self, check):
        rng = self.rng(1)
        for k in range(self.count(50, 10)):
            costs, ref = random_instance(rng)
            c = RADII[k % len(RADII)]

            dr_value = self.solver.minimize_duals(BallKind.DENSITY_RATIO, costs, ref, c)[0]
            dr_oracle = oracle_worst_expectation(costs, ref, self.ball(BallKind.DENSITY_RATIO, c, ref))
            check(abs(dr_value - dr_oracle) <= 1e-9, f"dr dual infimum {dr_value!r} differs from the oracle {dr_oracle!r} (instance {k})")

            l2_value = self.solver.minimize_duals(BallKind.WEIGHTED_L2, costs, ref, c)[0]
            l2_oracle = oracle_worst_expectation(costs, ref, self.ball(BallKind.WEIGHTED_L2, c, ref), np.random.default_rng([self.seed, 1, k]))
            check(abs(l2_value - l2_oracle) <= 1e-4, f"l2 dual infimum {l2_value!r} differs from the oracle {l2_oracle!r} (instance {k})")

    def ball(self, kind, c, ref):
        return Ball(kind, c, reference_distribution(ref))

    def cvar_equivalence(self, check):
        rng = self.rng(2)
        for k in range(self.count(500, 100)):
            m = int(rng.integers(2, 11))
            # integer costs make ties and atoms at VaR common
            costs = rng.integers(0, 6, m).astype(float)
            ref = sample_dirichlet(rng, m, 1)[0] * 0.9 + 0.1 / m
            exact_tail = k % 2 == 1 and len(np.unique(costs)) > 1
            if exact_tail:
                # place beta on a jump of the cost distribution so P[J > VaR] = 1 - beta
                threshold = float(rng.choice(np.unique(costs)[:-1]))
                beta = float(np.sum(ref[costs <= threshold]))
                c = beta / (1.0 - beta)
            else:
                c = float(rng.uniform(0.05, 4.0))
                beta = c / (1.0 + c)

            value = worst_expectation_dr(costs, ref, c).value
            var = value_at_risk(costs, ref, beta)
            check(abs(value - f_beta(costs, ref, beta, var)) <= 1e-9, f"worst case {value!r} differs from F_beta at VaR (instance {k})")
            check(cvar_nonstrict(costs, ref, beta) - 1e-9 <= value <= cvar_hat(costs, ref, beta) + 1e-9,
                  f"worst case {value!r} lies outside [cvar, cvar_hat] (instance {k})")
            if exact_tail:
                check(abs(value - cvar_hat(costs, ref, beta)) <= 1e-9, f"worst case {value!r} differs from cvar_hat (instance {k})")

    def worst_c_equivalence(self, check):
        rng = self.rng(3)
        for m in (4, 6, 8, 10):
            ref = uniform_reference(m)
            for count in range(1, m):
                c = m / count - 1.0
                for k in range(self.count(100, 20)):
                    costs = rng.uniform(0.0, 10.0, m)
                    value = worst_expectation_dr(costs, ref, c).value
                    expected = worst_c_average(costs, count)
                    check(abs(value - expected) <= 1e-9, f"m={m}, C={count}: worst case {value!r} differs from the worst-C average {expected!r}")

    def mean_std_equivalence(self, check):
        rng = self.rng(4)
        checked = 0
        while checked < self.count(200, 50):
            costs, ref = random_instance(rng)
            c = float(rng.uniform(0.05, 1.0))
            if not l2_condition(costs, ref, c).holds:
                continue
            checked += 1
            mean = float(np.dot(ref, costs))
            std = float(np.sqrt(np.dot(ref, (costs - mean) ** 2)))
            value = worst_expectation_l2(costs, ref, c).value
            check(abs(value - (mean + c * std)) <= 1e-6, f"l2 worst case {value!r} differs from mean + c*std {mean + c * std!r}")

        if self.quick:
            return
        anchors = [0.0, 1.0, 2.0, 7.0]
        model = QuadraticCostModel(anchors)
        ref = uniform_reference(len(anchors))
        report = self.solver.solve_ddro(model, ref, BallKind.WEIGHTED_L2, 0.5)
        grid = np.arange(-1.0, 8.0, 1e-3)
        best = min(mean_std_objective(model.costs([x]), ref, 0.5) for x in grid)
        check(abs(report.objective - best) <= 1e-3, f"toy l2 solve {report.objective!r} differs from the grid minimum {best!r}")

    def ball_inclusion(self, check):
        rng = self.rng(5)
        for m in (2, 4, 8):
            ref = uniform_reference(m)
            for c in (0.25, 0.5, 1.0, 2.0):
                l2 = Ball(BallKind.WEIGHTED_L2, c, ref)
                dr = Ball(BallKind.DENSITY_RATIO, c, ref)
                tv = Ball(BallKind.TOTAL_VARIATION, c, ref)
                for p in sample_dirichlet(rng, m, self.count(1000, 200)):
                    if ball_contains(l2, p):
                        check(ball_contains(tv, p), f"m={m}, c={c}: {p.tolist()} is in the l2 ball but not the tv ball")
                    if c >= 1.0 and ball_contains(dr, p):
                        check(ball_contains(l2, p) and ball_contains(tv, p), f"m={m}, c={c}: {p.tolist()} is in the dr ball but not in l2 and tv")

    def gradient_check(self, check):
        rng = self.rng(6)
        corruption = 1.01 if self.corrupt_gradient else 1.0

        for k in range(self.count(100, 20)):
            m = int(rng.integers(3, 9))
            costs = rng.uniform(0.0, 3.0, m)
            weights = sample_dirichlet(rng, m, 1)[0] * 0.9 + 0.1 / m
            c = float(rng.uniform(0.2, 2.0))
            nu = float(rng.uniform(0.5, 2.5))

            lam = float(rng.uniform(0.3, 2.0))
            evaluation = evaluate_dual(BallKind.WEIGHTED_L2, costs, weights, c, [lam], nu)
            analytic = np.concatenate([evaluation.grad_duals(), evaluation.grad_costs]) * corruption
            numeric = central_difference(lambda z: evaluate_dual(BallKind.WEIGHTED_L2, z[2:], weights, c, z[:1], z[1]).value,
                                         np.concatenate([[lam, nu], costs]))
            check(gradients_agree(analytic, numeric), f"l2 dual gradient mismatch at instance {k}")

            lambdas = rng.uniform(0.5, 2.0, m)
            evaluation = evaluate_dual(BallKind.DENSITY_RATIO, costs, weights, c, lambdas, nu)
            analytic = np.concatenate([evaluation.grad_duals(), evaluation.grad_costs]) * corruption
            numeric = central_difference(lambda z: evaluate_dual(BallKind.DENSITY_RATIO, z[m + 1:], weights, c, z[:m], z[m]).value,
                                         np.concatenate([lambdas, [nu], costs]))
            check(gradients_agree(analytic, numeric), f"dr dual gradient mismatch at instance {k}")

        graph = random_connected_graph(6, 4, rng)
        for k in range(self.count(100, 20)):
            weights = rng.uniform(0.05, 0.9, graph.edge_count) / graph.max_degree
            goal = int(rng.integers(0, graph.n))
            analytic = mean_hitting_time_gradient(graph, ReversibleChainParam(weights), goal) * corruption
            numeric = central_difference(
                lambda w: mean_hitting_time(graph, build_transition_matrix(graph, ReversibleChainParam(w)), goal), weights)
            check(gradients_agree(analytic, numeric), f"hitting-time gradient mismatch at instance {k}, goal {goal}")

    def patrol_pattern(self, check):
        rng = self.rng(7)
        nodes = 8 if self.quick else 20
        graph = random_connected_graph(nodes, nodes // 2, rng)
        config = SolverConfig(verify_gradient = False)
        slack = 1e-6
        betas = (0.0, 0.5, 0.75)

        table = cvar_table(graph, betas[1:], betas, config)
        for beta in betas:
            column = table[table["beta_eval"] == beta]
            own = float(column.loc[column["beta_design"] == beta, "cvar"].iloc[0])
            best = float(column["cvar"].min())
            check(own <= best + slack * max(1.0, abs(best)),
                  f"{beta:g}-cvar of the beta={beta:g} design {own!r} exceeds the best design's {best!r}")

        points = self.solver.pareto_sweep(HittingTimeCost(graph), uniform_reference(graph.n), [1e-6, 0.25, 0.5, 1.0, 1.5])
        for a, b in zip(points, points[1:]):
            check(b.mean >= a.mean - slack * max(1.0, a.mean), f"pareto mean decreases from c={a.c} to c={b.c}")
            check(b.std <= a.std + slack * max(1.0, a.std), f"pareto std increases from c={a.c} to c={b.c}")

def run_suites(seed = 0, quick = False, corrupt_gradient = False, names = None) -> List[SuiteResult]:
    return Verifier(seed, quick, corrupt_gradient).run(names)

def first_failure(results: List[SuiteResult]) -> Optional[SuiteResult]:
    return next((result for result in results if not result.passed), None)

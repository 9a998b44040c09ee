"""
Outer minimization of the DDRO problem.

The decision x and the dual multipliers are optimized jointly: for a fixed x
the infimum of the dual objective over (lambda, nu) is the worst-case
expectation, so the min-max collapses into one smooth program. A log-barrier
keeps the multipliers positive and is relaxed over a few continuation rounds.
"""

import json
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from .debug import Debug
from .distributions import BallKind
from .duals import DualPoint, DualPointDR, DualPointL2, dual_point, evaluate_dual
from .errors import DDROError, ModelGradientMismatch, NonPositiveRadius, NotConverged, OverflowGuard, SingularSystem
from .presets import solver_defaults
from .risk import cost_and_weights
from .utils import ArrayUtils, EnvUtils
from .worst_case import SmoothConditions, as_reference, check_radius, l2_condition

GRADIENT_STEP = 1e-6
GRADIENT_TOLERANCE = 1e-4
MAX_BACKTRACKS = 60
QUASI_NEWTON_BACKTRACKS = 20

@dataclass(frozen=True)
class SolverConfig:
    barrier_weight: float = solver_defaults["barrier_weight"]
    barrier_decay: float = solver_defaults["barrier_decay"]
    barrier_rounds: int = solver_defaults["barrier_rounds"]
    max_iterations: int = solver_defaults["max_iterations"]
    gradient_tolerance: float = solver_defaults["gradient_tolerance"]
    armijo_shrink: float = solver_defaults["armijo_shrink"]
    armijo_slope: float = solver_defaults["armijo_slope"]
    lambda_floor: float = solver_defaults["lambda_floor"]
    memory: int = solver_defaults["memory"]
    verify_gradient: bool = solver_defaults["verify_gradient"]

    def __post_init__(self):
        for name in ("barrier_weight", "barrier_decay", "gradient_tolerance", "armijo_slope", "lambda_floor"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"solver setting {name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError(f"solver setting armijo_shrink must lie in (0, 1), got {self.armijo_shrink!r}")
        if self.barrier_rounds < 1 or self.max_iterations < 1:
            raise ValueError("solver settings barrier_rounds and max_iterations must be at least 1")
        if self.memory < 0:
            raise ValueError(f"solver setting memory must be non-negative, got {self.memory!r}")

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SolverConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError("unknown solver settings: {}".format(", ".join(unknown)))
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def barrier_schedule(self) -> List[float]:
        return [self.barrier_weight * self.barrier_decay ** k for k in range(self.barrier_rounds)]

@dataclass(eq=False)
class SolveReport:
    kind: str
    radius: Optional[float]
    x_star: np.ndarray
    dual_star: Optional[DualPoint]
    objective: float
    iterations: int
    converged: bool
    history: List[dict] = field(default_factory=list)
    round_objectives: List[float] = field(default_factory=list)
    smooth_conditions: Optional[SmoothConditions] = None
    costs: Optional[np.ndarray] = None

    @property
    def objective_history(self) -> List[float]:
        return [entry["objective"] for entry in self.history]

    def mean_std(self, ref):
        return ArrayUtils.mean_std(*cost_and_weights(self.costs, ref)) if self.costs is not None else (np.nan, np.nan)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "radius": self.radius,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "objective": float(self.objective),
            "x_star": [float(v) for v in self.x_star],
            "dual_star": self.dual_star.to_dict() if self.dual_star is not None else None,
            "round_objectives": [float(v) for v in self.round_objectives],
            "smooth_conditions": asdict(self.smooth_conditions) if self.smooth_conditions is not None else None,
            "costs": [float(v) for v in self.costs] if self.costs is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent = 4)

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns = ["iteration", "round", "objective", "gradient_norm"])

    def write_history(self, path):
        self.history_frame().to_csv(path, index = False, float_format = "%.17g")

@dataclass(frozen=True, eq=False)
class ParetoPoint:
    c: float
    mean: float
    std: float
    objective: float
    converged: bool
    x_star: Optional[np.ndarray]
    error: Optional[str] = None

class CostModel(ABC):
    """
    J(x, i) for decisions x in a convex feasible set and outcomes i = 0..m-1.

    Subclasses supply the scalar evaluation, its x-gradient, the projection
    onto the feasible set and an interior starting point. costs() and
    jacobian() loop over outcomes and may be overridden with vectorized forms.
    """
    # set when evaluate/gradient_x are safe for concurrent read-only use
    thread_safe = False

    @property
    @abstractmethod
    def dimension(self) -> int:
        pass

    @property
    @abstractmethod
    def outcomes(self) -> int:
        pass

    @abstractmethod
    def evaluate(self, x, i) -> float:
        pass

    @abstractmethod
    def gradient_x(self, x, i) -> np.ndarray:
        pass

    @abstractmethod
    def project(self, x) -> np.ndarray:
        pass

    @abstractmethod
    def feasible_start(self) -> np.ndarray:
        pass

    def costs(self, x) -> np.ndarray:
        return np.array([self.evaluate(x, i) for i in range(self.outcomes)], dtype = float)

    def jacobian(self, x) -> np.ndarray:
        return np.array([self.gradient_x(x, i) for i in range(self.outcomes)], dtype = float).reshape(self.outcomes, self.dimension)

    def costs_and_jacobian(self, x):
        return self.costs(x), self.jacobian(x)

    def check_gradient(self, x = None, step = GRADIENT_STEP, tolerance = GRADIENT_TOLERANCE):
        """ Compare the analytic jacobian against central differences; raises ModelGradientMismatch """
        x = np.array(self.feasible_start() if x is None else x, dtype = float)
        analytic = self.jacobian(x)
        numeric = np.zeros_like(analytic)

        for j in range(self.dimension):
            shifted = x.copy()
            shifted[j] = x[j] + step
            upper = self.costs(shifted)
            shifted[j] = x[j] - step
            lower = self.costs(shifted)
            numeric[:, j] = (upper - lower) / (2.0 * step)

        for i in range(self.outcomes):
            error = float(np.linalg.norm(analytic[i] - numeric[i]))
            scale = max(float(np.linalg.norm(numeric[i])), 1.0)
            if error > tolerance * scale:
                raise ModelGradientMismatch(
                    f"gradient check failed for outcome {i}: analytic and finite-difference gradients differ by {error:.3e}")

class QuadraticCostModel(CostModel):
    """ J(x, i) = ||x - a_i||^2 over a box """
    thread_safe = True

    def __init__(self, anchors, lower = -10.0, upper = 10.0):
        anchors = np.array(anchors, dtype = float)
        if anchors.ndim == 1:
            anchors = anchors.reshape(-1, 1)
        if anchors.size == 0 or not np.all(np.isfinite(anchors)):
            raise ValueError("anchors must be a non-empty array of finite values")
        if not lower < upper:
            raise ValueError(f"box bounds must satisfy lower < upper, got [{lower}, {upper}]")

        self.anchors = anchors
        self.lower = float(lower)
        self.upper = float(upper)

    @property
    def dimension(self) -> int:
        return self.anchors.shape[1]

    @property
    def outcomes(self) -> int:
        return self.anchors.shape[0]

    def evaluate(self, x, i) -> float:
        difference = np.asarray(x, dtype = float) - self.anchors[i]
        return float(np.dot(difference, difference))

    def gradient_x(self, x, i) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype = float) - self.anchors[i])

    def costs(self, x) -> np.ndarray:
        return np.sum((np.asarray(x, dtype = float) - self.anchors) ** 2, axis = 1)

    def jacobian(self, x) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype = float) - self.anchors)

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype = float), self.lower, self.upper)

    def feasible_start(self) -> np.ndarray:
        return np.full(self.dimension, 0.5 * (self.lower + self.upper))

class _Problem:
    """ Barrier-smoothed objective over z = (x, lambdas, nu), or z = x for the expected cost """

    def __init__(self, model: CostModel, weights, kind: Optional[BallKind], c, config: SolverConfig):
        self.model = model
        self.weights = weights
        self.kind = kind
        self.c = c
        self.config = config
        self.d = model.dimension
        self.duals = 0 if kind is None else (1 if kind is BallKind.WEIGHTED_L2 else model.outcomes)
        self.barrier = 0.0

    def split(self, z):
        return z[:self.d], z[self.d:self.d + self.duals], (z[-1] if self.duals else None)

    def project(self, z):
        projected = np.empty_like(z)
        projected[:self.d] = self.model.project(z[:self.d])
        if self.duals:
            projected[self.d:self.d + self.duals] = np.maximum(z[self.d:self.d + self.duals], self.config.lambda_floor)
            projected[-1] = z[-1]
        return projected

    def dual_value(self, costs, lambdas, nu) -> float:
        return evaluate_dual(self.kind, costs, self.weights, self.c, lambdas, nu).value

    def value(self, z) -> float:
        x, lambdas, nu = self.split(z)
        costs = self.model.costs(x)
        if self.kind is None:
            return float(np.dot(self.weights, costs))
        return self.dual_value(costs, lambdas, nu) - self.barrier * float(np.sum(np.log(lambdas)))

    def value_and_gradient(self, z):
        x, lambdas, nu = self.split(z)
        costs, jacobian = self.model.costs_and_jacobian(x)
        if self.kind is None:
            return float(np.dot(self.weights, costs)), jacobian.T @ self.weights

        evaluation = evaluate_dual(self.kind, costs, self.weights, self.c, lambdas, nu)
        value = evaluation.value - self.barrier * float(np.sum(np.log(lambdas)))
        gradient = np.concatenate([
            jacobian.T @ evaluation.grad_costs,
            evaluation.grad_lambdas - self.barrier / lambdas,
            [evaluation.grad_nu]])
        return value, gradient

class DDROSolver(object):
    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config if config is not None else SolverConfig()

    def solve_ddro(self, model: CostModel, ref, kind, c, strict = False) -> SolveReport:
        kind = BallKind.parse(kind)
        if kind is BallKind.TOTAL_VARIATION:
            raise ValueError("the total variation ball has no smooth dual objective; use the l2 or dr ball")
        c = check_radius(c)
        weights = self._weights(model, ref)

        x0 = model.project(np.asarray(model.feasible_start(), dtype = float))
        if self.config.verify_gradient:
            model.check_gradient(x0)

        costs0 = model.costs(x0)
        nu0 = float(np.dot(weights, costs0))
        # lambda = 1 unless the first dual exponent would already be near the guard
        lambda0 = max(1.0, float(np.max(costs0) - nu0) / 100.0)
        problem = _Problem(model, weights, kind, c, self.config)
        z = np.concatenate([x0, np.full(problem.duals, lambda0), [nu0]])

        history, round_objectives = [], []
        converged = False
        for round_index, barrier in enumerate(self.config.barrier_schedule()):
            problem.barrier = barrier
            z, converged = self._descend(problem, z, round_index, history)
            x, lambdas, nu = problem.split(z)
            round_objectives.append(problem.dual_value(model.costs(x), lambdas, nu))
            Debug.log_message(f"{kind.value} ball, c={c:g}: barrier round {round_index + 1} (weight {barrier:.3g}) "
                              f"ended at {round_objectives[-1]:.10g}, converged={converged}")

        x_star, lambdas, nu = problem.split(z)
        costs = model.costs(x_star)
        objective, dual = self._best_dual(kind, costs, weights, c, problem.dual_value(costs, lambdas, nu), dual_point(kind, lambdas, nu))

        report = SolveReport(
            kind = kind.value,
            radius = c,
            x_star = x_star.copy(),
            dual_star = dual,
            objective = objective,
            iterations = len(history),
            converged = converged,
            history = history,
            round_objectives = round_objectives,
            smooth_conditions = l2_condition(costs, weights, c) if kind is BallKind.WEIGHTED_L2 else None,
            costs = costs)
        return self._finish(report, strict)

    def solve_soc(self, model: CostModel, ref, strict = False) -> SolveReport:
        weights = self._weights(model, ref)
        x0 = model.project(np.asarray(model.feasible_start(), dtype = float))
        if self.config.verify_gradient:
            model.check_gradient(x0)

        problem = _Problem(model, weights, None, None, self.config)
        history = []
        x_star, converged = self._descend(problem, x0, 0, history)
        costs = model.costs(x_star)
        objective = float(np.dot(weights, costs))

        report = SolveReport("soc", None, x_star.copy(), None, objective, len(history), converged,
                             history, [objective], None, costs)
        return self._finish(report, strict)

    def pareto_sweep(self, model: CostModel, ref, c_list, kind = BallKind.WEIGHTED_L2, threads = None) -> List[ParetoPoint]:
        c_list = [float(c) for c in c_list]
        if not c_list:
            raise ValueError("the radius list must not be empty")
        for c in c_list:
            if not c > 0.0:
                raise NonPositiveRadius(f"radius must be positive, got {c!r}")
        if any(b < a for a, b in zip(c_list, c_list[1:])):
            raise ValueError("the radius list must be sorted ascending")

        weights = self._weights(model, ref)
        workers = min(EnvUtils.thread_count(threads), len(c_list)) if model.thread_safe else 1

        def solve_point(c):
            try:
                report = self.solve_ddro(model, weights, kind, c)
            except DDROError as error:
                Debug.log_warning(f"pareto point c={c:g} failed: {error}")
                return ParetoPoint(c, np.nan, np.nan, np.nan, False, None, str(error))
            mean, std = report.mean_std(weights)
            return ParetoPoint(c, mean, std, report.objective, report.converged, report.x_star)

        if workers > 1:
            with ThreadPoolExecutor(max_workers = workers) as pool:
                return list(pool.map(solve_point, c_list))
        return [solve_point(c) for c in c_list]

    def minimize_duals(self, kind, costs, ref, c):
        """ Exact infimum of the dual objective over the multipliers at fixed costs; returns (value, DualPoint) """
        kind = BallKind.parse(kind)
        costs, weights = cost_and_weights(costs, ref)
        c = check_radius(c)
        floor = self.config.lambda_floor

        if kind is BallKind.DENSITY_RATIO:
            best = None
            for nu in np.unique(costs):
                lambdas = np.maximum(costs - nu, floor)
                try:
                    value = evaluate_dual(kind, costs, weights, c, lambdas, nu).value
                except OverflowGuard:
                    continue
                if best is None or value < best[0]:
                    best = (value, DualPointDR(lambdas, float(nu)))
            return best

        if kind is not BallKind.WEIGHTED_L2:
            raise ValueError(f"no smooth dual objective is defined for the {kind.value} ball")

        low, high = float(np.min(costs)), float(np.max(costs))
        if high - low <= 0.0:
            return evaluate_dual(kind, costs, weights, c, [floor], low).value, DualPointL2(floor, low)

        def best_nu(lam):
            def slope(nu):
                return evaluate_dual(kind, costs, weights, c, [lam], nu).grad_nu
            if slope(low) >= 0.0:
                return low
            if slope(high) <= 0.0:
                return high
            return brentq(slope, low, high, xtol = 1e-14, rtol = 4 * np.finfo(float).eps)

        def profile(log_lam):
            lam = float(np.exp(log_lam))
            return evaluate_dual(kind, costs, weights, c, [lam], best_nu(lam)).value

        log_high = float(np.log(10.0 * (high - low) / c + 1.0))
        result = minimize_scalar(profile, bounds = (np.log(1e-12), log_high), method = "bounded", options = {"xatol": 1e-12})
        lam = float(np.exp(result.x))
        nu = float(best_nu(lam))
        return evaluate_dual(kind, costs, weights, c, [lam], nu).value, DualPointL2(lam, nu)

    def _weights(self, model: CostModel, ref) -> np.ndarray:
        if ref is None:
            return np.full(model.outcomes, 1.0 / model.outcomes)
        weights = as_reference(ref).mass
        ArrayUtils.check_length(weights, model.outcomes, "reference")
        return weights

    def _best_dual(self, kind, costs, weights, c, iterate_value, iterate_dual):
        polished_value, polished_dual = self.minimize_duals(kind, costs, weights, c)
        if polished_value <= iterate_value:
            return float(polished_value), polished_dual
        return float(iterate_value), iterate_dual

    def _finish(self, report: SolveReport, strict) -> SolveReport:
        if not report.converged:
            message = f"{report.kind} solve stopped after {report.iterations} iterations without meeting the gradient tolerance"
            if strict:
                raise NotConverged(message, report)
            Debug.log_warning(message)
        return report

    def _descend(self, problem: _Problem, z, round_index, history):
        """
        Projected L-BFGS with Armijo backtracking along the projected path.
        The quasi-Newton model is built from the gradient mapping
        z - P(z - gradient), so coordinates held on the boundary of the
        feasible set drop out of it.
        """
        config = self.config
        z = problem.project(np.asarray(z, dtype = float))
        value, gradient = problem.value_and_gradient(z)
        mapped = z - problem.project(z - gradient)
        pairs = []

        for _ in range(config.max_iterations):
            gradient_norm = float(np.linalg.norm(mapped))
            history.append({"iteration": len(history), "round": round_index, "objective": value, "gradient_norm": gradient_norm})
            Debug.log_trace(f"iteration {len(history) - 1}: objective {value:.12g}, projected gradient {gradient_norm:.3e}")
            if gradient_norm <= config.gradient_tolerance:
                return z, True

            step = None
            if pairs:
                step = self._line_search(problem, z, value, gradient, self._direction(mapped, pairs), QUASI_NEWTON_BACKTRACKS)
            if step is None:
                pairs.clear()
                step = self._line_search(problem, z, value, gradient, -gradient / max(1.0, float(np.linalg.norm(gradient))), MAX_BACKTRACKS)
            if step is None:
                Debug.log_trace("line search failed along steepest descent, stopping")
                return z, False

            z_new, value = step
            new_value, new_gradient = problem.value_and_gradient(z_new)
            new_mapped = z_new - problem.project(z_new - new_gradient)
            s = z_new - z
            y = new_mapped - mapped
            if config.memory > 0 and float(np.dot(s, y)) > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
                pairs.append((s, y))
                if len(pairs) > config.memory:
                    pairs.pop(0)
            z, value, gradient, mapped = z_new, new_value, new_gradient, new_mapped

        return z, float(np.linalg.norm(mapped)) <= config.gradient_tolerance

    def _direction(self, mapped, pairs):
        q = mapped.copy()
        alphas = []
        for s, y in reversed(pairs):
            alpha = float(np.dot(s, q)) / float(np.dot(y, s))
            alphas.append(alpha)
            q -= alpha * y
        s, y = pairs[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
        for (s, y), alpha in zip(pairs, reversed(alphas)):
            beta = float(np.dot(y, q)) / float(np.dot(y, s))
            q += (alpha - beta) * s

        direction = -q
        if not np.all(np.isfinite(direction)) or float(np.dot(mapped, direction)) >= 0.0:
            return -mapped
        return direction

    def _line_search(self, problem: _Problem, z, value, gradient, direction, backtracks):
        config = self.config
        step = 1.0
        slack = 4.0 * np.finfo(float).eps * max(1.0, abs(value))

        for _ in range(backtracks):
            candidate = problem.project(z + step * direction)
            moved = candidate - z
            if not np.any(moved):
                return None
            try:
                candidate_value = problem.value(candidate)
            except (OverflowGuard, SingularSystem):
                candidate_value = np.inf

            if np.isfinite(candidate_value) and candidate_value <= value + config.armijo_slope * float(np.dot(gradient, moved)) + slack:
                return candidate, candidate_value
            step *= config.armijo_shrink

        return None

def solve_ddro(model: CostModel, ref, kind, c, config: Optional[SolverConfig] = None, strict = False) -> SolveReport:
    return DDROSolver(config).solve_ddro(model, ref, kind, c, strict)

def solve_soc(model: CostModel, ref, config: Optional[SolverConfig] = None, strict = False) -> SolveReport:
    return DDROSolver(config).solve_soc(model, ref, strict)

def pareto_sweep(model: CostModel, ref, c_list, config: Optional[SolverConfig] = None,
                 kind = BallKind.WEIGHTED_L2, threads = None) -> List[ParetoPoint]:
    return DDROSolver(config).pareto_sweep(model, ref, c_list, kind, threads)

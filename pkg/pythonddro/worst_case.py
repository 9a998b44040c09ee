"""
Inner maximization: the worst-case expectation of a cost vector over each
ball, with an attaining distribution and the optimal multipliers where a
closed form exists.

The oracle functions at the bottom are independent brute-force solvers used
to check the closed forms and the dual reformulation. They only accept desk
sized problems.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .debug import Debug
from .distributions import Ball, BallKind, DiscreteDistribution, ReferenceDistribution, beta_from_radius, reference_distribution, validate_distribution
from .duals import DualPoint, DualPointDR, DualPointL2
from .errors import NonPositiveRadius, TooLarge
from .risk import cost_and_weights, f_beta, value_at_risk
from .utils import ArrayUtils

ORACLE_MAX_OUTCOMES = 12
ORACLE_RESTARTS = 20
ORACLE_ITERATIONS = 10000

@dataclass(frozen=True, eq=False)
class WorstCaseResult:
    value: float
    distribution: Optional[DiscreteDistribution]
    multipliers: Optional[DualPoint] = None
    method: str = "closed_form"

@dataclass(frozen=True)
class SmoothConditions:
    """ Sufficient conditions for the closed-form L2 worst case (and the smooth L2 dual) """
    upper: bool
    lower: bool

    @property
    def holds(self) -> bool:
        return self.upper and self.lower

    def __str__(self):
        return f"max J > E+c*std: {self.upper}, min J > E-std/c: {self.lower}"

def check_radius(c) -> float:
    c = float(c)
    if not np.isfinite(c) or c <= 0.0:
        raise NonPositiveRadius(f"radius must be positive, got {c!r}")
    return c

def as_reference(ref) -> ReferenceDistribution:
    if isinstance(ref, ReferenceDistribution):
        return ref
    if isinstance(ref, DiscreteDistribution):
        return reference_distribution(ref.mass)
    return reference_distribution(ref)

def l2_condition(costs, ref, c) -> SmoothConditions:
    costs, weights = cost_and_weights(costs, ref)
    c = check_radius(c)
    mean, std = ArrayUtils.mean_std(costs, weights)
    return SmoothConditions(
        upper = bool(np.max(costs) > mean + c * std),
        lower = bool(np.min(costs) > mean - std / c))

def worst_expectation_l2(costs, ref, c, rng: Optional[np.random.Generator] = None) -> WorstCaseResult:
    ref = as_reference(ref)
    costs, weights = cost_and_weights(costs, ref)
    c = check_radius(c)
    mean, std = ArrayUtils.mean_std(costs, weights)

    if std <= 1e-14 * max(1.0, abs(mean)):
        return WorstCaseResult(mean, ref, None, "constant")

    conditions = l2_condition(costs, weights, c)
    if conditions.holds:
        lam = std / (2.0 * c)
        nu = mean
        ratio = np.maximum(0.0, (costs + 2.0 * lam - nu) / (2.0 * lam))
        distribution = validate_distribution(weights * ratio)
        return WorstCaseResult(mean + c * std, distribution, DualPointL2(lam, nu), "closed_form")

    Debug.log_trace(f"L2 closed form not applicable ({conditions}), using the ascent oracle")
    value, mass = l2_projected_ascent(costs, weights, c, rng)
    return WorstCaseResult(value, validate_distribution(mass), None, "oracle")

def worst_expectation_dr(costs, ref, c) -> WorstCaseResult:
    costs, weights = cost_and_weights(costs, ref)
    c = check_radius(c)
    beta = beta_from_radius(c)

    var = value_at_risk(costs, weights, beta)
    value = f_beta(costs, weights, beta, var)
    mass = cap_fill(costs, weights, 1.0 + c)
    multipliers = DualPointDR(np.maximum(0.0, costs - var), var)

    return WorstCaseResult(value, validate_distribution(mass), multipliers, "closed_form")

def worst_expectation_tv(costs, ref, c) -> WorstCaseResult:
    costs, weights = cost_and_weights(costs, ref)
    c = check_radius(c)
    mass = transfer_fill(costs, weights, c)
    return WorstCaseResult(float(np.dot(mass, costs)), validate_distribution(mass), None, "greedy")

def worst_expectation(ball: Ball, costs, rng: Optional[np.random.Generator] = None) -> WorstCaseResult:
    if ball.kind is BallKind.WEIGHTED_L2:
        return worst_expectation_l2(costs, ball.reference, ball.radius, rng)
    elif ball.kind is BallKind.DENSITY_RATIO:
        return worst_expectation_dr(costs, ball.reference, ball.radius)
    return worst_expectation_tv(costs, ball.reference, ball.radius)

def cap_fill(costs, weights, cap_factor) -> np.ndarray:
    """ Fill outcomes in descending cost order up to cap_factor * weight until the mass is spent """
    # stable sort on -cost puts the lowest index first among ties
    order = np.argsort(-costs, kind = "stable")
    mass = np.zeros(len(costs))
    remaining = 1.0

    for index in order:
        take = min(cap_factor * weights[index], remaining)
        mass[index] = take
        remaining -= take
        if remaining <= 0.0:
            break

    return mass

def transfer_fill(costs, weights, c) -> np.ndarray:
    """ Move up to c/2 of mass from the cheapest outcomes onto the costliest one """
    order = np.argsort(-costs, kind = "stable")
    top = order[0]
    mass = np.array(weights, dtype = float)
    budget = min(c / 2.0, 1.0 - mass[top])

    moved = 0.0
    for index in order[::-1]:
        if index == top or moved >= budget:
            break
        take = min(mass[index], budget - moved)
        mass[index] -= take
        moved += take

    mass[top] += moved
    return mass

def project_l2_ratio(y, weights, c) -> np.ndarray:
    """
    Project a density-ratio vector onto {r >= 0, E_w[r] = 1, E_w[(r-1)^2] <= c^2}
    in the w-weighted Euclidean norm.

    For a ball multiplier eta the solution is max(0, z + s) with
    z = (y + eta) / (1 + eta) and s fixing the mass; eta is zero when the
    radius constraint is slack and is found by root finding otherwise.
    """
    def simplex_part(eta):
        z = (y + eta) / (1.0 + eta)
        order = np.argsort(-z, kind = "stable")
        sorted_z = z[order]
        sorted_w = weights[order]
        thresholds = (np.cumsum(sorted_w * sorted_z) - 1.0) / np.cumsum(sorted_w)
        active = np.nonzero(sorted_z > thresholds)[0]
        shift = thresholds[active[-1]] if len(active) else thresholds[-1]
        return np.maximum(z - shift, 0.0)

    def radius_gap(eta):
        r = simplex_part(eta)
        return float(np.dot(weights, (r - 1.0) ** 2)) - c * c

    if radius_gap(0.0) <= 0.0:
        ratio = simplex_part(0.0)
    else:
        upper = 1.0
        while radius_gap(upper) > 0.0:
            upper *= 2.0
        ratio = simplex_part(brentq(radius_gap, 0.0, upper, xtol = 1e-14, rtol = 4 * np.finfo(float).eps, maxiter = 200))

    # pull the last round-off back inside the ball along the ray to the centre
    distance = np.sqrt(float(np.dot(weights, (ratio - 1.0) ** 2)))
    if distance > c:
        ratio = 1.0 + (ratio - 1.0) * (c / distance)
    return ratio

def l2_projected_ascent(costs, weights, c, rng: Optional[np.random.Generator] = None,
                        restarts = ORACLE_RESTARTS, iterations = ORACLE_ITERATIONS):
    """ Maximize E_p[J] over the weighted L2 ball by projected gradient ascent; returns (value, mass) """
    if rng is None:
        rng = np.random.default_rng(0)

    spread = float(np.ptp(costs))
    best_value, best_ratio = -np.inf, None

    for _ in range(restarts):
        start = rng.dirichlet(np.ones(len(costs))) / weights
        ratio = project_l2_ratio(start, weights, c)
        value = float(np.dot(weights, costs * ratio))
        step = 1.0 / max(spread, 1e-12)
        failures = 0

        for _ in range(iterations):
            candidate = project_l2_ratio(ratio + step * costs, weights, c)
            candidate_value = float(np.dot(weights, costs * candidate))
            if candidate_value > value + 1e-15 * max(1.0, abs(value)):
                ratio, value = candidate, candidate_value
                step *= 2.0
                failures = 0
            else:
                step *= 0.5
                failures += 1
                if failures >= 30:
                    break

        if value > best_value:
            best_value, best_ratio = value, ratio

    mass = weights * best_ratio
    return float(np.dot(mass, costs)), mass / np.sum(mass)

def oracle_worst_expectation(costs, ref, ball: Ball, rng: Optional[np.random.Generator] = None) -> float:
    costs, weights = cost_and_weights(costs, ref)
    if len(costs) > ORACLE_MAX_OUTCOMES:
        raise TooLarge(f"the oracle handles at most {ORACLE_MAX_OUTCOMES} outcomes, got {len(costs)}")

    if ball.kind is BallKind.DENSITY_RATIO:
        return float(np.dot(cap_fill(costs, weights, 1.0 + ball.radius), costs))
    elif ball.kind is BallKind.TOTAL_VARIATION:
        return float(np.dot(transfer_fill(costs, weights, ball.radius), costs))
    return l2_projected_ascent(costs, weights, ball.radius, rng)[0]

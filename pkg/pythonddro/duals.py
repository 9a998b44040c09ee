"""
Smooth dual objectives of the worst-case expectation over the weighted L2
and density-ratio balls, their extended-value forms at lambda = 0, and
analytic gradients in the multipliers and in the costs.

At a fixed decision x the infimum of these functions over the multipliers
equals the worst-case expectation over the ball, so minimizing them jointly
with x turns the min-max problem into a single smooth convex program.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .distributions import BallKind
from .errors import NonPositiveLambda, OverflowGuard
from .risk import cost_and_weights

# exp() overflows a double just above 709
EXPONENT_GUARD = 700.0

@dataclass(frozen=True)
class DualPointL2:
    lam: float
    nu: float

    def to_dict(self) -> dict:
        return {"lambda": float(self.lam), "nu": float(self.nu)}

@dataclass(frozen=True, eq=False)
class DualPointDR:
    lambdas: np.ndarray
    nu: float

    def to_dict(self) -> dict:
        return {"lambdas": [float(v) for v in self.lambdas], "nu": float(self.nu)}

DualPoint = Union[DualPointL2, DualPointDR]

@dataclass(frozen=True)
class ExtendedReal:
    """ A value in R u {+inf}; infinity is a flag, never a float """
    value: float = 0.0
    infinite: bool = False

    @classmethod
    def of(cls, value) -> "ExtendedReal":
        return cls(float(value), False)

    def __str__(self):
        return "+inf" if self.infinite else repr(self.value)

INFINITY = ExtendedReal(0.0, True)

@dataclass(frozen=True, eq=False)
class DualEvaluation:
    """ Value of a dual objective with its partial derivatives """
    value: float
    grad_lambdas: np.ndarray
    grad_nu: float
    grad_costs: np.ndarray

    def grad_duals(self) -> np.ndarray:
        return np.append(self.grad_lambdas, self.grad_nu)

def evaluate_l2(costs, weights, c, lam, nu) -> DualEvaluation:
    if not lam > 0.0:
        raise NonPositiveLambda(f"lambda must be positive in the smooth dual, got {lam!r}")

    u = np.maximum(0.0, (costs + 2.0 * lam - nu) / (2.0 * lam))
    u_squared = float(np.dot(weights, u * u))
    u_mean = float(np.dot(weights, u))

    value = lam * u_squared + lam * (c * c - 1.0) + nu
    # the squared max is C1, so the one-sided derivative at the kink is exact
    grad_lam = -u_squared + 2.0 * u_mean + c * c - 1.0
    grad_nu = 1.0 - u_mean

    return DualEvaluation(float(value), np.array([grad_lam]), grad_nu, weights * u)

def evaluate_dr(costs, weights, c, lambdas, nu) -> DualEvaluation:
    lambdas = np.asarray(lambdas, dtype = float)
    if np.any(~(lambdas > 0.0)):
        index = int(np.argmin(lambdas))
        raise NonPositiveLambda(f"lambda[{index}] must be positive in the smooth dual, got {lambdas[index]!r}")

    exponent = (costs - nu) / lambdas - 1.0
    if np.any(exponent > EXPONENT_GUARD):
        raise OverflowGuard(f"dual exponent {float(np.max(exponent)):.6g} exceeds {EXPONENT_GUARD}")

    scaled = (1.0 + c) * np.exp(exponent)
    value = float(np.dot(weights, lambdas * scaled)) + nu
    grad_lambdas = -weights * scaled * exponent
    grad_nu = 1.0 - float(np.dot(weights, scaled))

    return DualEvaluation(value, grad_lambdas, grad_nu, weights * scaled)

def evaluate_dual(kind, costs, weights, c, lambdas, nu) -> DualEvaluation:
    """ Dispatch on the ball kind; lambdas has one entry for L2 and m entries for DR """
    kind = BallKind.parse(kind)
    if kind is BallKind.WEIGHTED_L2:
        return evaluate_l2(costs, weights, c, float(np.asarray(lambdas).reshape(-1)[0]), nu)
    elif kind is BallKind.DENSITY_RATIO:
        return evaluate_dr(costs, weights, c, lambdas, nu)
    raise ValueError(f"no smooth dual objective is defined for the {kind.value} ball")

def g_l2(costs, ref, c, dual: DualPointL2) -> float:
    costs, weights = cost_and_weights(costs, ref)
    return evaluate_l2(costs, weights, c, dual.lam, dual.nu).value

def g_l2_extended(costs, ref, c, lam, nu) -> ExtendedReal:
    costs, weights = cost_and_weights(costs, ref)
    if lam < 0.0:
        raise NonPositiveLambda(f"lambda must be non-negative in the extended dual, got {lam!r}")
    if lam > 0.0:
        return ExtendedReal.of(evaluate_l2(costs, weights, c, lam, nu).value)
    if np.max(costs) <= nu:
        return ExtendedReal.of(nu)
    return INFINITY

def g_dr(costs, ref, c, dual: DualPointDR) -> float:
    costs, weights = cost_and_weights(costs, ref)
    return evaluate_dr(costs, weights, c, dual.lambdas, dual.nu).value

def g_dr_extended(costs, ref, c, lambdas, nu) -> ExtendedReal:
    costs, weights = cost_and_weights(costs, ref)
    lambdas = np.asarray(lambdas, dtype = float)
    if np.any(lambdas < 0.0):
        raise NonPositiveLambda("lambdas must be non-negative in the extended dual")

    boundary = lambdas == 0.0
    if np.any(boundary & (costs > nu)):
        return INFINITY

    per_outcome = np.full(len(costs), float(nu))
    interior = ~boundary
    if np.any(interior):
        exponent = (costs[interior] - nu) / lambdas[interior] - 1.0
        if np.any(exponent > EXPONENT_GUARD):
            raise OverflowGuard(f"dual exponent {float(np.max(exponent)):.6g} exceeds {EXPONENT_GUARD}")
        per_outcome[interior] += (1.0 + c) * lambdas[interior] * np.exp(exponent)

    return ExtendedReal.of(float(np.dot(weights, per_outcome)))

def grad_duals(costs, ref, c, dual: DualPoint, kind = None) -> np.ndarray:
    """ Gradient over (lambda..., nu) """
    costs, weights = cost_and_weights(costs, ref)
    if kind is None:
        kind = BallKind.WEIGHTED_L2 if isinstance(dual, DualPointL2) else BallKind.DENSITY_RATIO
    kind = BallKind.parse(kind)

    if kind is BallKind.WEIGHTED_L2:
        return evaluate_l2(costs, weights, c, dual.lam, dual.nu).grad_duals()
    return evaluate_dr(costs, weights, c, dual.lambdas, dual.nu).grad_duals()

def dual_point(kind, lambdas, nu) -> DualPoint:
    kind = BallKind.parse(kind)
    lambdas = np.asarray(lambdas, dtype = float).reshape(-1)
    if kind is BallKind.WEIGHTED_L2:
        return DualPointL2(float(lambdas[0]), float(nu))
    return DualPointDR(lambdas.copy(), float(nu))

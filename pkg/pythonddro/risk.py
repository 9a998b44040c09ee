"""
Risk measures of a discrete cost vector under a reference distribution:
VaR, the two CVaR variants, the F_beta function, mean+std and the
worst-C average.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteDistribution
from .errors import CountOutOfRange, DimensionMismatch, ProbabilityLevelOutOfRange
from .utils import ArrayUtils

# slack on the cumulative mass when locating VaR on the atoms
VAR_SLACK = 1e-12

@dataclass(frozen=True, eq=False)
class CostVector:
    """ J(x, .) for a fixed decision x """
    values: np.ndarray

    @classmethod
    def of(cls, values) -> "CostVector":
        return cls(ArrayUtils.frozen(ArrayUtils.as_vector(values, "costs")))

    def __len__(self):
        return len(self.values)

def check_beta(beta) -> float:
    beta = float(beta)
    if not 0.0 <= beta < 1.0:
        raise ProbabilityLevelOutOfRange(f"probability level must lie in [0, 1), got {beta!r}")
    return beta

def cost_and_weights(costs, ref):
    """ Normalize (costs, ref) into two float vectors of equal length """
    if isinstance(costs, CostVector):
        costs = costs.values
    costs = ArrayUtils.as_vector(costs, "costs")
    weights = ref.mass if isinstance(ref, DiscreteDistribution) else ArrayUtils.as_vector(ref, "reference")

    if len(costs) != len(weights):
        raise DimensionMismatch(f"cost vector has {len(costs)} entries, reference has {len(weights)}")

    return costs, weights

def value_at_risk(costs, ref, beta) -> float:
    costs, weights = cost_and_weights(costs, ref)
    beta = check_beta(beta)

    order = np.argsort(costs, kind = "stable")
    cumulative = np.cumsum(weights[order])
    index = int(np.searchsorted(cumulative, beta - VAR_SLACK, side = "left"))

    return float(costs[order[min(index, len(costs) - 1)]])

def cvar_hat(costs, ref, beta) -> float:
    """ Mean cost over the outcomes strictly above VaR; VaR itself when that event is null """
    costs, weights = cost_and_weights(costs, ref)
    var = value_at_risk(costs, weights, beta)

    tail = costs > var
    tail_mass = float(np.sum(weights[tail]))
    if tail_mass <= 0.0:
        return var

    return float(np.dot(weights[tail], costs[tail]) / tail_mass)

def cvar_nonstrict(costs, ref, beta) -> float:
    costs, weights = cost_and_weights(costs, ref)
    var = value_at_risk(costs, weights, beta)

    tail = costs >= var
    return float(np.dot(weights[tail], costs[tail]) / np.sum(weights[tail]))

def f_beta(costs, ref, beta, nu) -> float:
    costs, weights = cost_and_weights(costs, ref)
    beta = check_beta(beta)

    return float(nu) + float(np.dot(weights, np.maximum(0.0, costs - nu))) / (1.0 - beta)

def cvar_tilde(costs, ref, beta) -> float:
    """ The representative of beta-CVaR lying between cvar_nonstrict and cvar_hat: F_beta at VaR """
    costs, weights = cost_and_weights(costs, ref)
    return f_beta(costs, weights, beta, value_at_risk(costs, weights, beta))

def mean_std(costs, ref):
    costs, weights = cost_and_weights(costs, ref)
    return ArrayUtils.mean_std(costs, weights)

def mean_std_objective(costs, ref, c) -> float:
    if c < 0.0:
        raise ValueError(f"standard deviation weight must be non-negative, got {c!r}")
    mean, std = mean_std(costs, ref)
    return mean + c * std

def worst_c_average(costs, count) -> float:
    if isinstance(costs, CostVector):
        costs = costs.values
    costs = ArrayUtils.as_vector(costs, "costs")

    if int(count) != count or not 1 <= count <= len(costs):
        raise CountOutOfRange(f"count must be an integer in [1, {len(costs)}], got {count!r}")

    largest = np.sort(costs)[::-1][:int(count)]
    return float(np.mean(largest))

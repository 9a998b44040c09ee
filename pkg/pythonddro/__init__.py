"""
PythonDDRO

Discrete distributionally robust optimization over weighted-L2 and
density-ratio ambiguity balls, solved as one smooth convex program.
Includes the risk measures the balls are equivalent to and a patrol-agent
design application.
"""

from .debug import Debug, DebugLevel
from .distributions import Ball, BallKind, DiscreteDistribution, ReferenceDistribution, ball_contains, beta_from_radius, density_ratio, radius_from_beta, reference_distribution, uniform_reference, validate_distribution
from .duals import DualPointDR, DualPointL2, g_dr, g_dr_extended, g_l2, g_l2_extended, grad_duals
from .risk import CostVector, cvar_hat, cvar_nonstrict, cvar_tilde, f_beta, mean_std, mean_std_objective, value_at_risk, worst_c_average
from .worst_case import WorstCaseResult, l2_condition, oracle_worst_expectation, worst_expectation, worst_expectation_dr, worst_expectation_l2, worst_expectation_tv
from .DDROSolver import CostModel, DDROSolver, QuadraticCostModel, SolveReport, SolverConfig, pareto_sweep, solve_ddro, solve_soc
from .patrol import Graph, HittingTimeCost, ReversibleChainParam, build_transition_matrix, mean_hitting_time, mean_hitting_time_gradient, patrol_ddro, patrol_soc, read_graph
from .presets import ball_descriptions

def explain(kind=""):
    """ Explains a ball kind, or all of them.

    Try `pythonddro.explain("dr")`
    """
    if kind == "":
        Debug.explain(list(ball_descriptions.values()))
        return
    Debug.explain(ball_descriptions[BallKind.parse(kind).value])

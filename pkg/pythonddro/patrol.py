"""
Patrol-agent design: a random walk on an undirected graph whose transition
matrix is symmetric (uniform stationary distribution), tuned so the mean time
to reach a goal node is small in the worst case over which node becomes the
goal.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, lu_factor, lu_solve
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .DDROSolver import CostModel, DDROSolver, SolveReport, SolverConfig
from .debug import Debug
from .distributions import BallKind, radius_from_beta, uniform_reference
from .errors import DimensionMismatch, GraphFormatError, InfeasibleParam, SingularSystem
from .risk import cvar_hat, cvar_tilde, mean_std, mean_std_objective
from .utils import EnvUtils, FileUtils

WEIGHT_FLOOR = 1e-9
ROW_CAP = 1.0 - 1e-9
# round-off allowance when checking the invariants of a built matrix
FEASIBILITY_SLACK = 1e-12
PROJECTION_TOLERANCE = 1e-15
PROJECTION_ITERATIONS = 200

class Graph(object):
    """ Undirected simple graph on nodes 0..n-1; edges are stored as sorted (u, v) pairs with u < v """

    def __init__(self, n, edges):
        self.n = int(n)
        if self.n < 1:
            raise GraphFormatError(f"a graph needs at least one node, got n={n}")

        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphFormatError(f"self-loop on node {u} is not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphFormatError(f"edge ({u}, {v}) references a node outside 0..{self.n - 1}")
            pairs.add((min(u, v), max(u, v)))

        self.edges = np.array(sorted(pairs), dtype = int).reshape(-1, 2)
        self.degree = np.bincount(self.edges.ravel(), minlength = self.n)
        self.connected = self.n == 1 or (len(self.edges) > 0 and connected_components(self.adjacency(), directed = False)[0] == 1)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return int(np.max(self.degree)) if self.n else 0

    def adjacency(self):
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u))
        return coo_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape = (self.n, self.n)).tocsr()

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count}, connected={self.connected})"

@dataclass(frozen=True, eq=False)
class ReversibleChainParam:
    """ One transition probability per undirected edge; the decision vector of the patrol problem """
    edge_weights: np.ndarray

def read_graph(path) -> Graph:
    text = FileUtils.file_to_string(path)
    edges = []
    for number, line in enumerate(text.splitlines(), start = 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise GraphFormatError(f"{path}, line {number}: expected 'u v', got {line!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphFormatError(f"{path}, line {number}: node ids must be integers, got {line!r}")
        if u < 0 or v < 0:
            raise GraphFormatError(f"{path}, line {number}: node ids must be non-negative")
        edges.append((u, v))

    if not edges:
        raise GraphFormatError(f"{path} contains no edges")
    return Graph(max(max(e) for e in edges) + 1, edges)

def write_graph(graph: Graph, path):
    with open(path, "w", encoding = "utf-8") as file:
        file.write(f"# {graph.n} nodes, {graph.edge_count} edges\n")
        for u, v in graph.edges:
            file.write(f"{u} {v}\n")

def cycle_graph(n) -> Graph:
    if n < 2:
        raise ValueError(f"a cycle needs at least 2 nodes, got {n}")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])

def grid_graph(rows, cols) -> Graph:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"a grid needs at least 2 nodes, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            node = r * cols + c
            if c + 1 < cols:
                edges.append((node, node + 1))
            if r + 1 < rows:
                edges.append((node, node + cols))
    return Graph(rows * cols, edges)

def random_connected_graph(n, extra_edges, rng: np.random.Generator) -> Graph:
    """ A random spanning tree plus extra_edges distinct random chords """
    if n < 2:
        raise ValueError(f"a connected graph needs at least 2 nodes, got {n}")
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}

    available = n * (n - 1) // 2 - len(edges)
    target = len(edges) + min(int(extra_edges), available)
    while len(edges) < target:
        u, v = rng.choice(n, size = 2, replace = False)
        edges.add((int(min(u, v)), int(max(u, v))))

    return Graph(n, sorted(edges))

def check_param(graph: Graph, param: ReversibleChainParam):
    weights = np.asarray(param.edge_weights, dtype = float)
    if len(weights) != graph.edge_count:
        raise DimensionMismatch(f"parameter has {len(weights)} edge weights, graph has {graph.edge_count} edges")
    if not np.all(np.isfinite(weights)) or np.any(weights < WEIGHT_FLOOR - FEASIBILITY_SLACK):
        index = int(np.argmin(np.nan_to_num(weights, nan = -np.inf)))
        raise InfeasibleParam(f"edge weight {index} is {weights[index]!r}, below the floor {WEIGHT_FLOOR}")

    row_sums = np.bincount(graph.edges.ravel(), weights = np.repeat(weights, 2), minlength = graph.n)
    if np.any(row_sums > ROW_CAP + FEASIBILITY_SLACK):
        node = int(np.argmax(row_sums))
        raise InfeasibleParam(f"edge weights at node {node} sum to {row_sums[node]!r}, above the cap {ROW_CAP}")

def build_transition_matrix(graph: Graph, param: ReversibleChainParam) -> np.ndarray:
    check_param(graph, param)
    weights = np.asarray(param.edge_weights, dtype = float)
    u, v = graph.edges[:, 0], graph.edges[:, 1]

    matrix = np.zeros((graph.n, graph.n))
    matrix[u, v] = weights
    matrix[v, u] = weights
    np.fill_diagonal(matrix, 1.0 - matrix.sum(axis = 1))
    return matrix

def _absorbed_factor(matrix, goal, check_reachable = True):
    """ LU factors of I - Q with Q the transitions among the non-goal nodes """
    n = matrix.shape[0]
    if not 0 <= goal < n:
        raise ValueError(f"goal node {goal} is outside 0..{n - 1}")

    keep = np.arange(n) != goal
    if check_reachable:
        support = coo_matrix((matrix > 0.0).astype(float))
        labels = connected_components(support, directed = False)[1]
        if np.any(labels != labels[goal]):
            raise SingularSystem(f"goal node {goal} is unreachable from some nodes; the hitting-time system is singular")

    system = np.eye(n - 1) - matrix[np.ix_(keep, keep)]
    try:
        factor = lu_factor(system, check_finite = True)
    except (LinAlgError, ValueError) as error:
        raise SingularSystem(f"hitting-time system for goal {goal} could not be factored: {error}")
    if np.any(np.diag(factor[0]) == 0.0):
        raise SingularSystem(f"hitting-time system for goal {goal} is singular")
    return keep, factor

def _forward_times(keep, factor, n) -> np.ndarray:
    times = np.zeros(n)
    times[keep] = lu_solve(factor, np.ones(n - 1))
    if not np.all(np.isfinite(times)):
        raise SingularSystem("hitting times are not finite")
    return times

def hitting_times(matrix, goal) -> np.ndarray:
    """ Expected steps to first reach goal from every node; zero at the goal """
    matrix = np.asarray(matrix, dtype = float)
    keep, factor = _absorbed_factor(matrix, goal)
    return _forward_times(keep, factor, matrix.shape[0])

def mean_hitting_time(graph: Graph, matrix, goal) -> float:
    if graph.n == 1:
        return 0.0
    return float(np.mean(hitting_times(matrix, goal)))

def _value_and_gradient(graph: Graph, keep, factor):
    n = graph.n
    forward = _forward_times(keep, factor, n)
    adjoint = np.zeros(n)
    adjoint[keep] = lu_solve(factor, np.full(n - 1, 1.0 / n), trans = 1)

    u, v = graph.edges[:, 0], graph.edges[:, 1]
    # an edge weight moves P[u,v], P[v,u] up and P[u,u], P[v,v] down by the same amount
    gradient = -(adjoint[u] - adjoint[v]) * (forward[u] - forward[v])
    return float(np.mean(forward)), gradient

def mean_hitting_time_gradient(graph: Graph, param: ReversibleChainParam, goal) -> np.ndarray:
    keep, factor = _absorbed_factor(build_transition_matrix(graph, param), goal)
    return _value_and_gradient(graph, keep, factor)[1]

class HittingTimeCost(CostModel):
    """ Outcome i: the goal set is node i; J(x, i) is the mean hitting time of node i from the uniform start """
    thread_safe = True

    def __init__(self, graph: Graph):
        if not graph.connected:
            raise GraphFormatError(f"patrol graphs must be connected, got {graph}")
        if graph.edge_count == 0:
            raise GraphFormatError("patrol graphs need at least one edge")
        self.graph = graph
        # node-by-edge incidence; row j sums the weights leaving node j
        self.incidence = np.zeros((graph.n, graph.edge_count))
        self.incidence[graph.edges[:, 0], np.arange(graph.edge_count)] = 1.0
        self.incidence[graph.edges[:, 1], np.arange(graph.edge_count)] = 1.0
        self._cache = threading.local()

    @property
    def dimension(self) -> int:
        return self.graph.edge_count

    @property
    def outcomes(self) -> int:
        return self.graph.n

    def matrix(self, x) -> np.ndarray:
        return build_transition_matrix(self.graph, ReversibleChainParam(np.asarray(x, dtype = float)))

    def factors(self, x):
        """ (keep, LU factor) for every goal, shared by the costs and the jacobian at the same x """
        x = np.asarray(x, dtype = float)
        key = x.tobytes()
        if getattr(self._cache, "key", None) != key:
            # the graph is connected and every weight is at least the floor, so no goal is unreachable
            matrix = self.matrix(x)
            self._cache.factors = [_absorbed_factor(matrix, i, check_reachable = False) for i in range(self.graph.n)]
            self._cache.key = key
        return self._cache.factors

    def evaluate(self, x, i) -> float:
        keep, factor = self.factors(x)[i]
        return float(np.mean(_forward_times(keep, factor, self.graph.n)))

    def gradient_x(self, x, i) -> np.ndarray:
        keep, factor = self.factors(x)[i]
        return _value_and_gradient(self.graph, keep, factor)[1]

    def costs(self, x) -> np.ndarray:
        n = self.graph.n
        return np.array([np.mean(_forward_times(keep, factor, n)) for keep, factor in self.factors(x)])

    def costs_and_jacobian(self, x):
        pairs = [_value_and_gradient(self.graph, keep, factor) for keep, factor in self.factors(x)]
        return np.array([value for value, _ in pairs]), np.array([gradient for _, gradient in pairs])

    def jacobian(self, x) -> np.ndarray:
        return self.costs_and_jacobian(x)[1]

    def is_feasible(self, x) -> bool:
        x = np.asarray(x, dtype = float)
        return bool(np.all(x >= WEIGHT_FLOOR) and np.all(self.incidence @ x <= ROW_CAP))

    def shrink(self, x) -> np.ndarray:
        """ Clip to the floor, then scale the edges at every node whose weights exceed the row cap """
        weights = np.clip(np.asarray(x, dtype = float), WEIGHT_FLOOR, ROW_CAP)
        u, v = self.graph.edges[:, 0], self.graph.edges[:, 1]
        degree = self.graph.degree

        row_sums = self.incidence @ weights
        excess = row_sums - degree * WEIGHT_FLOOR
        with np.errstate(divide = "ignore", invalid = "ignore"):
            factors = np.where(row_sums > ROW_CAP, (ROW_CAP - degree * WEIGHT_FLOOR) / excess, 1.0)
        scale = np.minimum(np.minimum(factors[u], factors[v]), 1.0)
        return WEIGHT_FLOOR + (weights - WEIGHT_FLOOR) * scale

    def project(self, x) -> np.ndarray:
        """ Euclidean projection onto {w >= floor, weights at every node sum to at most the cap} """
        target = np.asarray(x, dtype = float)
        if self.is_feasible(target):
            return target.copy()

        result = minimize(
            lambda w: 0.5 * float(np.dot(w - target, w - target)),
            self.shrink(target),
            jac = lambda w: w - target,
            method = "SLSQP",
            bounds = [(WEIGHT_FLOOR, None)] * self.graph.edge_count,
            constraints = [{"type": "ineq", "fun": lambda w: ROW_CAP - self.incidence @ w, "jac": lambda w: -self.incidence}],
            options = {"ftol": PROJECTION_TOLERANCE, "maxiter": PROJECTION_ITERATIONS})
        if not result.success:
            Debug.log_trace(f"edge-weight projection stopped early: {result.message}")
        # removes round-off outside the set; a no-op on feasible points
        return self.shrink(result.x)

    def feasible_start(self) -> np.ndarray:
        return np.full(self.graph.edge_count, 0.5 / self.graph.max_degree)

@dataclass(frozen=True, eq=False)
class PatrolSummary:
    mean: float
    std: float
    worst: float
    cvar: Dict[float, float]
    cvar_hat: Dict[float, float]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "worst": self.worst,
            "cvar": {str(beta): value for beta, value in self.cvar.items()},
            "cvar_hat": {str(beta): value for beta, value in self.cvar_hat.items()},
        }

@dataclass(frozen=True, eq=False)
class PatrolResult:
    report: SolveReport
    summary: PatrolSummary

def summarize(costs, ref, eval_betas) -> PatrolSummary:
    mean, std = mean_std(costs, ref)
    return PatrolSummary(
        mean = mean,
        std = std,
        worst = float(np.max(costs)),
        cvar = {float(beta): cvar_tilde(costs, ref, beta) for beta in eval_betas},
        cvar_hat = {float(beta): cvar_hat(costs, ref, beta) for beta in eval_betas})

def patrol_ddro(graph: Graph, kind, c, config: Optional[SolverConfig] = None,
                eval_betas = (0.0, 0.5, 0.75), strict = False) -> PatrolResult:
    model = HittingTimeCost(graph)
    ref = uniform_reference(graph.n)
    report = DDROSolver(config).solve_ddro(model, ref, kind, c, strict)
    return PatrolResult(report, summarize(report.costs, ref, eval_betas))

def patrol_soc(graph: Graph, config: Optional[SolverConfig] = None,
               eval_betas = (0.0, 0.5, 0.75), strict = False) -> PatrolResult:
    model = HittingTimeCost(graph)
    ref = uniform_reference(graph.n)
    report = DDROSolver(config).solve_soc(model, ref, strict)
    return PatrolResult(report, summarize(report.costs, ref, eval_betas))

def _solve_designs(graph, designs, config, threads) -> List[PatrolResult]:
    """ designs: (kind, radius) pairs, kind None for the expected-cost baseline """
    def run(design):
        kind, radius = design
        if kind is None:
            return patrol_soc(graph, config, ())
        return patrol_ddro(graph, kind, radius, config, ())

    workers = min(EnvUtils.thread_count(threads), len(designs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers = workers) as pool:
            return list(pool.map(run, designs))
    return [run(design) for design in designs]

def cvar_table(graph: Graph, design_betas, eval_betas, config: Optional[SolverConfig] = None, threads = None) -> pd.DataFrame:
    """
    One row per (design, evaluation level). The design with beta 0 is the
    expected-cost solution; every other design is the density-ratio solution
    with radius beta / (1 - beta).
    """
    design_betas = [float(beta) for beta in design_betas]
    eval_betas = [float(beta) for beta in eval_betas]
    designs = [(None, None)] + [(BallKind.DENSITY_RATIO, radius_from_beta(beta)) for beta in design_betas if beta > 0.0]
    labels = [0.0] + [beta for beta in design_betas if beta > 0.0]

    ref = uniform_reference(graph.n)
    rows = []
    for label, result in zip(labels, _solve_designs(graph, designs, config, threads)):
        costs = result.report.costs
        mean, std = mean_std(costs, ref)
        for beta in eval_betas:
            rows.append({
                "beta_design": label,
                "beta_eval": beta,
                "cvar": cvar_tilde(costs, ref, beta),
                "cvar_hat": cvar_hat(costs, ref, beta),
                "mean": mean,
                "std": std,
                "worst": float(np.max(costs)),
                "converged": bool(result.report.converged),
            })
        Debug.log_message(f"cvar table: design beta {label:g} mean {mean:.6g} worst {np.max(costs):.6g}")

    return pd.DataFrame(rows, columns = ["beta_design", "beta_eval", "cvar", "cvar_hat", "mean", "std", "worst", "converged"])

def mean_std_table(graph: Graph, design_radii, eval_weights, config: Optional[SolverConfig] = None, threads = None) -> pd.DataFrame:
    """ Weighted-L2 designs evaluated with mean + c' * std; design radius 0 is the expected-cost solution """
    design_radii = [float(c) for c in design_radii]
    eval_weights = [float(c) for c in eval_weights]
    designs = [(None, None)] + [(BallKind.WEIGHTED_L2, c) for c in design_radii if c > 0.0]
    labels = [0.0] + [c for c in design_radii if c > 0.0]

    ref = uniform_reference(graph.n)
    rows = []
    for label, result in zip(labels, _solve_designs(graph, designs, config, threads)):
        costs = result.report.costs
        mean, std = mean_std(costs, ref)
        for weight in eval_weights:
            rows.append({
                "c_design": label,
                "c_eval": weight,
                "objective": mean_std_objective(costs, ref, weight),
                "mean": mean,
                "std": std,
                "worst": float(np.max(costs)),
                "converged": bool(result.report.converged),
            })

    return pd.DataFrame(rows, columns = ["c_design", "c_eval", "objective", "mean", "std", "worst", "converged"])

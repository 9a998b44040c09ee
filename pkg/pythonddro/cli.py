"""
Command-line front end: `ddro solve | pareto | cvar-table | verify`.

The effective configuration is the command's presets, overlaid with an
optional JSON config file, overlaid with command-line flags. It is echoed to
config.json in the output directory next to the results.
"""

import argparse
import copy
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .ConfigValidator import ConfigValidator
from .DDROSolver import DDROSolver, QuadraticCostModel, SolverConfig
from .debug import Debug
from .distributions import BallKind, radius_from_beta, reference_distribution, uniform_reference
from .errors import DDROError, ValidationException
from .patrol import HittingTimeCost, cvar_table, cycle_graph, grid_graph, mean_std_table, random_connected_graph, read_graph, summarize
from .presets import run_defaults
from .utils import FileUtils
from .verify import first_failure, run_suites

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_VERIFY_FAILED = 3

@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    @classmethod
    def load(cls, command, config_path = None, overrides = None) -> "RunConfig":
        values = run_defaults(command)

        if config_path is not None:
            loaded = json.loads(FileUtils.file_to_string(config_path))
            if not isinstance(loaded, dict):
                raise ValueError(f"config file {config_path} must contain a JSON object")
            # a block named after the command applies on top of the shared keys
            command_block = loaded.pop(command, None)
            for key in ("solve", "pareto", "cvar-table", "verify"):
                loaded.pop(key, None)
            cls.merge(values, loaded)
            if isinstance(command_block, dict):
                cls.merge(values, command_block)

        cls.merge(values, overrides or {})
        return cls(command, values)

    @staticmethod
    def merge(values, overrides):
        for key, value in overrides.items():
            if key == "solver" and isinstance(value, dict) and isinstance(values.get("solver"), dict):
                values["solver"].update(value)
            else:
                values[key] = copy.deepcopy(value)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default = None):
        return self.values.get(key, default)

    def validate(self):
        errors = ConfigValidator().validate(self.values, self.command)
        if errors:
            raise ValidationException("invalid configuration: " + "; ".join(str(e) for e in errors), errors)

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_dict(self.values.get("solver"))

    def to_json(self) -> str:
        return json.dumps({"command": self.command, **self.values}, indent = 4, sort_keys = True)

def parse_solver_setting(text):
    """ KEY=VALUE with a JSON value, e.g. max_iterations=200 """
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"solver setting {key} needs a JSON value, got {value!r}")

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help = False)
    common.add_argument("--config", help = "JSON config file; flags override its values")
    common.add_argument("--output", help = "output directory")
    common.add_argument("--seed", type = int)
    common.add_argument("--model", choices = ["patrol", "quadratic"])
    common.add_argument("--graph", help = "edge list file, or cycle:N, grid:RxC, random:N[:EXTRA]")
    common.add_argument("--anchors", type = float, nargs = "+", help = "anchor points of the quadratic model")
    common.add_argument("--bounds", type = float, nargs = 2, metavar = ("LOWER", "UPPER"))
    common.add_argument("--reference", type = float, nargs = "+", help = "reference masses (default uniform)")
    common.add_argument("--threads", type = int, help = "parallel solves (default DDRO_THREADS or the core count)")
    common.add_argument("--solver", type = parse_solver_setting, action = "append", metavar = "KEY=VALUE")
    common.add_argument("-v", "--verbose", action = "count", default = 0)
    common.add_argument("-q", "--quiet", action = "store_true")

    parser = argparse.ArgumentParser(prog = "ddro", description = "Discrete distributionally robust optimization")
    commands = parser.add_subparsers(dest = "command", required = True)

    solve = commands.add_parser("solve", parents = [common], help = "solve one DDRO (or expected-cost) problem")
    solve.add_argument("--ball", help = "l2 or dr")
    solve.add_argument("--radius", type = float)
    solve.add_argument("--beta", type = float, help = "probability level of the dr ball; radius = beta / (1 - beta)")
    solve.add_argument("--soc", action = "store_true", default = None, help = "minimize the expected cost instead")
    solve.add_argument("--eval-betas", type = float, nargs = "*", dest = "eval_betas")

    pareto = commands.add_parser("pareto", parents = [common], help = "sweep the weighted-L2 radius")
    pareto.add_argument("--radii", type = float, nargs = "*")

    table = commands.add_parser("cvar-table", parents = [common], help = "cross-evaluate patrol designs")
    table.add_argument("--design-betas", type = float, nargs = "*", dest = "design_betas")
    table.add_argument("--eval-betas", type = float, nargs = "*", dest = "eval_betas")
    table.add_argument("--l2", action = "store_true", default = None, help = "mean + c*std designs instead of CVaR")
    table.add_argument("--design-radii", type = float, nargs = "*", dest = "design_radii")
    table.add_argument("--eval-weights", type = float, nargs = "*", dest = "eval_weights")

    verify = commands.add_parser("verify", parents = [common], help = "run the property suites")
    verify.add_argument("--quick", action = "store_true", default = None)
    verify.add_argument("--suite", action = "append", dest = "suites", help = "run only the named suite")
    verify.add_argument("--corrupt-gradient", action = "store_true", default = None, dest = "corrupt_gradient", help = argparse.SUPPRESS)

    return parser

FLAG_KEYS = ("output", "seed", "model", "graph", "anchors", "bounds", "reference", "threads",
             "ball", "radius", "beta", "soc", "eval_betas", "radii",
             "design_betas", "design_radii", "l2", "eval_weights", "quick", "corrupt_gradient")

def overrides_from(args) -> dict:
    overrides = {key: getattr(args, key) for key in FLAG_KEYS if getattr(args, key, None) is not None}
    if args.solver:
        overrides["solver"] = dict(args.solver)
    return overrides

def resolve_graph(spec, seed):
    """ A generator spec (cycle:N, grid:RxC, random:N[:EXTRA]) or an edge list file """
    if spec is None:
        spec = "random:20"
    kind, _, rest = spec.partition(":")
    if kind in ("cycle", "grid", "random") and rest and not FileUtils.is_file(spec):
        try:
            if kind == "cycle":
                return cycle_graph(int(rest))
            elif kind == "grid":
                rows, cols = rest.lower().split("x")
                return grid_graph(int(rows), int(cols))
            nodes, _, extra = rest.partition(":")
            nodes = int(nodes)
            return random_connected_graph(nodes, int(extra) if extra else nodes // 2, np.random.default_rng(seed))
        except ValueError as error:
            raise ValueError(f"bad graph generator {spec!r}: {error}")
    return read_graph(spec)

def build_model(config: RunConfig):
    """ The cost model and reference distribution a run optimizes over """
    if config["model"] == "quadratic":
        lower, upper = config["bounds"]
        model = QuadraticCostModel(config["anchors"], lower, upper)
    else:
        model = HittingTimeCost(resolve_graph(config.get("graph"), config["seed"]))

    if config.get("reference") is None:
        return model, uniform_reference(model.outcomes)
    return model, reference_distribution(config["reference"])

def write_json(path, data):
    with open(path, "w", encoding = "utf-8") as file:
        file.write(json.dumps(data, indent = 4) + "\n")

def write_csv(path, frame: pd.DataFrame):
    frame.to_csv(path, index = False, float_format = "%.17g")

def prepare_output(config: RunConfig) -> str:
    output = FileUtils.ensure_directory(config["output"])
    with open(os.path.join(output, "config.json"), "w", encoding = "utf-8") as file:
        file.write(config.to_json() + "\n")
    return output

def cmd_solve(config: RunConfig) -> int:
    config.validate()
    model, ref = build_model(config)
    output = prepare_output(config)
    solver = DDROSolver(config.solver_config())

    if config.get("soc"):
        report = solver.solve_soc(model, ref)
    else:
        kind = BallKind.parse(config["ball"])
        radius = radius_from_beta(config["beta"]) if config.get("beta") is not None else config["radius"]
        report = solver.solve_ddro(model, ref, kind, radius)

    Debug.explain(report)
    result = report.to_dict()
    result["summary"] = summarize(report.costs, ref, config["eval_betas"]).to_dict()
    write_json(os.path.join(output, "report.json"), result)
    report.write_history(os.path.join(output, "history.csv"))

    print(f"objective {report.objective:.10g} converged={report.converged} iterations={report.iterations}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED

def cmd_pareto(config: RunConfig) -> int:
    config.validate()
    model, ref = build_model(config)
    output = prepare_output(config)

    points = DDROSolver(config.solver_config()).pareto_sweep(model, ref, config["radii"], BallKind.WEIGHTED_L2, config.get("threads"))
    frame = pd.DataFrame(
        [{"c": p.c, "mean": p.mean, "std": p.std, "objective": p.objective, "converged": p.converged, "error": p.error or ""} for p in points],
        columns = ["c", "mean", "std", "objective", "converged", "error"])
    write_csv(os.path.join(output, "pareto.csv"), frame)

    for p in points:
        print(f"c={p.c:g} mean={p.mean:.10g} std={p.std:.10g} converged={p.converged}")
    return EXIT_OK if all(p.converged for p in points) else EXIT_NOT_CONVERGED

def cmd_cvar_table(config: RunConfig) -> int:
    config.validate()
    graph = resolve_graph(config.get("graph"), config["seed"])
    output = prepare_output(config)
    solver_config = config.solver_config()

    if config.get("l2"):
        frame = mean_std_table(graph, config["design_radii"], config["eval_weights"], solver_config, config.get("threads"))
    else:
        frame = cvar_table(graph, config["design_betas"], config["eval_betas"], solver_config, config.get("threads"))
    write_csv(os.path.join(output, "table.csv"), frame)

    print(frame.to_string(index = False))
    return EXIT_OK if bool(frame["converged"].all()) else EXIT_NOT_CONVERGED

def cmd_verify(config: RunConfig, suites = None) -> int:
    config.validate()
    output = prepare_output(config)

    results = run_suites(config["seed"], bool(config.get("quick")), bool(config.get("corrupt_gradient")), suites)
    frame = pd.DataFrame([{"suite": r.name, "passed": r.passed, "checks": r.checks, "detail": r.detail} for r in results],
                         columns = ["suite", "passed", "checks", "detail"])
    write_csv(os.path.join(output, "verify.csv"), frame)

    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name} ({result.checks} checks)")

    failure = first_failure(results)
    if failure is not None:
        Debug.log_error(f"verification failed: {failure.name}: {failure.detail}")
        return EXIT_VERIFY_FAILED
    return EXIT_OK

COMMANDS = {
    "solve": cmd_solve,
    "pareto": cmd_pareto,
    "cvar-table": cmd_cvar_table,
}

def main(argv = None) -> int:
    args = build_parser().parse_args(argv)

    stream = Debug.stream if Debug.stream is not None else sys.stderr
    Debug.color = hasattr(stream, "isatty") and stream.isatty()
    Debug.level = 1 if args.quiet else 2 + args.verbose

    try:
        config = RunConfig.load(args.command, args.config, overrides_from(args))
        if args.command == "verify":
            return cmd_verify(config, args.suites)
        return COMMANDS[args.command](config)
    except ValidationException as error:
        for each in error.errors:
            Debug.log_error(str(each))
        return EXIT_INPUT_ERROR
    except FileNotFoundError as error:
        Debug.log_error(f"file not found: {error.filename}")
        return EXIT_INPUT_ERROR
    except (DDROError, ValueError, OSError) as error:
        Debug.log_error(str(error))
        return EXIT_INPUT_ERROR

if __name__ == "__main__":
    sys.exit(main())

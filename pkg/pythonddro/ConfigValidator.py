"""
Validates an effective run configuration before any solve starts.
Collects every problem instead of stopping at the first one.
"""

from numbers import Real
from typing import List

from .distributions import BallKind
from .errors import ValidationError

SUPPORTED_MODELS = ("patrol", "quadratic")

class ConfigValidator(object):
    def validate(self, config: dict, command: str) -> List[ValidationError]:
        self.config = config
        self.validation_errors: list = []

        self.validate_common()
        if command == "solve":
            self.validate_solve()
        elif command == "pareto":
            self.validate_list("radii", lower = 0.0, inclusive = False, non_empty = True, ascending = True)
        elif command == "cvar-table":
            self.validate_table()

        return self.validation_errors

    def validate_common(self):
        seed = self.config.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            self.add_error("seed", seed, "seed must be a non-negative integer")

        model = self.config.get("model")
        if model not in SUPPORTED_MODELS:
            self.add_error("model", model, "model must be one of ({})".format(", ".join(SUPPORTED_MODELS)))

        graph = self.config.get("graph")
        if graph is not None and not isinstance(graph, str):
            self.add_error("graph", graph, "graph must be a file path or a generator such as cycle:5")

        if model == "quadratic":
            self.validate_list("anchors", non_empty = True)
            bounds = self.config.get("bounds")
            if not self.is_number_list(bounds) or len(bounds) != 2 or not bounds[0] < bounds[1]:
                self.add_error("bounds", bounds, "bounds must be two numbers [lower, upper] with lower < upper")

        reference = self.config.get("reference")
        if reference is not None:
            if not self.is_number_list(reference) or not reference or min(reference) <= 0.0:
                self.add_error("reference", reference, "reference must be a list of positive masses")
            elif abs(sum(reference) - 1.0) > 1e-9:
                self.add_error("reference", reference, "reference masses must sum to 1")

        threads = self.config.get("threads")
        if threads is not None and (isinstance(threads, bool) or not isinstance(threads, int) or threads < 1):
            self.add_error("threads", threads, "threads must be a positive integer")

        if not isinstance(self.config.get("solver", {}), dict):
            self.add_error("solver", self.config.get("solver"), "solver settings must be a JSON object")

    def validate_solve(self):
        if self.config.get("soc"):
            self.validate_list("eval_betas", lower = 0.0, upper = 1.0)
            return

        try:
            kind = BallKind.parse(self.config.get("ball"))
        except ValueError as error:
            self.add_error("ball", self.config.get("ball"), str(error))
            return
        if kind is BallKind.TOTAL_VARIATION:
            self.add_error("ball", self.config.get("ball"), "the tv ball can be evaluated but not optimized; use l2 or dr")

        radius = self.config.get("radius")
        beta = self.config.get("beta")
        if radius is not None and beta is not None:
            self.add_error("radius", radius, "give either radius or beta, not both")
        elif beta is not None:
            if kind is not BallKind.DENSITY_RATIO:
                self.add_error("beta", beta, "beta only applies to the dr ball")
            elif not self.is_number(beta) or not 0.0 < beta < 1.0:
                self.add_error("beta", beta, "beta must lie in (0, 1)")
        elif radius is None:
            self.add_error("radius", radius, "a radius (or beta for the dr ball) is required")
        elif not self.is_number(radius) or not radius > 0.0:
            self.add_error("radius", radius, "radius must be positive")

        self.validate_list("eval_betas", lower = 0.0, upper = 1.0)

    def validate_table(self):
        if self.config.get("model") != "patrol":
            self.add_error("model", self.config.get("model"), "cvar tables are computed for the patrol model")
        if self.config.get("l2"):
            self.validate_list("design_radii", lower = 0.0, non_empty = True)
            self.validate_list("eval_weights", lower = 0.0, non_empty = True)
        else:
            self.validate_list("design_betas", lower = 0.0, upper = 1.0, non_empty = True)
            self.validate_list("eval_betas", lower = 0.0, upper = 1.0, non_empty = True)

    def validate_list(self, name, lower = None, upper = None, inclusive = True, non_empty = False, ascending = False):
        """ Numbers in [lower, upper) (or (lower, upper) when not inclusive) """
        values = self.config.get(name)
        if not self.is_number_list(values):
            self.add_error(name, values, f"{name} must be a list of numbers")
            return
        if non_empty and not values:
            self.add_error(name, values, f"{name} must not be empty")
            return

        for value in values:
            if lower is not None and (value < lower or (not inclusive and value == lower)):
                self.add_error(name, value, "value must be {} {}".format(">=" if inclusive else ">", lower))
            if upper is not None and value >= upper:
                self.add_error(name, value, f"value must be < {upper}")

        if ascending and any(b < a for a, b in zip(values, values[1:])):
            self.add_error(name, values, f"{name} must be sorted ascending")

    def is_number(self, value) -> bool:
        return isinstance(value, Real) and not isinstance(value, bool)

    def is_number_list(self, values) -> bool:
        return isinstance(values, list) and all(self.is_number(v) for v in values)

    def add_error(self, field, value, error):
        self.validation_errors.append(ValidationError(field, value, error))

"""
Discrete distributions, density ratios, and the ambiguity balls around a
reference distribution.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NegativeMass, NonPositiveRadius, NonPositiveReference, NotNormalized, ProbabilityLevelOutOfRange
from .presets import ball_aliases
from .utils import ArrayUtils

NEGATIVE_TOLERANCE = 1e-12
NORMALIZATION_TOLERANCE = 1e-9
MEMBERSHIP_TOLERANCE = 1e-12

class BallKind(Enum):
    WEIGHTED_L2 = "l2"
    DENSITY_RATIO = "dr"
    TOTAL_VARIATION = "tv"

    @classmethod
    def parse(cls, name) -> "BallKind":
        if isinstance(name, BallKind):
            return name
        ball_id = ball_aliases.get(str(name).lower())
        if ball_id is None:
            raise ValueError("'{}' is not a supported ball kind. Valid kinds include: ({})".format(
                name, ", ".join(kind.value for kind in cls)))
        return cls(ball_id)

@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """ Probability mass over the outcomes 0..m-1 """
    mass: np.ndarray

    @property
    def m(self) -> int:
        return len(self.mass)

    def __len__(self):
        return len(self.mass)

    def expectation(self, values) -> float:
        values = ArrayUtils.as_vector(values, "values")
        ArrayUtils.check_length(values, self.m, "values")
        return ArrayUtils.expectation(values, self.mass)

    def to_json(self) -> str:
        return json.dumps([float(v) for v in self.mass])

@dataclass(frozen=True, eq=False)
class ReferenceDistribution(DiscreteDistribution):
    """ A distribution usable as the centre of a ball: every outcome has positive mass """

    def __post_init__(self):
        if np.any(self.mass <= 0.0):
            index = int(np.argmin(self.mass))
            raise NonPositiveReference(f"reference mass must be strictly positive, outcome {index} has {self.mass[index]!r}")

@dataclass(frozen=True, eq=False)
class DensityRatioVector:
    ratio: np.ndarray

@dataclass(frozen=True, eq=False)
class Ball:
    kind: BallKind
    radius: float
    reference: ReferenceDistribution

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0.0:
            raise NonPositiveRadius(f"radius must be positive, got {self.radius!r}")

    @property
    def m(self) -> int:
        return self.reference.m

    def contains(self, p) -> bool:
        return ball_contains(self, p)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "radius": float(self.radius), "reference": [float(v) for v in self.reference.mass]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Ball":
        missing = [key for key in ("kind", "radius", "reference") if key not in data]
        if missing:
            raise ValueError("Ball descriptor is missing {}".format(", ".join(missing)))
        return cls(BallKind.parse(data["kind"]), float(data["radius"]), reference_distribution(data["reference"]))

    @classmethod
    def from_json(cls, text: str) -> "Ball":
        return cls.from_dict(json.loads(text))

def validate_distribution(mass) -> DiscreteDistribution:
    return DiscreteDistribution(_validated_mass(mass))

def reference_distribution(mass) -> ReferenceDistribution:
    return ReferenceDistribution(_validated_mass(mass))

def uniform_reference(m: int) -> ReferenceDistribution:
    if m < 1:
        raise ValueError(f"a distribution needs at least one outcome, got m={m}")
    return ReferenceDistribution(ArrayUtils.frozen(np.full(m, 1.0 / m)))

def as_distribution(p) -> DiscreteDistribution:
    if isinstance(p, DiscreteDistribution):
        return p
    return validate_distribution(p)

def _validated_mass(mass) -> np.ndarray:
    mass = ArrayUtils.as_vector(mass, "mass")

    if np.any(mass < -NEGATIVE_TOLERANCE):
        index = int(np.argmin(mass))
        raise NegativeMass(f"probability mass must be non-negative, outcome {index} has {mass[index]!r}")

    total = float(np.sum(mass))
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise NotNormalized(f"probability mass sums to {total!r}, expected 1")

    # round-off negatives are clipped, the sum is left as given
    return ArrayUtils.frozen(np.maximum(mass, 0.0))

def density_ratio(p, ref: ReferenceDistribution) -> DensityRatioVector:
    p = as_distribution(p)
    if p.m != ref.m:
        raise DimensionMismatch(f"distribution has {p.m} outcomes, reference has {ref.m}")
    return DensityRatioVector(ArrayUtils.frozen(p.mass / ref.mass))

def ball_distance(kind, ref: ReferenceDistribution, p) -> float:
    """ Statistical distance of p from ref in the geometry of the given ball kind """
    kind = BallKind.parse(kind)
    ratio = density_ratio(p, ref).ratio

    if kind is BallKind.WEIGHTED_L2:
        return float(np.sqrt(np.dot(ref.mass, (ratio - 1.0) ** 2)))
    elif kind is BallKind.DENSITY_RATIO:
        # E_ref[r] = 1 forces max r >= 1; clip round-off below zero
        return max(float(np.max(ratio)) - 1.0, 0.0)
    else:
        return float(np.dot(ref.mass, np.abs(ratio - 1.0)))

def ball_contains(ball: Ball, p) -> bool:
    return ball_distance(ball.kind, ball.reference, p) <= ball.radius + MEMBERSHIP_TOLERANCE

def minimal_radius(kind, ref: ReferenceDistribution, p) -> float:
    return ball_distance(kind, ref, p)

def beta_from_radius(radius: float) -> float:
    """ Probability level matching a density-ratio ball of this radius """
    if radius < 0.0:
        raise NonPositiveRadius(f"radius must be non-negative, got {radius!r}")
    return radius / (1.0 + radius)

def radius_from_beta(beta: float) -> float:
    if not 0.0 <= beta < 1.0:
        raise ProbabilityLevelOutOfRange(f"probability level must lie in [0, 1), got {beta!r}")
    return beta / (1.0 - beta)

def sample_dirichlet(rng: np.random.Generator, m: int, count: int) -> np.ndarray:
    """ count x m draws, uniform over the probability simplex """
    return rng.dirichlet(np.ones(m), size = count)

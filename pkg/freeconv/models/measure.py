from dataclasses import dataclass
import math
from typing import Tuple, Union

import numpy as np

from freeconv.errors import InvalidParameter

WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AtomicMeasure:
    locations: np.ndarray
    weights: np.ndarray

    def __init__(self, locations, weights, normalize: bool = False):
        locations = np.array(locations, dtype=float).reshape(-1)
        weights = np.array(weights, dtype=float).reshape(-1)

        if locations.size == 0 or locations.size != weights.size:
            raise InvalidParameter(f"need matching non-empty locations and weights, got {locations.size} and {weights.size}")
        if not np.all(np.isfinite(locations)) or not np.all(np.isfinite(weights)):
            raise InvalidParameter("atom locations and weights must be finite")
        if np.any(weights <= 0):
            raise InvalidParameter(f"atom weights must be positive, got min {weights.min()!r}")
        if np.any(np.diff(locations) <= 0):
            raise InvalidParameter("atom locations must be strictly increasing")

        total = math.fsum(weights)
        if normalize:
            weights = weights / total
        elif abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidParameter(f"atom weights must sum to 1, got {total!r}")

        locations.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "weights", weights)

    @property
    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(zip(self.locations.tolist(), self.weights.tolist()))

    @property
    def n_atoms(self) -> int:
        return int(self.locations.size)

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.locations[0]), float(self.locations[-1])

    @property
    def support_radius(self) -> float:
        return float(np.max(np.abs(self.locations)))

    @property
    def is_point_mass(self) -> bool:
        return self.n_atoms == 1

    def mass_at(self, x: float) -> float:
        idx = np.searchsorted(self.locations, x)
        if idx < self.n_atoms and self.locations[idx] == x:
            return float(self.weights[idx])
        return 0.0

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return np.array_equal(self.locations, other.locations) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.locations.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"AtomicMeasure(atoms={list(self.atoms)!r})"


@dataclass(frozen=True)
class SemicircleMeasure:
    center: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.variance)):
            raise InvalidParameter("semicircle parameters must be finite")
        if self.variance <= 0:
            raise InvalidParameter(f"semicircle variance must be > 0, got {self.variance!r}")

    @property
    def radius(self) -> float:
        return 2.0 * math.sqrt(self.variance)

    @property
    def support(self) -> Tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    @property
    def support_radius(self) -> float:
        return abs(self.center) + self.radius

    @property
    def is_point_mass(self) -> bool:
        return False

    def mass_at(self, x: float) -> float:
        return 0.0


Measure = Union[AtomicMeasure, SemicircleMeasure]

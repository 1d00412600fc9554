from dataclasses import dataclass
import math
from typing import Optional, Tuple

import numpy as np

from freeconv.errors import InvalidParameter
from freeconv.grids import loglog_slope
from freeconv.models.measure import AtomicMeasure, Measure

GROUPS = ("unitary", "orthogonal")


@dataclass(frozen=True)
class EnsembleConfig:
    n: int
    group: str
    spec_a: Measure
    spec_b: Measure
    seed: int
    trials: int = 20
    center: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameter(f"matrix size must be >= 2, got {self.n!r}")
        if self.group not in GROUPS:
            raise InvalidParameter(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.trials < 1:
            raise InvalidParameter(f"need at least one trial, got {self.trials!r}")
        if self.seed < 0:
            raise InvalidParameter(f"seed must be a non-negative integer, got {self.seed!r}")
        for name, mu in (("spec_a", self.spec_a), ("spec_b", self.spec_b)):
            if isinstance(mu, AtomicMeasure):
                scaled = mu.weights * self.n
                if np.any(np.abs(scaled - np.round(scaled)) > 1e-9):
                    raise InvalidParameter(f"{name} weights are not multiples of 1/{self.n}")


@dataclass(frozen=True, eq=False)
class TrialResult:
    index: int
    eigenvalues: np.ndarray
    shift: float = 0.0
    # diag(W* Q W) in the eigenbasis W of H, for Q = A and Q = U B U*
    weights_a: Optional[np.ndarray] = None
    weights_b: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.eigenvalues.size)


@dataclass(frozen=True)
class LocalLawRow:
    E: float
    eta: float
    n: int
    median_err: float
    max_err: float
    envelope: float
    fluct_std: float


@dataclass(frozen=True)
class LocalLawReport:
    rows: Tuple[LocalLawRow, ...]
    trials: int
    shift_a: float = 0.0
    shift_b: float = 0.0

    def __len__(self):
        return len(self.rows)

    def row(self, E: float, eta: float) -> LocalLawRow:
        for row in self.rows:
            if row.E == E and row.eta == eta:
                return row
        raise KeyError((E, eta))


@dataclass(frozen=True)
class CountingReport:
    E1: float
    E2: float
    n: int
    reference_mass: float
    counts: Tuple[int, ...]
    errors: Tuple[float, ...]

    @property
    def envelope(self) -> float:
        return self.n ** (-2.0 / 3.0)

    @property
    def masses(self) -> Tuple[float, ...]:
        return tuple(count / self.n for count in self.counts)

    def within(self, exponent_slack: float = 0.1) -> int:
        """Number of trials whose error is at most n^(-2/3 + exponent_slack)."""
        bound = self.n ** (-2.0 / 3.0 + exponent_slack)
        return sum(1 for err in self.errors if err <= bound)

    def rows(self):
        return [
            {"trial": i, "count": count, "mass": count / self.n, "reference": self.reference_mass, "error": err, "envelope": self.envelope}
            for i, (count, err) in enumerate(zip(self.counts, self.errors))
        ]


@dataclass(frozen=True)
class ConcentrationRow:
    z: complex
    std: float
    envelope: float

    @property
    def ratio(self) -> float:
        return self.std / self.envelope


@dataclass(frozen=True)
class ConcentrationReport:
    q_spec: str
    n: int
    rows: Tuple[ConcentrationRow, ...]

    def slope(self) -> float:
        """log-log slope of the sample std against eta."""
        return loglog_slope([row.z.imag for row in self.rows], [row.std for row in self.rows])


@dataclass(frozen=True)
class SubordinationEstimate:
    z: complex
    omega_a_c: complex
    omega_b_c: complex
    omega_a: complex
    omega_b: complex
    std_error: float
    sum_identity_residual: float

    @property
    def distance(self) -> float:
        return abs(self.omega_a_c - self.omega_a) + abs(self.omega_b_c - self.omega_b)

    @property
    def consistent(self) -> bool:
        return math.isfinite(self.distance) and self.distance <= 5 * self.std_error

from dataclasses import dataclass
import math
from typing import Iterator, Tuple

import numpy as np
from scipy.integrate import trapezoid

from freeconv.errors import InvalidParameter


@dataclass(frozen=True, eq=False)
class DensityGrid:
    x: np.ndarray
    f: np.ndarray
    eta_used: float
    residual_max: float
    status: Tuple[str, ...] = ()

    @property
    def points(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(zip(self.x.tolist(), self.f.tolist()))

    @property
    def mass(self) -> float:
        return float(trapezoid(self.f, self.x))

    @property
    def errors(self) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.status) if s == "error")

    def rows(self):
        return [{"x": x, "f": f} for x, f in self.points]


@dataclass(frozen=True)
class AtomList:
    atoms: Tuple[Tuple[float, float], ...] = ()

    @property
    def total_mass(self) -> float:
        return math.fsum(mass for _, mass in self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self.atoms)

    def rows(self):
        return [{"loc": loc, "mass": mass} for loc, mass in self.atoms]


@dataclass(frozen=True)
class BulkIntervals:
    intervals: Tuple[Tuple[float, float], ...]
    threshold: float

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def contains(self, x: float) -> bool:
        return any(lo < x < hi for lo, hi in self.intervals)

    @property
    def widest(self) -> Tuple[float, float]:
        return max(self.intervals, key=lambda iv: iv[1] - iv[0])

    def rows(self):
        return [{"lo": lo, "hi": hi} for lo, hi in self.intervals]


@dataclass(frozen=True)
class ContinuityReport:
    max_lhs: float
    dL_sum: float
    empirical_Z: float
    max_cross_residual: float = 0.0
    max_omega_shift: float = 0.0

    def rows(self):
        return [{
            "max_lhs": self.max_lhs,
            "dL_sum": self.dL_sum,
            "empirical_Z": self.empirical_Z,
            "max_cross_residual": self.max_cross_residual,
            "max_omega_shift": self.max_omega_shift,
        }]


@dataclass(frozen=True)
class TwoPointParams:
    xi: float
    zeta: float
    theta: float

    def __post_init__(self):
        if not (0.0 < self.xi <= 0.5 and 0.0 < self.zeta <= 0.5):
            raise InvalidParameter(f"xi and zeta must lie in (0, 1/2], got xi={self.xi!r}, zeta={self.zeta!r}")
        if self.xi > self.zeta:
            raise InvalidParameter(f"need xi <= zeta, got xi={self.xi!r} > zeta={self.zeta!r}")
        if self.theta == 0 or not math.isfinite(self.theta):
            raise InvalidParameter(f"theta must be finite and non-zero, got {self.theta!r}")
        if (self.theta, self.xi, self.zeta) == (-1.0, 0.5, 0.5):
            raise InvalidParameter("(theta, xi, zeta) = (-1, 1/2, 1/2) is a shift of (1, 1/2, 1/2); use that instead")

    @property
    def is_equal_case(self) -> bool:
        return self.theta == 1.0 and self.xi == self.zeta

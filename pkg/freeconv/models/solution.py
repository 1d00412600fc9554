from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from freeconv.errors import InvalidParameter


@dataclass(frozen=True)
class SolverOptions:
    fp_tol: float = 1e-13
    newton_tol: float = 1e-11
    max_iter: int = 10000
    eta_floor: float = 1e-12
    newton_max_iter: int = 60
    max_halvings: int = 40

    def __post_init__(self):
        if min(self.fp_tol, self.newton_tol, self.eta_floor) <= 0:
            raise InvalidParameter("solver tolerances and eta_floor must be > 0")
        if self.max_iter < 1 or self.newton_max_iter < 1 or self.max_halvings < 1:
            raise InvalidParameter("iteration limits must be >= 1")


@dataclass(frozen=True)
class SubordinationPair:
    z: complex
    omega1: complex
    omega2: complex
    residual_norm: float
    iterations: int = 0
    kantorovich: Optional[float] = None

    @property
    def eta(self) -> float:
        return self.z.imag

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.omega1, self.omega2], dtype=complex)

    @property
    def min_im_omega(self) -> float:
        return min(self.omega1.imag, self.omega2.imag)

    def swapped(self) -> "SubordinationPair":
        return replace(self, omega1=self.omega2, omega2=self.omega1)


@dataclass(frozen=True)
class Sweep:
    pairs: Tuple[SubordinationPair, ...]
    failure_index: Optional[int] = None
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure_index is None

    @property
    def last(self) -> SubordinationPair:
        return self.pairs[-1]

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


@dataclass(frozen=True, eq=False)
class StabilityReport:
    energies: Tuple[float, ...]
    etas: Tuple[float, ...]
    gamma: np.ndarray
    min_im_omega: float
    max_gamma: float
    max_abs_omega: float
    bulk: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)
    failures: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.gamma)))

    def rows(self) -> List[Tuple[float, float, float]]:
        return [
            (E, eta, float(self.gamma[i, j]))
            for i, E in enumerate(self.energies)
            for j, eta in enumerate(self.etas)
        ]

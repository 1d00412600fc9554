import math
from typing import List, Sequence, Tuple

import numpy as np

from freeconv import config


def eta_ladder(eta_hi: float, eta_lo: float, n_steps: int) -> np.ndarray:
    """Geometric grid from eta_hi down to eta_lo with n_steps + 1 points, endpoints exact."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    ladder = np.geomspace(eta_hi, eta_lo, n_steps + 1)
    ladder[0], ladder[-1] = eta_hi, eta_lo
    return ladder


def steps_for(eta_hi: float, eta_lo: float) -> int:
    decades = math.log10(eta_hi / eta_lo) if eta_hi > eta_lo else 0.0
    return max(1, math.ceil(config.SWEEP_STEPS_PER_DECADE * decades))


def runs(mask: Sequence[bool]) -> List[Tuple[int, int]]:
    """Maximal runs of True as inclusive (first, last) index pairs."""
    found = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            found.append((start, i - 1))
            start = None
    if start is not None:
        found.append((start, len(mask) - 1))
    return found


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from freeconv import config, grids
from freeconv.errors import InvalidParameter, NonPositiveImaginaryPart, SolverFailure
from freeconv.measures import levy_distance, neg_reciprocal, stieltjes
from freeconv.models.measure import AtomicMeasure, Measure
from freeconv.models.solution import SolverOptions, SubordinationPair
from freeconv.models.spectrum import AtomList, BulkIntervals, ContinuityReport, DensityGrid
from freeconv.subordination import gamma_stability, solve, sweep_eta

logger = logging.getLogger(__name__)

BULK_THRESHOLD = 1e-3
# density below this counts as outside the support when classifying failures
EDGE_LEVEL = 1e-6
EDGE_CELLS = 2


def subordination_at(mu1: Measure, mu2: Measure, z: complex, opts: Optional[SolverOptions] = None, eta_eval: Optional[float] = None) -> SubordinationPair:
    """Subordination pair at z; real z is lifted to x + i*eta_eval.

    Heights below ETA_SWEEP_BELOW are reached by continuation in eta from
    ETA_SWEEP_START instead of a direct solve.
    """
    z = complex(z)
    if z.imag < 0:
        raise NonPositiveImaginaryPart(z)
    if z.imag == 0:
        z = complex(z.real, config.ETA_EVAL if eta_eval is None else eta_eval)
    if z.imag >= config.ETA_SWEEP_BELOW:
        return solve(mu1, mu2, z, opts)

    start = config.ETA_SWEEP_START
    sweep = sweep_eta(mu1, mu2, z.real, start, z.imag, grids.steps_for(start, z.imag), opts)
    if not sweep.ok:
        last_good = sweep.last.eta if sweep.pairs else None
        raise SolverFailure(
            f"no solution at z={z}: eta continuation stopped, last good eta = {last_good!r} ({sweep.failure})",
            last=sweep.last if sweep.pairs else None,
        )
    return sweep.last


def convolve_stieltjes(mu1: Measure, mu2: Measure, z: complex, opts: Optional[SolverOptions] = None, eta_eval: Optional[float] = None) -> complex:
    """Stieltjes transform of mu1 boxplus mu2, m(z) = m_{mu1}(omega2(z))."""
    pair = subordination_at(mu1, mu2, z, opts, eta_eval)
    return complex(stieltjes(mu1, pair.omega2))


def _density_from(mu1: Measure, pair: SubordinationPair) -> float:
    return max(complex(stieltjes(mu1, pair.omega2)).imag / math.pi, 0.0)


def density(
    mu1: Measure,
    mu2: Measure,
    x: float,
    eta_eval: Optional[float] = None,
    richardson: bool = False,
    opts: Optional[SolverOptions] = None,
) -> float:
    """Im m(x + i*eta_eval)/pi, clamped at 0.

    With richardson=True the O(eta) bias is cancelled by 2 f(eta) - f(2 eta).
    """
    eta = config.ETA_EVAL if eta_eval is None else eta_eval
    f = _density_from(mu1, subordination_at(mu1, mu2, complex(x, eta), opts))
    if richardson:
        coarse = _density_from(mu1, subordination_at(mu1, mu2, complex(x, 2 * eta), opts))
        f = max(2.0 * f - coarse, 0.0)
    return f


def _classify_failures(f: np.ndarray, failed: List[int]) -> List[str]:
    status = ["ok"] * len(f)
    good = np.ones(len(f), dtype=bool)
    good[failed] = False
    for i in failed:
        lo, hi = max(0, i - EDGE_CELLS), min(len(f), i + EDGE_CELLS + 1)
        window = f[lo:hi][good[lo:hi]]
        inside = window > EDGE_LEVEL
        status[i] = "edge" if inside.any() and (~inside).any() else "error"
    return status


def _atom_lorentzian(xs: np.ndarray, found: AtomList, eta: float, richardson: bool) -> np.ndarray:
    """Share of Im m / pi carried by the atoms at height eta."""
    out = np.zeros(len(xs))
    for c, mass in found.atoms:
        at_eta = mass * eta / (math.pi * ((xs - c) ** 2 + eta ** 2))
        if richardson:
            at_2eta = mass * 2 * eta / (math.pi * ((xs - c) ** 2 + 4 * eta ** 2))
            at_eta = 2.0 * at_eta - at_2eta
        out += at_eta
    return out


def _evaluate(mu1, mu2, xs, eta, richardson, opts):
    f = np.zeros(len(xs))
    gamma = np.full(len(xs), math.inf)
    residual_max = 0.0
    failed = []
    for i, x in enumerate(xs):
        try:
            pair = subordination_at(mu1, mu2, complex(x, eta), opts)
            value = _density_from(mu1, pair)
            if richardson:
                coarse = _density_from(mu1, subordination_at(mu1, mu2, complex(x, 2 * eta), opts))
                value = max(2.0 * value - coarse, 0.0)
        except SolverFailure as exc:
            logger.debug("density at x=%g failed: %s", x, exc)
            failed.append(i)
            continue
        f[i] = value
        gamma[i] = gamma_stability(mu1, mu2, pair.omega1, pair.omega2)
        residual_max = max(residual_max, pair.residual_norm)

    if isinstance(mu1, AtomicMeasure) and isinstance(mu2, AtomicMeasure):
        found = atoms(mu1, mu2)
        if found.atoms:
            f = np.maximum(f - _atom_lorentzian(xs, found, eta, richardson), 0.0)

    status = _classify_failures(f, failed)
    errors = status.count("error")
    if errors:
        logger.warning("%d of %d density points failed away from any edge", errors, len(xs))
    return f, gamma, residual_max, tuple(status)


def density_grid(
    mu1: Measure,
    mu2: Measure,
    x_lo: float,
    x_hi: float,
    n: int,
    eta_eval: Optional[float] = None,
    richardson: bool = False,
    opts: Optional[SolverOptions] = None,
) -> DensityGrid:
    """Density at n uniform points of [x_lo, x_hi].

    Points where the solver fails are set to 0 and marked "edge" when they
    sit within two cells of a change between zero and positive density,
    "error" otherwise.
    """
    if not x_lo < x_hi:
        raise InvalidParameter(f"need x_lo < x_hi, got {x_lo!r}, {x_hi!r}")
    if n < 2:
        raise InvalidParameter(f"need n >= 2 grid points, got {n!r}")
    eta = config.ETA_EVAL if eta_eval is None else eta_eval
    xs = np.linspace(x_lo, x_hi, n)
    f, _, residual_max, status = _evaluate(mu1, mu2, xs, eta, richardson, opts)
    return DensityGrid(xs, f, eta, residual_max, status)


def atoms(mu1: AtomicMeasure, mu2: AtomicMeasure) -> AtomList:
    """Atoms a + b of mass mu1({a}) + mu2({b}) - 1 for every pair whose masses exceed 1 together."""
    if not (isinstance(mu1, AtomicMeasure) and isinstance(mu2, AtomicMeasure)):
        raise InvalidParameter("atoms of a free convolution need two atomic measures")
    found = {}
    for a, wa in mu1.atoms:
        for b, wb in mu2.atoms:
            if wa + wb > 1.0:
                found[a + b] = found.get(a + b, 0.0) + (wa + wb - 1.0)
    return AtomList(tuple(sorted(found.items())))


def atom_mass_estimate(mu1: Measure, mu2: Measure, c: float, eta: float = 1e-6, opts: Optional[SolverOptions] = None) -> float:
    """eta * Im m(c + i*eta), which tends to the mass of an atom at c."""
    return eta * convolve_stieltjes(mu1, mu2, complex(c, eta), opts).imag


def find_bulk(
    mu1: Measure,
    mu2: Measure,
    x_lo: float,
    x_hi: float,
    n: int,
    threshold: float = BULK_THRESHOLD,
    gamma_max: float = math.inf,
    eta_eval: Optional[float] = None,
    opts: Optional[SolverOptions] = None,
) -> BulkIntervals:
    """Maximal runs of grid points with density above threshold, a clean solve and Gamma <= gamma_max.

    Each run is reported by its first and last grid point; single-point runs are dropped.
    """
    if threshold <= 0:
        raise InvalidParameter(f"bulk threshold must be > 0, got {threshold!r}")
    if not x_lo < x_hi or n < 2:
        raise InvalidParameter(f"bad bulk grid [{x_lo!r}, {x_hi!r}] with n={n!r}")
    eta = config.ETA_EVAL if eta_eval is None else eta_eval
    xs = np.linspace(x_lo, x_hi, n)
    f, gamma, _, status = _evaluate(mu1, mu2, xs, eta, False, opts)

    mask = (f > threshold) & (gamma <= gamma_max) & (np.array(status) == "ok")
    intervals = tuple(
        (float(xs[first]), float(xs[last]))
        for first, last in grids.runs(mask)
        if last > first
    )
    return BulkIntervals(intervals, threshold)


def continuity_check(
    muA: Measure,
    muB: Measure,
    mu_alpha: Measure,
    mu_beta: Measure,
    E_grid: Sequence[float],
    eta_grid: Sequence[float],
    opts: Optional[SolverOptions] = None,
) -> ContinuityReport:
    """Compare muA boxplus muB against the reference mu_alpha boxplus mu_beta over E_grid x eta_grid."""
    max_lhs = 0.0
    max_cross = 0.0
    max_shift = 0.0
    for E in E_grid:
        for eta in eta_grid:
            z = complex(E, eta)
            reference = subordination_at(mu_alpha, mu_beta, z, opts)
            pair = subordination_at(muA, muB, z, opts)
            m_ref = complex(stieltjes(mu_alpha, reference.omega2))
            m = complex(stieltjes(muA, pair.omega2))
            max_lhs = max(max_lhs, abs(m - m_ref))
            max_shift = max(max_shift, float(np.linalg.norm(pair.vector - reference.vector)))

            cross = (
                neg_reciprocal(muA, reference.omega2) - neg_reciprocal(mu_alpha, reference.omega2),
                neg_reciprocal(muB, reference.omega1) - neg_reciprocal(mu_beta, reference.omega1),
            )
            max_cross = max(max_cross, float(np.linalg.norm(cross)))

    dL_sum = levy_distance(muA, mu_alpha) + levy_distance(muB, mu_beta)
    if dL_sum > 0:
        empirical_Z = max_lhs / dL_sum
    else:
        empirical_Z = 0.0 if max_lhs == 0 else math.inf
    logger.info("continuity: max |dm| = %.3e, Levy sum = %.3e, ratio = %.3e", max_lhs, dL_sum, empirical_Z)
    return ContinuityReport(max_lhs, dL_sum, empirical_Z, max_cross, max_shift)

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from freeconv import grids
from freeconv.errors import (
    DomainEscape,
    InvalidParameter,
    MaxIterationsExceeded,
    NonPositiveImaginaryPart,
    SingularJacobian,
    SolverFailure,
)
from freeconv.measures import neg_reciprocal, neg_reciprocal_derivative
from freeconv.models.measure import Measure
from freeconv.models.solution import SolverOptions, StabilityReport, SubordinationPair, Sweep

logger = logging.getLogger(__name__)

DEGENERATE_DETERMINANT = 1e-14
BRANCH_SLACK = 1e-13
ARMIJO = 1e-4
DEFAULT_OPTIONS = SolverOptions()


def _check_omegas(omega1: complex, omega2: complex):
    for omega in (omega1, omega2):
        if omega.imag <= 0:
            raise NonPositiveImaginaryPart(omega)


def phi_residual(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex, z: complex) -> Tuple[complex, complex]:
    """Phi(omega1, omega2, z) = (F1(omega2) - omega1 - omega2 + z, F2(omega1) - omega1 - omega2 + z)."""
    omega1, omega2, z = complex(omega1), complex(omega2), complex(z)
    _check_omegas(omega1, omega2)
    common = z - omega1 - omega2
    return neg_reciprocal(mu1, omega2) + common, neg_reciprocal(mu2, omega1) + common


def _residual(mu1, mu2, w: np.ndarray, z: complex, offset: np.ndarray) -> np.ndarray:
    return np.array(phi_residual(mu1, mu2, w[0], w[1], z), dtype=complex) - offset


def jacobian(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex) -> np.ndarray:
    """Partial Jacobian of Phi in (omega1, omega2); it does not depend on z."""
    omega1, omega2 = complex(omega1), complex(omega2)
    _check_omegas(omega1, omega2)
    a = neg_reciprocal_derivative(mu1, omega2, 1) - 1.0
    b = neg_reciprocal_derivative(mu2, omega1, 1) - 1.0
    return np.array([[-1.0, a], [b, -1.0]], dtype=complex)


def _determinant(jac: np.ndarray) -> complex:
    return 1.0 - jac[0, 1] * jac[1, 0]


def gamma_stability(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex) -> float:
    """Operator norm of the inverse Jacobian; +inf when the determinant degenerates."""
    jac = jacobian(mu1, mu2, omega1, omega2)
    if abs(_determinant(jac)) < DEGENERATE_DETERMINANT:
        return math.inf
    smallest = np.linalg.svd(jac, compute_uv=False)[-1]
    return float(1.0 / smallest)


def second_derivative_norm(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex) -> float:
    """Norm of D^2 Phi = [[0, F1''(omega2)], [F2''(omega1), 0]]."""
    return max(
        abs(neg_reciprocal_derivative(mu1, omega2, 2)),
        abs(neg_reciprocal_derivative(mu2, omega1, 2)),
    )


def kantorovich_guard(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex, residual: Sequence[complex]) -> Tuple[float, float]:
    """Newton-Kantorovich quantity s0 and the certified distance to the root (inf unless s0 <= 1/2)."""
    jac = jacobian(mu1, mu2, omega1, omega2)
    if abs(_determinant(jac)) < DEGENERATE_DETERMINANT:
        return math.inf, math.inf

    gamma = 1.0 / np.linalg.svd(jac, compute_uv=False)[-1]
    step = float(np.linalg.norm(np.linalg.solve(jac, np.asarray(residual, dtype=complex))))
    s0 = gamma * second_derivative_norm(mu1, mu2, omega1, omega2) * step
    if s0 == 0:
        return 0.0, step
    if s0 > 0.5:
        return s0, math.inf
    return s0, (1.0 - math.sqrt(1.0 - 2.0 * s0)) / s0 * step


def omega_derivative(mu1: Measure, mu2: Measure, omega1: complex, omega2: complex) -> Tuple[complex, complex]:
    """(omega1'(z), omega2'(z)) from differentiating Phi = 0 in z."""
    jac = jacobian(mu1, mu2, omega1, omega2)
    if abs(_determinant(jac)) < DEGENERATE_DETERMINANT:
        raise SingularJacobian(f"cannot differentiate the subordination functions at ({omega1}, {omega2})")
    d1, d2 = np.linalg.solve(jac, -np.ones(2, dtype=complex))
    return complex(d1), complex(d2)


def _check_z(z: complex, opts: SolverOptions) -> complex:
    z = complex(z)
    if z.imag <= 0:
        raise NonPositiveImaginaryPart(z)
    if z.imag < opts.eta_floor:
        raise InvalidParameter(f"Im z = {z.imag!r} is below eta_floor = {opts.eta_floor!r}")
    return z


def _pair(mu1, mu2, z, omega1, omega2, iterations, kantorovich=None) -> SubordinationPair:
    residual = np.linalg.norm(phi_residual(mu1, mu2, omega1, omega2, z))
    return SubordinationPair(z, complex(omega1), complex(omega2), float(residual), iterations, kantorovich)


def _check_branch(pair: SubordinationPair):
    if pair.min_im_omega < pair.eta - BRANCH_SLACK:
        raise SolverFailure(f"solution at z={pair.z} left the subordination branch (min Im omega = {pair.min_im_omega!r})", last=pair)


def solve_fixed_point(mu1: Measure, mu2: Measure, z: complex, opts: Optional[SolverOptions] = None, warm_start: Optional[complex] = None) -> SubordinationPair:
    """Iterate u -> F1(F2(u) - u + z) - F2(u) + u, whose attracting fixed point is omega1(z)."""
    opts = opts or DEFAULT_OPTIONS
    z = _check_z(z, opts)
    u = z if warm_start is None else complex(warm_start)
    if u.imag <= 0:
        raise NonPositiveImaginaryPart(u)

    for iteration in range(1, opts.max_iter + 1):
        f2 = neg_reciprocal(mu2, u)
        inner = f2 - u + z
        if inner.imag <= 0:
            raise NonPositiveImaginaryPart(inner)
        nxt = neg_reciprocal(mu1, inner) - f2 + u
        if nxt.imag <= 0:
            raise NonPositiveImaginaryPart(nxt)
        step = abs(nxt - u)
        u = nxt
        if step < opts.fp_tol:
            break
    else:
        last = _pair(mu1, mu2, z, u, neg_reciprocal(mu2, u) - u + z, opts.max_iter)
        raise MaxIterationsExceeded(f"fixed point at z={z} did not settle in {opts.max_iter} iterations (last step {step:.3e})", last=last)

    logger.debug("fixed point at z=%s settled after %d iterations", z, iteration)
    return _pair(mu1, mu2, z, u, neg_reciprocal(mu2, u) - u + z, iteration)


def newton_refine(
    mu1: Measure,
    mu2: Measure,
    z: complex,
    start: SubordinationPair,
    opts: Optional[SolverOptions] = None,
    offset: Optional[Sequence[complex]] = None,
) -> SubordinationPair:
    """Damped Newton on Phi(omega1, omega2, z) = offset, offset defaulting to zero.

    A step is halved until the iterate stays in the upper half-plane and the
    residual decreases; if no halving decreases it, the best admissible one is taken.
    """
    opts = opts or DEFAULT_OPTIONS
    z = _check_z(z, opts)
    target = np.zeros(2, dtype=complex) if offset is None else np.asarray(offset, dtype=complex)
    w = start.vector.copy()
    _check_omegas(w[0], w[1])

    r = _residual(mu1, mu2, w, z, target)
    norm = float(np.linalg.norm(r))
    guard, _ = kantorovich_guard(mu1, mu2, w[0], w[1], r)
    iteration = 0

    while norm >= opts.newton_tol:
        if iteration >= opts.newton_max_iter:
            last = SubordinationPair(z, complex(w[0]), complex(w[1]), norm, iteration, guard)
            raise MaxIterationsExceeded(f"Newton at z={z} stalled at residual {norm:.3e} after {iteration} steps", last=last)

        jac = jacobian(mu1, mu2, w[0], w[1])
        if abs(_determinant(jac)) < DEGENERATE_DETERMINANT:
            last = SubordinationPair(z, complex(w[0]), complex(w[1]), norm, iteration, guard)
            raise SingularJacobian(f"singular Jacobian at z={z}, omega=({w[0]}, {w[1]})", last=last)
        step = -np.linalg.solve(jac, r)

        best = None
        t = 1.0
        for _ in range(opts.max_halvings):
            candidate = w + t * step
            if candidate[0].imag > 0 and candidate[1].imag > 0:
                r_candidate = _residual(mu1, mu2, candidate, z, target)
                n_candidate = float(np.linalg.norm(r_candidate))
                if best is None or n_candidate < best[2]:
                    best = (candidate, r_candidate, n_candidate)
                if n_candidate <= (1.0 - ARMIJO * t) * norm:
                    break
            t *= 0.5
        if best is None:
            last = SubordinationPair(z, complex(w[0]), complex(w[1]), norm, iteration, guard)
            raise DomainEscape(f"Newton at z={z} could not keep the iterate in the upper half-plane", last=last)
        if t < 1.0:
            logger.debug("Newton step at z=%s damped to t=%g", z, t)

        w, r, norm = best
        iteration += 1

    return SubordinationPair(z, complex(w[0]), complex(w[1]), norm, iteration, guard)


def _start(mu2, z, omega1, omega2=None) -> SubordinationPair:
    omega1 = complex(omega1)
    if omega2 is None:
        omega2 = neg_reciprocal(mu2, omega1) - omega1 + z
    return SubordinationPair(z, omega1, complex(omega2), math.nan)


def solve(mu1: Measure, mu2: Measure, z: complex, opts: Optional[SolverOptions] = None, warm_start: Optional[complex] = None) -> SubordinationPair:
    """Fixed-point iteration followed by Newton refinement; a warm start goes to Newton directly."""
    opts = opts or DEFAULT_OPTIONS
    z = _check_z(z, opts)

    if warm_start is not None and complex(warm_start).imag > 0:
        try:
            pair = newton_refine(mu1, mu2, z, _start(mu2, z, warm_start), opts)
            _check_branch(pair)
            return pair
        except SolverFailure as exc:
            logger.debug("warm start failed at z=%s: %s", z, exc)

    try:
        fixed = solve_fixed_point(mu1, mu2, z, opts)
    except MaxIterationsExceeded as exc:
        logger.debug("%s; refining the last iterate", exc)
        fixed = exc.last

    try:
        pair = newton_refine(mu1, mu2, z, fixed, opts)
    except SingularJacobian:
        logger.warning("singular Jacobian at z=%s, continuing with plain fixed-point iteration", z)
        longer = SolverOptions(opts.fp_tol, opts.newton_tol, 10 * opts.max_iter, opts.eta_floor, opts.newton_max_iter, opts.max_halvings)
        pair = solve_fixed_point(mu1, mu2, z, longer, warm_start=fixed.omega1)
    _check_branch(pair)
    return pair


def _continue(mu1, mu2, z: complex, prev: SubordinationPair, opts: SolverOptions) -> SubordinationPair:
    """One continuation step from prev to z: Euler predictor, Newton corrector."""
    starts = []
    try:
        d1, d2 = omega_derivative(mu1, mu2, prev.omega1, prev.omega2)
        dz = z - prev.z
        predicted = (prev.omega1 + d1 * dz, prev.omega2 + d2 * dz)
        if predicted[0].imag > 0 and predicted[1].imag > 0:
            starts.append(predicted)
    except SingularJacobian:
        pass
    starts.append((prev.omega1, prev.omega2))

    for omega1, omega2 in starts:
        try:
            pair = newton_refine(mu1, mu2, z, _start(mu2, z, omega1, omega2), opts)
            _check_branch(pair)
            return pair
        except SolverFailure as exc:
            logger.debug("continuation start failed at z=%s: %s", z, exc)
    return solve(mu1, mu2, z, opts, warm_start=prev.omega1)


def sweep_eta(mu1: Measure, mu2: Measure, E: float, eta_hi: float, eta_lo: float, n_steps: int, opts: Optional[SolverOptions] = None) -> Sweep:
    """Solve along E + i*eta for a geometric eta grid from eta_hi down to eta_lo.

    Each step is warm-started from the previous solution. On the first
    unrecoverable step the pairs found so far are returned with failure_index set.
    """
    opts = opts or DEFAULT_OPTIONS
    if not eta_hi >= eta_lo >= opts.eta_floor:
        raise InvalidParameter(f"need eta_hi >= eta_lo >= eta_floor, got {eta_hi!r}, {eta_lo!r}, {opts.eta_floor!r}")
    if n_steps < 1:
        raise InvalidParameter(f"n_steps must be >= 1, got {n_steps!r}")

    pairs = []
    for k, eta in enumerate(grids.eta_ladder(eta_hi, eta_lo, n_steps)):
        z = complex(E, eta)
        try:
            pair = solve(mu1, mu2, z, opts) if not pairs else _continue(mu1, mu2, z, pairs[-1], opts)
        except SolverFailure as exc:
            logger.warning("eta sweep at E=%g stopped at eta=%.3e: %s", E, eta, exc)
            return Sweep(tuple(pairs), failure_index=k, failure=str(exc))
        pairs.append(pair)
    return Sweep(tuple(pairs))


def stability_map(
    mu1: Measure,
    mu2: Measure,
    energies: Sequence[float],
    eta_hi: float,
    eta_lo: float,
    n_steps: int,
    opts: Optional[SolverOptions] = None,
    threshold: float = 1e-3,
) -> StabilityReport:
    """Gamma, min Im omega and max |omega| over the grid energies x eta-ladder."""
    energies = [float(E) for E in energies]
    etas = grids.eta_ladder(eta_hi, eta_lo, n_steps)
    gamma = np.full((len(energies), len(etas)), np.nan)
    min_im = math.inf
    max_abs = 0.0
    densities = np.zeros(len(energies))
    failures = []

    for i, E in enumerate(energies):
        sweep = sweep_eta(mu1, mu2, E, eta_hi, eta_lo, n_steps, opts)
        for j, pair in enumerate(sweep.pairs):
            gamma[i, j] = gamma_stability(mu1, mu2, pair.omega1, pair.omega2)
            min_im = min(min_im, pair.min_im_omega)
            max_abs = max(max_abs, abs(pair.omega1), abs(pair.omega2))
        if sweep.ok:
            densities[i] = max((-1.0 / neg_reciprocal(mu1, sweep.last.omega2)).imag / math.pi, 0.0)
        else:
            failures.append((E, float(etas[sweep.failure_index])))

    bulk = tuple(
        (energies[first], energies[last])
        for first, last in grids.runs(densities > threshold)
        if last > first
    )
    return StabilityReport(
        energies=tuple(energies),
        etas=tuple(float(eta) for eta in etas),
        gamma=gamma,
        min_im_omega=min_im,
        max_gamma=float(np.nanmax(gamma)) if np.any(np.isfinite(gamma) | np.isinf(gamma)) else math.nan,
        max_abs_omega=max_abs,
        bulk=bulk,
        failures=tuple(failures),
    )

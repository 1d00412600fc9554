"""Closed forms for mu_alpha = xi delta_1 + (1 - xi) delta_0 boxplus mu_beta = zeta delta_theta + (1 - zeta) delta_0."""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from freeconv.errors import InvalidParameter
from freeconv.measures import bernoulli, two_point
from freeconv.models.measure import AtomicMeasure
from freeconv.models.spectrum import AtomList, TwoPointParams
from freeconv.subordination import gamma_stability

logger = logging.getLogger(__name__)


def r_pm(p: TwoPointParams) -> Tuple[float, float]:
    """Support endpoints (r_minus, r_plus) of the underlying Jacobi law, both in [0, 1]."""
    center = p.xi + p.zeta - 2 * p.xi * p.zeta
    spread = math.sqrt(4 * p.xi * p.zeta * (1 - p.xi) * (1 - p.zeta))
    r_minus = 0.0 if p.xi == p.zeta else max(center - spread, 0.0)
    return r_minus, min(center + spread, 1.0)


def _preimages(theta: float, t: float) -> Tuple[float, float]:
    """Both solutions tau of (tau - 1)(tau - theta) = theta t."""
    root = math.sqrt((1 - theta) ** 2 + 4 * theta * t)
    return 0.5 * (1 + theta - root), 0.5 * (1 + theta + root)


def edges(p: TwoPointParams) -> Tuple[float, float, float, float]:
    """l1 < l2 <= l3 < l4; the absolutely continuous part lives on (l1, l2) and (l3, l4)."""
    r_minus, r_plus = r_pm(p)
    outer = _preimages(p.theta, r_plus)
    inner = _preimages(p.theta, r_minus)
    l1, l2, l3, l4 = sorted(outer + inner)
    return l1, l2, l3, l4


def density_closed(p: TwoPointParams, tau):
    """Density of the absolutely continuous part at tau (scalar or array).

    With t = (tau - 1)(tau - theta) / theta the density is the Jacobi density of t
    pushed forward through both branches of t, i.e.
    |2 tau - 1 - theta| sqrt((r+ - t)(t - r-)) / (2 pi |theta| t (1 - t)) on r- < t < r+.
    """
    r_minus, r_plus = r_pm(p)
    tau_arr = np.asarray(tau, dtype=float)
    t = (tau_arr - 1) * (tau_arr - p.theta) / p.theta
    inside = (t > r_minus) & (t < r_plus)
    ts = np.where(inside, t, 0.5 * (r_minus + r_plus))

    if p.is_equal_case:
        # |2 tau - 2| = 2 sqrt(t) cancels the 1/t singularity at tau = 1
        values = np.sqrt(r_plus - ts) / (math.pi * (1 - ts))
    else:
        jacobian = np.abs(2 * tau_arr - 1 - p.theta) / abs(p.theta)
        values = jacobian * np.sqrt((r_plus - ts) * (ts - r_minus)) / (2 * math.pi * ts * (1 - ts))

    out = np.where(inside, values, 0.0)
    return float(out) if np.ndim(tau) == 0 else out


def atoms(p: TwoPointParams) -> AtomList:
    """(theta, zeta - xi) and (0, 1 - xi - zeta), dropping zero masses."""
    found = [(loc, mass) for loc, mass in ((0.0, 1 - p.xi - p.zeta), (p.theta, p.zeta - p.xi)) if mass > 0]
    return AtomList(tuple(sorted(found)))


def measures(p: TwoPointParams) -> Tuple[AtomicMeasure, AtomicMeasure]:
    return bernoulli(p.xi), two_point(p.zeta, p.theta)


def ac_mass(p: TwoPointParams) -> float:
    """Integral of density_closed over both support intervals; equals 2 xi."""
    l1, l2, l3, l4 = edges(p)
    total = 0.0
    for lo, hi in ((l1, l2), (l3, l4)):
        if hi > lo:
            value, _ = quad(lambda x: density_closed(p, x), lo, hi, limit=200, epsabs=1e-11, epsrel=1e-11)
            total += value
    return total


def neg_reciprocal_alpha(xi: float, w: complex) -> complex:
    """F of bernoulli(xi): w (1 - w) / (1 - xi - w)."""
    return w * (1 - w) / (1 - xi - w)


def omega_equal_closed(xi: float, z: complex) -> complex:
    """Common subordination function when both inputs are bernoulli(xi).

    The root is the product of principal square roots, which behaves like
    z - 1 at infinity and gives (1 - xi) + i sqrt(xi (1 - xi)) at z = 1.
    """
    if not 0.0 < xi <= 0.5:
        raise InvalidParameter(f"xi must lie in (0, 1/2], got {xi!r}")
    z = complex(z)
    if z.imag < 0:
        raise InvalidParameter(f"need Im z >= 0, got {z!r}")
    half_width = 2 * math.sqrt(xi * (1 - xi))
    u = z - 1
    root = np.sqrt(u - half_width) * np.sqrt(u + half_width)
    return complex(0.5 * (u + 2 * (1 - xi) + root))


def omega_equal_residual(xi: float, z: complex, omega: complex) -> float:
    """|F_alpha(omega) - 2 omega + z|, zero at the common subordination function."""
    return abs(neg_reciprocal_alpha(xi, omega) - 2 * omega + z)


def gamma_blowup_profile(xi: float, E_offsets: Sequence[float], eta: float) -> List[Tuple[float, float, float]]:
    """(offset, Gamma, Gamma |z - 1|) at z = 1 + offset + i eta for the self-convolution of bernoulli(xi)."""
    mu = bernoulli(xi)
    rows = []
    for offset in E_offsets:
        if offset == 0:
            raise InvalidParameter("offsets must be non-zero")
        z = complex(1 + offset, eta)
        omega = omega_equal_closed(xi, z)
        gamma = gamma_stability(mu, mu, omega, omega)
        rows.append((float(offset), gamma, gamma * abs(z - 1)))
    logger.debug("gamma profile for xi=%g: %s", xi, rows)
    return rows

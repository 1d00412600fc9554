import json
import logging
import math
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from freeconv.errors import InvalidParameter, NonPositiveImaginaryPart, UnsupportedOrder
from freeconv.models.measure import AtomicMeasure, Measure, SemicircleMeasure

logger = logging.getLogger(__name__)

LEVY_TOLERANCE = 1e-10
SEMICIRCLE_BREAKPOINTS = 4001
CDF_SLACK = 1e-14


# constructors

def point_mass(a: float) -> AtomicMeasure:
    return AtomicMeasure([a], [1.0])


def bernoulli(xi: float) -> AtomicMeasure:
    """(1 - xi) delta_0 + xi delta_1."""
    if not 0.0 < xi < 1.0:
        raise InvalidParameter(f"bernoulli parameter must lie in (0, 1), got {xi!r}")
    return AtomicMeasure([0.0, 1.0], [1.0 - xi, xi])


def two_point(zeta: float, theta: float) -> AtomicMeasure:
    """(1 - zeta) delta_0 + zeta delta_theta."""
    if not 0.0 < zeta < 1.0:
        raise InvalidParameter(f"two_point weight must lie in (0, 1), got {zeta!r}")
    if theta == 0 or not math.isfinite(theta):
        raise InvalidParameter(f"two_point location must be finite and non-zero, got {theta!r}")
    if theta > 0:
        return AtomicMeasure([0.0, theta], [1.0 - zeta, zeta])
    return AtomicMeasure([theta, 0.0], [zeta, 1.0 - zeta])


def semicircle(center: float = 0.0, variance: float = 1.0) -> SemicircleMeasure:
    return SemicircleMeasure(float(center), float(variance))


def atomic(atoms: Iterable[Sequence[float]], normalize: bool = False) -> AtomicMeasure:
    pairs = sorted((float(x), float(w)) for x, w in atoms)
    if not pairs:
        raise InvalidParameter("an atomic measure needs at least one atom")
    locations, weights = zip(*pairs)
    return AtomicMeasure(locations, weights, normalize=normalize)


def empirical(values: Sequence[float]) -> AtomicMeasure:
    """(1/n) sum of delta_{v_i}; coincident values are merged."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise InvalidParameter("empirical measure of an empty sample")
    locations, counts = np.unique(values, return_counts=True)
    return AtomicMeasure(locations, counts / values.size)


def discretize(mu: Measure, n: int) -> AtomicMeasure:
    """Equal-mass discretization at the n quantile midpoints."""
    if n < 1:
        raise InvalidParameter(f"discretization needs n >= 1, got {n!r}")
    return empirical(quantile_values(mu, n))


def shift(mu: Measure, t: float) -> Measure:
    if isinstance(mu, SemicircleMeasure):
        return SemicircleMeasure(mu.center + t, mu.variance)
    return AtomicMeasure(mu.locations + t, mu.weights)


def scale(mu: Measure, s: float) -> Measure:
    if s <= 0:
        raise InvalidParameter(f"scale factor must be > 0, got {s!r}")
    if isinstance(mu, SemicircleMeasure):
        return SemicircleMeasure(mu.center * s, mu.variance * s * s)
    return AtomicMeasure(mu.locations * s, mu.weights)


_KINDS = {
    "point_mass": lambda p: point_mass(p["a"]),
    "bernoulli": lambda p: bernoulli(p["xi"]),
    "two_point": lambda p: two_point(p["zeta"], p["theta"]),
    "semicircle": lambda p: semicircle(p.get("center", 0.0), p.get("variance", 1.0)),
    "empirical": lambda p: empirical(p["values"]),
    "atomic": lambda p: atomic(p["atoms"]),
    "discretize": lambda p: discretize(p["measure"], p["n"]),
}


def make_measure(kind: str, **params) -> Measure:
    try:
        build = _KINDS[kind]
    except KeyError:
        raise InvalidParameter(f"unknown measure kind {kind!r}, expected one of {sorted(_KINDS)}")
    try:
        return build(params)
    except KeyError as missing:
        raise InvalidParameter(f"measure kind {kind!r} needs parameter {missing}")


# transforms

def _check_upper(z):
    if np.any(np.imag(z) <= 0):
        raise NonPositiveImaginaryPart(z)


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return complex(value)
    return value


def _semicircle_root(mu: SemicircleMeasure, z_arr):
    u = z_arr - mu.center
    sigma = math.sqrt(mu.variance)
    # product of principal roots: cut on the support, s ~ u at infinity
    s = np.sqrt(u - 2 * sigma) * np.sqrt(u + 2 * sigma)
    return u, s


def _stieltjes_core(mu: Measure, z):
    _check_upper(z)
    z_arr = np.asarray(z, dtype=complex)
    if isinstance(mu, SemicircleMeasure):
        u, s = _semicircle_root(mu, z_arr)
        return -2.0 / (u + s), (u, s)
    inv = 1.0 / (mu.locations - z_arr[..., None])
    return inv @ mu.weights, inv


def stieltjes_derivatives(mu: Measure, z) -> Tuple:
    """m, m' and m'' at z (scalar or array) in the upper half-plane."""
    m, parts = _stieltjes_core(mu, z)
    if isinstance(mu, SemicircleMeasure):
        u, s = parts
        m1 = -m / s
        m2 = (m - u * m1) / (s * s)
    else:
        w = mu.weights
        m1 = (parts ** 2) @ w
        m2 = 2.0 * ((parts ** 3) @ w)

    return _scalar_or_array(m, z), _scalar_or_array(m1, z), _scalar_or_array(m2, z)


def stieltjes(mu: Measure, z):
    m, _ = _stieltjes_core(mu, z)
    return _scalar_or_array(m, z)


def neg_reciprocal(mu: Measure, z):
    """F(z) = -1/m(z)."""
    return -1.0 / stieltjes(mu, z)


def neg_reciprocal_derivative(mu: Measure, z, order: int = 1):
    if order not in (1, 2):
        raise UnsupportedOrder(f"derivative order must be 1 or 2, got {order!r}")
    if isinstance(mu, AtomicMeasure) and mu.is_point_mass:
        # F(z) = z - a
        one = 1.0 if order == 1 else 0.0
        _check_upper(z)
        return _scalar_or_array(np.full(np.shape(z), one, dtype=complex), z)

    m, m1, m2 = stieltjes_derivatives(mu, z)
    if order == 1:
        return m1 / m ** 2
    return m2 / m ** 2 - 2.0 * m1 ** 2 / m ** 3


# distribution functions

def _cumulative(mu: AtomicMeasure) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(mu.weights)])
    cum[-1] = 1.0
    return cum


def _semicircle_cdf(mu: SemicircleMeasure, x):
    t = np.clip((np.asarray(x, dtype=float) - mu.center) / math.sqrt(mu.variance), -2.0, 2.0)
    return 0.5 + t * np.sqrt(4.0 - t * t) / (4 * math.pi) + np.arcsin(t / 2) / math.pi


def cdf(mu: Measure, x):
    """Right-continuous distribution function mu((-inf, x])."""
    if isinstance(mu, SemicircleMeasure):
        out = _semicircle_cdf(mu, x)
    else:
        out = _cumulative(mu)[np.searchsorted(mu.locations, x, side="right")]
    return float(out) if np.ndim(x) == 0 else out


def cdf_left(mu: Measure, x):
    """Left limit mu((-inf, x))."""
    if isinstance(mu, SemicircleMeasure):
        out = _semicircle_cdf(mu, x)
    else:
        out = _cumulative(mu)[np.searchsorted(mu.locations, x, side="left")]
    return float(out) if np.ndim(x) == 0 else out


def quantile(mu: Measure, q):
    """Generalized inverse inf{x : F(x) >= q} for q in (0, 1)."""
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr <= 0) | (q_arr >= 1)):
        raise InvalidParameter("quantile levels must lie in (0, 1)")

    if isinstance(mu, SemicircleMeasure):
        lo, hi = mu.support
        out = np.array([
            brentq(lambda x, level=level: _semicircle_cdf(mu, x) - level, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            for level in q_arr.reshape(-1)
        ]).reshape(q_arr.shape)
        out[q_arr == 0.5] = mu.center
    else:
        idx = np.searchsorted(_cumulative(mu)[1:], q_arr, side="left")
        out = mu.locations[np.minimum(idx, mu.n_atoms - 1)]
    return float(out) if np.ndim(q) == 0 else out


def quantile_values(mu: Measure, n: int) -> np.ndarray:
    """The n quantile midpoints (k - 1/2)/n, k = 1..n, sorted."""
    if n < 1:
        raise InvalidParameter(f"need n >= 1, got {n!r}")
    levels = (np.arange(n) + 0.5) / n
    return np.atleast_1d(quantile(mu, levels))


def _breakpoints(mu: Measure) -> np.ndarray:
    if isinstance(mu, SemicircleMeasure):
        lo, hi = mu.support
        inner = quantile(mu, np.linspace(0, 1, SEMICIRCLE_BREAKPOINTS)[1:-1])
        return np.concatenate([[lo], inner, [hi]])
    return np.asarray(mu.locations)


def _within_band(mu: Measure, nu: Measure, eps: float, points: np.ndarray) -> bool:
    """F(x - eps) - eps <= G(x) <= F(x + eps) + eps at all candidate x, right values and left limits."""
    xs = np.concatenate([points, points - eps, points + eps])
    for at in (cdf, cdf_left):
        g = at(nu, xs)
        if np.any(g > at(mu, xs + eps) + eps + CDF_SLACK):
            return False
        if np.any(at(mu, xs - eps) - eps > g + CDF_SLACK):
            return False
    return True


def levy_distance(mu: Measure, nu: Measure, tol: float = LEVY_TOLERANCE) -> float:
    points = np.unique(np.concatenate([_breakpoints(mu), _breakpoints(nu)]))
    if _within_band(mu, nu, 0.0, points):
        return 0.0

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _within_band(mu, nu, mid, points):
            hi = mid
        else:
            lo = mid
    return hi


# serialization

def to_dict(mu: Measure) -> dict:
    if isinstance(mu, SemicircleMeasure):
        return {"type": "semicircle", "center": mu.center, "variance": mu.variance}
    return {"type": "atomic", "atoms": [[x, w] for x, w in mu.atoms]}


def from_dict(data: dict) -> Measure:
    kind = data.get("type")
    if kind == "atomic":
        return atomic(data["atoms"])
    if kind == "semicircle":
        return semicircle(data["center"], data["variance"])
    if kind == "bernoulli":
        return bernoulli(data["xi"])
    if kind == "two_point":
        return two_point(data["zeta"], data["theta"])
    if kind == "point_mass":
        return point_mass(data["a"])
    raise InvalidParameter(f"unknown measure type {kind!r}")


def dumps(mu: Measure) -> str:
    return json.dumps(to_dict(mu))


def loads(text: str) -> Measure:
    return from_dict(json.loads(text))

import math

import numpy as np
import pytest

from freeconv import twopoint
from freeconv.convolution import density, find_bulk, subordination_at
from freeconv.errors import InvalidParameter
from freeconv.grids import loglog_slope
from freeconv.models.spectrum import TwoPointParams
from freeconv.subordination import gamma_stability

TRIPLES = [
    (0.2, 0.3, 1.5),
    (0.25, 0.4, -1.0),
    (0.1, 0.45, 2.0),
    (0.15, 0.4, -2.0),
    (0.35, 0.45, 1.0),
]


def test_params_are_validated():
    with pytest.raises(InvalidParameter):
        TwoPointParams(0.4, 0.3, 1.0)
    with pytest.raises(InvalidParameter):
        TwoPointParams(0.2, 0.6, 1.0)
    with pytest.raises(InvalidParameter):
        TwoPointParams(0.2, 0.3, 0.0)
    with pytest.raises(InvalidParameter):
        TwoPointParams(0.5, 0.5, -1.0)


def test_r_pm_examples():
    assert twopoint.r_pm(TwoPointParams(0.5, 0.5, 1.0)) == (0.0, 1.0)
    r_minus, r_plus = twopoint.r_pm(TwoPointParams(0.25, 0.25, 1.0))
    assert r_minus == 0.0
    assert r_plus == pytest.approx(0.75)


def test_r_minus_vanishes_only_on_the_diagonal():
    rng = np.random.default_rng(5)
    for _ in range(50):
        xi, zeta = sorted(rng.uniform(0.01, 0.5, 2))
        r_minus, r_plus = twopoint.r_pm(TwoPointParams(xi, zeta, 1.0))
        assert 0 < r_minus < r_plus <= 1
        assert twopoint.r_pm(TwoPointParams(xi, xi, 1.0))[0] == 0.0


def test_edges_examples():
    assert twopoint.edges(TwoPointParams(0.5, 0.5, 1.0)) == pytest.approx((0.0, 1.0, 1.0, 2.0), abs=1e-15)
    root = math.sqrt(0.75)
    assert twopoint.edges(TwoPointParams(0.25, 0.25, 1.0)) == pytest.approx((1 - root, 1.0, 1.0, 1 + root), abs=1e-15)
    assert twopoint.edges(TwoPointParams(0.2, 0.3, 1.5)) == pytest.approx((0.1626, 0.9626, 1.5374, 2.3374), abs=1e-4)
    assert twopoint.edges(TwoPointParams(0.25, 0.4, -1.0)) == pytest.approx((-0.987, -0.355, 0.355, 0.987), abs=1e-3)


@pytest.mark.parametrize("xi", [0.1, 0.25, 0.4])
def test_equal_case_edges(xi):
    spread = 2 * math.sqrt(xi * (1 - xi))
    assert twopoint.edges(TwoPointParams(xi, xi, 1.0)) == pytest.approx((1 - spread, 1.0, 1.0, 1 + spread), abs=1e-14)


@pytest.mark.parametrize("triple", TRIPLES)
def test_edges_map_onto_the_jacobi_support(triple):
    p = TwoPointParams(*triple)
    r_minus, r_plus = twopoint.r_pm(p)
    l1, l2, l3, l4 = twopoint.edges(p)
    assert l1 < l2 <= l3 < l4
    t = lambda tau: (tau - 1) * (tau - p.theta) / p.theta
    assert [t(l1), t(l2), t(l3), t(l4)] == pytest.approx([r_plus, r_minus, r_minus, r_plus], abs=1e-12)


def test_closed_density_at_the_center():
    assert twopoint.density_closed(TwoPointParams(0.5, 0.5, 1.0), 1.0) == pytest.approx(1 / math.pi)
    for xi in (0.1, 0.3):
        expected = 2 * math.sqrt(xi * (1 - xi)) / math.pi
        assert twopoint.density_closed(TwoPointParams(xi, xi, 1.0), 1.0) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("triple", TRIPLES + [(0.3, 0.3, 1.0), (0.5, 0.5, 1.0)])
def test_closed_form_is_normalized(triple):
    p = TwoPointParams(*triple)
    assert twopoint.ac_mass(p) == pytest.approx(2 * p.xi, abs=1e-8)
    assert twopoint.ac_mass(p) + twopoint.atoms(p).total_mass == pytest.approx(1.0, abs=1e-8)


def test_atoms_and_measures():
    p = TwoPointParams(0.2, 0.3, 1.5)
    assert twopoint.atoms(p).atoms == ((0.0, pytest.approx(0.5)), (1.5, pytest.approx(0.1)))
    assert len(twopoint.atoms(TwoPointParams(0.5, 0.5, 1.0))) == 0
    mu_alpha, mu_beta = twopoint.measures(p)
    assert mu_alpha.atoms == ((0.0, pytest.approx(0.8)), (1.0, 0.2))
    assert mu_beta.atoms == ((0.0, pytest.approx(0.7)), (1.5, 0.3))


def test_density_vanishes_off_the_support():
    p = TwoPointParams(0.2, 0.3, 1.5)
    values = twopoint.density_closed(p, np.array([-1.0, 0.0, 1.2, 1.5, 3.0]))
    assert values.tolist() == [0.0] * 5


def _bulk_points(p, count):
    l1, l2, l3, l4 = twopoint.edges(p)
    points = []
    for lo, hi in ((l1, l2), (l3, l4)):
        margin = 0.02 * (hi - lo)
        points.extend(np.linspace(lo + margin, hi - margin, count // 2))
    return points


@pytest.mark.parametrize("triple", TRIPLES)
def test_general_solver_matches_closed_form(triple):
    p = TwoPointParams(*triple)
    mu_alpha, mu_beta = twopoint.measures(p)
    for tau in _bulk_points(p, 20):
        assert density(mu_alpha, mu_beta, tau) == pytest.approx(twopoint.density_closed(p, tau), abs=2e-5)


@pytest.mark.slow
@pytest.mark.parametrize("triple", TRIPLES)
def test_general_solver_matches_closed_form_densely(triple):
    p = TwoPointParams(*triple)
    mu_alpha, mu_beta = twopoint.measures(p)
    for tau in _bulk_points(p, 200):
        assert density(mu_alpha, mu_beta, tau) == pytest.approx(twopoint.density_closed(p, tau), abs=2e-5)


@pytest.mark.parametrize("triple", TRIPLES[:3])
def test_edges_agree_with_detected_bulk(triple):
    p = TwoPointParams(*triple)
    mu_alpha, mu_beta = twopoint.measures(p)
    l1, l2, l3, l4 = twopoint.edges(p)
    lo, hi, n = l1 - 0.5, l4 + 0.5, 351
    cell = (hi - lo) / (n - 1)
    bulk = find_bulk(mu_alpha, mu_beta, lo, hi, n)
    assert len(bulk) == 2
    detected = [x for interval in bulk.intervals for x in interval]
    assert detected == pytest.approx([l1, l2, l3, l4], abs=cell)


def test_omega_equal_closed():
    assert twopoint.omega_equal_closed(0.5, 1.0) == pytest.approx(0.5 + 0.5j, abs=1e-15)
    z = 1.3 + 0.01j
    omega = twopoint.omega_equal_closed(0.3, z)
    assert twopoint.omega_equal_residual(0.3, z, omega) < 1e-12
    mu_alpha, _ = twopoint.measures(TwoPointParams(0.3, 0.3, 1.0))
    pair = subordination_at(mu_alpha, mu_alpha, z)
    assert pair.omega1 == pytest.approx(omega, abs=1e-9)
    assert pair.omega2 == pytest.approx(omega, abs=1e-9)
    eta = 1e6
    assert twopoint.omega_equal_closed(0.3, 1j * eta) / (1j * eta) == pytest.approx(1.0, abs=1e-5)


def test_gamma_blows_up_like_the_inverse_distance_to_one():
    offsets = [1e-1, 1e-2, 1e-3, 1e-4]
    rows = twopoint.gamma_blowup_profile(0.5, offsets, 1e-8)
    assert 0.05 < rows[0][2] < 50
    scaled = [row[2] for row in rows]
    assert max(scaled) / min(scaled) < 100
    assert loglog_slope(offsets, [row[1] for row in rows]) == pytest.approx(-1.0, abs=0.15)


def test_gamma_stays_bounded_for_unequal_masses():
    p = TwoPointParams(0.2, 0.3, 1.5)
    mu_alpha, mu_beta = twopoint.measures(p)
    gammas = []
    for offset in (1e-1, 1e-2, 1e-3, 1e-4):
        pair = subordination_at(mu_alpha, mu_beta, complex(1 + offset, 1e-8))
        gammas.append(gamma_stability(mu_alpha, mu_beta, pair.omega1, pair.omega2))
    assert all(math.isfinite(gamma) for gamma in gammas)
    assert max(gammas) / min(gammas) < 10

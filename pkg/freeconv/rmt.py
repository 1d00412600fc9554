import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from freeconv import config
from freeconv.convolution import atoms, density_grid, subordination_at
from freeconv.errors import EigensolverFailure, InvalidParameter, RankDeficiency
from freeconv.measures import empirical, quantile_values, stieltjes
from freeconv.models.ensemble import (
    GROUPS,
    ConcentrationReport,
    ConcentrationRow,
    CountingReport,
    EnsembleConfig,
    LocalLawReport,
    LocalLawRow,
    SubordinationEstimate,
    TrialResult,
)
from freeconv.models.measure import AtomicMeasure, Measure

logger = logging.getLogger(__name__)

Q_SPECS = ("identity", "matrix_a", "matrix_b")
COUNTING_GRID_POINTS = 401


def haar_sample(n: int, group: str, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (complex) or orthogonal (real) n x n matrix.

    QR of a Ginibre matrix, with each column of Q rotated by the phase of the
    matching diagonal entry of R.
    """
    if n < 1:
        raise InvalidParameter(f"matrix size must be >= 1, got {n!r}")
    if group not in GROUPS:
        raise InvalidParameter(f"group must be one of {GROUPS}, got {group!r}")

    for attempt in range(2):
        if group == "unitary":
            ginibre = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
        else:
            ginibre = rng.standard_normal((n, n))
        q, r = np.linalg.qr(ginibre)
        diagonal = np.diagonal(r)
        magnitude = np.abs(diagonal)
        if np.all(magnitude > np.finfo(float).tiny):
            return q * (diagonal / magnitude)
        logger.warning("rank-deficient Ginibre sample of size %d (attempt %d)", n, attempt + 1)
    raise RankDeficiency(f"Ginibre matrix of size {n} was rank deficient twice")


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def realize(mu: Measure, n: int) -> np.ndarray:
    """n diagonal entries whose empirical measure approximates mu (exact for atomic mu with weights in Z/n)."""
    return quantile_values(mu, n)


def _rotated_weights(rotation: Optional[np.ndarray], eigenvectors: np.ndarray, diagonal: np.ndarray) -> np.ndarray:
    """diag(W* X D X* W) = |X* W|^T d; X = identity when rotation is None."""
    frame = eigenvectors if rotation is None else rotation.conj().T @ eigenvectors
    return (np.abs(frame) ** 2).T @ diagonal


def sample_trial(cfg: EnsembleConfig, trial_index: int, keep_weights: bool = False, rotate_a: bool = False) -> TrialResult:
    """Eigenvalues of H = A + U B U* (or V A V* + U B U* with rotate_a) for one trial.

    The random stream depends only on (cfg.seed, trial_index).
    """
    rng = trial_rng(cfg.seed, trial_index)
    a = realize(cfg.spec_a, cfg.n)
    b = realize(cfg.spec_b, cfg.n)
    shift_a = float(np.mean(a)) if cfg.center else 0.0
    shift_b = float(np.mean(b)) if cfg.center else 0.0
    a_c, b_c = a - shift_a, b - shift_b

    u = haar_sample(cfg.n, cfg.group, rng)
    v = haar_sample(cfg.n, cfg.group, rng) if rotate_a else None

    h = (u * b_c) @ u.conj().T
    if v is None:
        h = h + np.diag(a_c)
    else:
        h = h + (v * a_c) @ v.conj().T
    h = 0.5 * (h + h.conj().T)

    try:
        if keep_weights:
            eigenvalues, eigenvectors = np.linalg.eigh(h)
        else:
            eigenvalues = np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(f"eigendecomposition failed for trial {trial_index}: {exc}")

    weights_a = weights_b = None
    if keep_weights:
        weights_a = _rotated_weights(v, eigenvectors, a)
        weights_b = _rotated_weights(u, eigenvectors, b)
    shift = shift_a + shift_b
    return TrialResult(trial_index, eigenvalues + shift, shift, weights_a, weights_b)


def run_trials(cfg: EnsembleConfig, keep_weights: bool = False, rotate_a: bool = False, workers: Optional[int] = None) -> List[TrialResult]:
    """All cfg.trials trials, in trial order whatever the worker count."""
    with ThreadPoolExecutor(max_workers=config.worker_count(workers)) as executor:
        results = list(executor.map(lambda i: sample_trial(cfg, i, keep_weights, rotate_a), range(cfg.trials)))
    logger.info("ran %d trials of size %d", cfg.trials, cfg.n)
    return results


def green_trace(result: TrialResult, z):
    """m_H(z) = (1/n) sum 1/(lambda_i - z)."""
    z_arr = np.asarray(z, dtype=complex)
    values = np.mean(1.0 / (result.eigenvalues - z_arr[..., None]), axis=-1)
    return complex(values) if np.ndim(z) == 0 else values


def f_trace(result: TrialResult, q_spec: str, z: complex) -> complex:
    """f_Q(z) = tr Q G_H(z) for Q = identity, A or U B U*."""
    if q_spec == "identity":
        return green_trace(result, z)
    if q_spec not in Q_SPECS:
        raise InvalidParameter(f"Q must be one of {Q_SPECS}, got {q_spec!r}")
    weights = result.weights_a if q_spec == "matrix_a" else result.weights_b
    if weights is None:
        raise InvalidParameter("trial was sampled without eigenbasis weights")
    return complex(np.mean(weights / (result.eigenvalues - complex(z))))


def ward_residual(result: TrialResult, z: complex) -> float:
    """|(1/n) sum |lambda_i - z|^-2 - Im m_H(z)/Im z|."""
    z = complex(z)
    lhs = float(np.mean(1.0 / np.abs(result.eigenvalues - z) ** 2))
    return abs(lhs - green_trace(result, z).imag / z.imag)


def eigenvalue_count(result: TrialResult, E1: float, E2: float) -> int:
    """Number of eigenvalues in [E1, E2)."""
    lo, hi = np.searchsorted(result.eigenvalues, [E1, E2], side="left")
    return int(hi - lo)


def empirical_pair(cfg: EnsembleConfig):
    return empirical(realize(cfg.spec_a, cfg.n)), empirical(realize(cfg.spec_b, cfg.n))


def _complex_std(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def local_law_experiment(cfg: EnsembleConfig, E_list: Sequence[float], eta_list: Sequence[float], workers: Optional[int] = None) -> LocalLawReport:
    """Median/max of |m_H(z) - m(z)| over trials, with m from the discretized inputs."""
    mu_a, mu_b = empirical_pair(cfg)
    results = run_trials(cfg, workers=workers)
    rows = []
    for E in E_list:
        for eta in eta_list:
            z = complex(E, eta)
            m = complex(stieltjes(mu_a, subordination_at(mu_a, mu_b, z).omega2))
            m_h = np.array([green_trace(result, z) for result in results])
            errors = np.abs(m_h - m)
            rows.append(LocalLawRow(
                E=float(E),
                eta=float(eta),
                n=cfg.n,
                median_err=float(np.median(errors)),
                max_err=float(np.max(errors)),
                envelope=1.0 / (cfg.n * eta ** 1.5),
                fluct_std=_complex_std(m_h),
            ))
    shift_a = float(np.mean(realize(cfg.spec_a, cfg.n))) if cfg.center else 0.0
    shift_b = float(np.mean(realize(cfg.spec_b, cfg.n))) if cfg.center else 0.0
    return LocalLawReport(tuple(rows), cfg.trials, shift_a, shift_b)


def reference_mass(mu_a: Measure, mu_b: Measure, E1: float, E2: float, points: int = COUNTING_GRID_POINTS) -> float:
    """mu_a boxplus mu_b of [E1, E2): integrated density plus atoms inside."""
    grid = density_grid(mu_a, mu_b, E1, E2, points)
    mass = float(trapezoid(grid.f, grid.x))
    if isinstance(mu_a, AtomicMeasure) and isinstance(mu_b, AtomicMeasure):
        mass += sum(weight for loc, weight in atoms(mu_a, mu_b) if E1 <= loc < E2)
    return mass


def counting_experiment(cfg: EnsembleConfig, E1: float, E2: float, workers: Optional[int] = None) -> CountingReport:
    if not E1 < E2:
        raise InvalidParameter(f"need E1 < E2, got {E1!r}, {E2!r}")
    mu_a, mu_b = empirical_pair(cfg)
    reference = reference_mass(mu_a, mu_b, E1, E2)
    counts = tuple(eigenvalue_count(result, E1, E2) for result in run_trials(cfg, workers=workers))
    errors = tuple(abs(count / cfg.n - reference) for count in counts)
    return CountingReport(float(E1), float(E2), cfg.n, reference, counts, errors)


def concentration_experiment(cfg: EnsembleConfig, q_spec: str, z_list: Sequence[complex], workers: Optional[int] = None) -> ConcentrationReport:
    """Sample std of f_Q(z) across trials against 1/(n eta^(3/2))."""
    if q_spec not in Q_SPECS:
        raise InvalidParameter(f"Q must be one of {Q_SPECS}, got {q_spec!r}")
    results = run_trials(cfg, keep_weights=q_spec != "identity", workers=workers)
    rows = []
    for z in z_list:
        z = complex(z)
        values = np.array([f_trace(result, q_spec, z) for result in results])
        rows.append(ConcentrationRow(z, _complex_std(values), 1.0 / (cfg.n * z.imag ** 1.5)))
    return ConcentrationReport(q_spec, cfg.n, tuple(rows))


def _ratio_std_error(f: np.ndarray, m: np.ndarray) -> float:
    """Delta-method standard error of mean(f)/mean(m)."""
    if f.size < 2:
        return math.inf
    ratio = f.mean() / m.mean()
    return float(np.std(f - ratio * m, ddof=1) / (abs(m.mean()) * math.sqrt(f.size)))


def approx_subordination(cfg: EnsembleConfig, z_list: Sequence[complex], workers: Optional[int] = None) -> List[SubordinationEstimate]:
    """Monte Carlo omega_A^c = z - E f_A/E m_H and omega_B^c = z - E f_B/E m_H for H = V A V* + U B U*.

    omega_B^c estimates the argument of F_A, omega_A^c that of F_B.
    """
    mu_a, mu_b = empirical_pair(cfg)
    results = run_trials(cfg, keep_weights=True, rotate_a=True, workers=workers)
    estimates = []
    for z in z_list:
        z = complex(z)
        m = np.array([green_trace(result, z) for result in results])
        f_a = np.array([f_trace(result, "matrix_a", z) for result in results])
        f_b = np.array([f_trace(result, "matrix_b", z) for result in results])
        mean_m = m.mean()
        omega_a_c = z - f_a.mean() / mean_m
        omega_b_c = z - f_b.mean() / mean_m

        pair = subordination_at(mu_a, mu_b, z)
        estimates.append(SubordinationEstimate(
            z=z,
            omega_a_c=complex(omega_a_c),
            omega_b_c=complex(omega_b_c),
            omega_a=pair.omega1,
            omega_b=pair.omega2,
            std_error=_ratio_std_error(f_a, m) + _ratio_std_error(f_b, m),
            sum_identity_residual=float(abs(omega_a_c + omega_b_c - z + 1.0 / mean_m)),
        ))
    return estimates

import argparse
from dataclasses import asdict
import logging
import math
import sys
from typing import List, Optional

from freeconv import config, convolution, io, rmt, subordination, twopoint
from freeconv.errors import (
    EigensolverFailure,
    InvalidParameter,
    NonPositiveImaginaryPart,
    ParseError,
    RankDeficiency,
    SolverFailure,
    UnsupportedOrder,
)
from freeconv.grids import steps_for
from freeconv.measures import stieltjes
from freeconv.models.ensemble import GROUPS, EnsembleConfig
from freeconv.models.run_config import RunConfig
from freeconv.models.spectrum import TwoPointParams

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ParseError, InvalidParameter, NonPositiveImaginaryPart, UnsupportedOrder)
NUMERICAL_ERRORS = (SolverFailure, EigensolverFailure, RankDeficiency)


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ParseError(f"{self.prog}: {message}")


def _split(name: str, value: complex) -> dict:
    value = complex(value)
    return {f"{name}_re": value.real, f"{name}_im": value.imag}


def _energies(lo: float, hi: float, points: int) -> List[float]:
    if points < 2:
        raise InvalidParameter(f"need at least 2 energies, got {points!r}")
    return [lo + (hi - lo) * i / (points - 1) for i in range(points)]


def _format_edge(value: float) -> str:
    return f"{value:.6f}".rstrip("0").rstrip(".")


# commands

def cmd_convolve(args) -> str:
    mu1, mu2 = io.parse_spec(args.m1), io.parse_spec(args.m2)
    z = io.parse_complex(args.z)
    pair = convolution.subordination_at(mu1, mu2, z, eta_eval=args.eta_eval)
    m = complex(stieltjes(mu1, pair.omega2))
    record = {}
    for name, value in (("z", pair.z), ("m", m), ("omega1", pair.omega1), ("omega2", pair.omega2)):
        record.update(_split(name, value))
    record["gamma"] = subordination.gamma_stability(mu1, mu2, pair.omega1, pair.omega2)
    record["residual"] = pair.residual_norm
    record["density"] = max(m.imag, 0.0) / math.pi
    return io.render([record], args.format)


def cmd_density(args) -> str:
    mu1, mu2 = io.parse_spec(args.m1), io.parse_spec(args.m2)
    lo, hi = io.parse_range(args.range)
    grid = convolution.density_grid(mu1, mu2, lo, hi, args.points, eta_eval=args.eta_eval, richardson=args.richardson)
    if grid.errors:
        logger.warning("density solver failed at %d grid points", len(grid.errors))
    return io.render(grid.rows(), args.format)


def cmd_bulk(args) -> str:
    mu1, mu2 = io.parse_spec(args.m1), io.parse_spec(args.m2)
    lo, hi = io.parse_range(args.range)
    bulk = convolution.find_bulk(mu1, mu2, lo, hi, args.points, threshold=args.threshold, gamma_max=args.gamma_max, eta_eval=args.eta_eval)
    return io.render(bulk.rows(), args.format)


def cmd_atoms(args) -> str:
    found = convolution.atoms(io.parse_spec(args.m1), io.parse_spec(args.m2))
    return io.render(found.rows(), args.format)


def cmd_edges(args) -> str:
    p = TwoPointParams(args.xi, args.zeta, args.theta)
    values = twopoint.edges(p)
    if args.format == "json":
        return io.render([dict(zip(("l1", "l2", "l3", "l4"), values))], "json")
    return " ".join(_format_edge(value) for value in values)


def cmd_stability_map(args) -> str:
    mu1, mu2 = io.parse_spec(args.m1), io.parse_spec(args.m2)
    lo, hi = io.parse_range(args.range)
    steps = args.steps or steps_for(args.eta_hi, args.eta_lo)
    energies = _energies(lo, hi, args.points)
    report = subordination.stability_map(mu1, mu2, energies, args.eta_hi, args.eta_lo, steps, threshold=args.threshold)
    logger.info(
        "min Im omega = %.3e, max gamma = %.3e, max |omega| = %.3e, bulk = %s",
        report.min_im_omega, report.max_gamma, report.max_abs_omega, report.bulk,
    )
    return io.render([{"E": E, "eta": eta, "gamma": gamma} for E, eta, gamma in report.rows()], args.format)


def cmd_continuity(args) -> str:
    measures = [io.parse_spec(spec) for spec in (args.m_a, args.m_b, args.m_alpha, args.m_beta)]
    lo, hi = io.parse_range(args.energies)
    E_grid = _energies(lo, hi, args.points)
    report = convolution.continuity_check(*measures, E_grid, io.parse_floats(args.etas))
    return io.render(report.rows(), args.format)


def _ensemble(args) -> EnsembleConfig:
    return EnsembleConfig(
        n=args.n,
        group=args.group,
        spec_a=io.parse_spec(args.a),
        spec_b=io.parse_spec(args.b),
        seed=args.seed,
        trials=args.trials,
        center=not args.no_center,
    )


def _dump_eigenvalues(cfg: EnsembleConfig, args, rotate_a: bool = False):
    if args.eigenvalues is None:
        return
    rows = [
        {"trial": result.index, "i": i, "eigenvalue": float(value)}
        for result in rmt.run_trials(cfg, rotate_a=rotate_a, workers=args.threads)
        for i, value in enumerate(result.eigenvalues)
    ]
    io.emit(io.render(rows, "csv"), args.eigenvalues)


def cmd_rmt_local_law(args) -> str:
    cfg = _ensemble(args)
    report = rmt.local_law_experiment(cfg, io.parse_floats(args.E), io.parse_floats(args.eta), workers=args.threads)
    _dump_eigenvalues(cfg, args)
    return io.render([asdict(row) for row in report.rows], args.format)


def cmd_rmt_counting(args) -> str:
    cfg = _ensemble(args)
    E1, E2 = io.parse_range(args.interval)
    report = rmt.counting_experiment(cfg, E1, E2, workers=args.threads)
    logger.info("reference mass %.6f; %d/%d trials within n^(-2/3+0.1)", report.reference_mass, report.within(), cfg.trials)
    _dump_eigenvalues(cfg, args)
    return io.render(report.rows(), args.format)


def cmd_rmt_concentration(args) -> str:
    cfg = _ensemble(args)
    report = rmt.concentration_experiment(cfg, args.q, io.parse_complex_list(args.z), workers=args.threads)
    _dump_eigenvalues(cfg, args)
    rows = [dict(**_split("z", row.z), std=row.std, envelope=row.envelope, ratio=row.ratio) for row in report.rows]
    return io.render(rows, args.format)


def cmd_rmt_subordination(args) -> str:
    cfg = _ensemble(args)
    rows = []
    for estimate in rmt.approx_subordination(cfg, io.parse_complex_list(args.z), workers=args.threads):
        row = {}
        for name in ("z", "omega_a_c", "omega_b_c", "omega_a", "omega_b"):
            row.update(_split(name, getattr(estimate, name)))
        row.update(distance=estimate.distance, std_error=estimate.std_error, sum_identity_residual=estimate.sum_identity_residual)
        rows.append(row)
    _dump_eigenvalues(cfg, args, rotate_a=True)
    return io.render(rows, args.format)


def cmd_run_config(args) -> str:
    stored = RunConfig.load(args.path)
    inner = build_parser().parse_args(list(stored.argv))
    if inner.command == "run-config":
        raise ParseError("a run config cannot replay another run config")
    logger.info("replaying %s run %s", stored.command, stored.config_hash[:12])
    if args.output is None:
        args.output = inner.output
    return inner.handler(inner)


# parser

def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=io.FORMATS, default="csv", help="output format (default: csv)")
    common.add_argument("--output", metavar="PATH", help="write results to PATH instead of stdout")
    common.add_argument("--verbose", "-v", action="store_true", help="log at DEBUG level")
    common.add_argument("--dump-config", metavar="PATH", help="write a replayable run config to PATH")
    return common


def _add_pair(parser):
    parser.add_argument("--m1", required=True, help="first measure, e.g. bernoulli:0.5")
    parser.add_argument("--m2", required=True, help="second measure, e.g. semicircle:0,1")


def _add_eta_eval(parser):
    parser.add_argument("--eta-eval", type=float, default=config.ETA_EVAL, help="height used for real-axis evaluation")


def _add_ensemble(parser):
    parser.add_argument("--a", required=True, help="spectral measure of A")
    parser.add_argument("--b", required=True, help="spectral measure of B")
    parser.add_argument("--n", type=int, default=500, help="matrix size")
    parser.add_argument("--trials", type=int, default=20, help="independent matrix samples")
    parser.add_argument("--seed", type=int, default=0, help="base seed; trial i draws from (seed, i)")
    parser.add_argument("--group", choices=GROUPS, default="unitary", help="Haar group of the rotation")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (capped by FREECONV_THREADS)")
    parser.add_argument("--no-center", action="store_true", help="do not center A and B before sampling")
    parser.add_argument("--eigenvalues", metavar="PATH", help="also dump all eigenvalues as CSV")


def build_parser() -> ArgumentParser:
    common = _common()
    parser = ArgumentParser(prog="freeconv", description="Free additive convolution via subordination, with random-matrix checks.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("convolve", parents=[common], help="Stieltjes transform and subordination functions at z")
    _add_pair(p)
    p.add_argument("--z", required=True, help="spectral parameter, e.g. 1+1e-9i; real z is lifted to z + i*eta_eval")
    _add_eta_eval(p)
    p.set_defaults(handler=cmd_convolve, format="json")

    p = commands.add_parser("density", parents=[common], help="density on a uniform grid")
    _add_pair(p)
    p.add_argument("--range", required=True, help="LO,HI")
    p.add_argument("--points", type=int, default=201, help="grid points")
    p.add_argument("--richardson", action="store_true", help="extrapolate 2 f(eta) - f(2 eta)")
    _add_eta_eval(p)
    p.set_defaults(handler=cmd_density)

    p = commands.add_parser("bulk", parents=[common], help="intervals where the density exceeds a threshold")
    _add_pair(p)
    p.add_argument("--range", required=True, help="LO,HI")
    p.add_argument("--points", type=int, default=401, help="grid points")
    p.add_argument("--threshold", type=float, default=convolution.BULK_THRESHOLD, help="smallest density counted as bulk")
    p.add_argument("--gamma-max", type=float, default=float("inf"), help="also drop points whose stability bound exceeds this")
    _add_eta_eval(p)
    p.set_defaults(handler=cmd_bulk)

    p = commands.add_parser("atoms", parents=[common], help="atoms of the convolution of two atomic measures")
    _add_pair(p)
    p.set_defaults(handler=cmd_atoms)

    p = commands.add_parser("edges", parents=[common], help="support edges l1 l2 l3 l4 of a two-point convolution")
    p.add_argument("--xi", type=float, required=True, help="mass of the Bernoulli measure at 1")
    p.add_argument("--zeta", type=float, required=True, help="mass of the two-point measure at theta")
    p.add_argument("--theta", type=float, required=True, help="location of the second atom")
    p.set_defaults(handler=cmd_edges)

    p = commands.add_parser("stability-map", parents=[common], help="Gamma over an energy x eta grid")
    _add_pair(p)
    p.add_argument("--range", required=True, help="energy range LO,HI")
    p.add_argument("--points", type=int, default=21, help="grid points")
    p.add_argument("--eta-hi", type=float, default=10.0, help="top of the eta sweep")
    p.add_argument("--eta-lo", type=float, default=1e-9, help="bottom of the eta sweep")
    p.add_argument("--steps", type=int, default=None, help="eta steps (default: 6 per decade)")
    p.add_argument("--threshold", type=float, default=convolution.BULK_THRESHOLD, help="smallest density counted as bulk")
    p.set_defaults(handler=cmd_stability_map)

    p = commands.add_parser("continuity", parents=[common], help="compare two convolutions against their Levy distances")
    p.add_argument("--m-a", required=True, help="first measure of the reference pair")
    p.add_argument("--m-b", required=True, help="second measure of the reference pair")
    p.add_argument("--m-alpha", required=True, help="first measure of the perturbed pair")
    p.add_argument("--m-beta", required=True, help="second measure of the perturbed pair")
    p.add_argument("--energies", required=True, help="energy range LO,HI")
    p.add_argument("--points", type=int, default=11, help="grid points")
    p.add_argument("--etas", default="1e-3", help="comma-separated heights")
    p.set_defaults(handler=cmd_continuity)

    p = commands.add_parser("rmt", help="Monte Carlo experiments on A + U B U*")
    experiments = p.add_subparsers(dest="experiment", required=True)

    e = experiments.add_parser("local-law", parents=[common], help="local law of G(z) at each (E, eta)")
    _add_ensemble(e)
    e.add_argument("--E", required=True, help="comma-separated energies")
    e.add_argument("--eta", required=True, help="comma-separated heights")
    e.set_defaults(handler=cmd_rmt_local_law)

    e = experiments.add_parser("counting", parents=[common], help="eigenvalue counts in an interval against the reference mass")
    _add_ensemble(e)
    e.add_argument("--interval", required=True, help="E1,E2")
    e.set_defaults(handler=cmd_rmt_counting)

    e = experiments.add_parser("concentration", parents=[common], help="trial-to-trial spread of tr(QG)/n")
    _add_ensemble(e)
    e.add_argument("--q", choices=rmt.Q_SPECS, default="identity", help="observable Q in tr(QG)/n (default: identity)")
    e.add_argument("--z", required=True, help="comma-separated spectral parameters")
    e.set_defaults(handler=cmd_rmt_concentration)

    e = experiments.add_parser("subordination", parents=[common], help="subordination functions estimated from eigenvectors")
    _add_ensemble(e)
    e.add_argument("--z", required=True, help="comma-separated spectral parameters")
    e.set_defaults(handler=cmd_rmt_subordination)

    p = commands.add_parser("run-config", parents=[common], help="replay a config written by --dump-config")
    p.add_argument("path", help="run config written by --dump-config")
    p.set_defaults(handler=cmd_run_config)

    return parser


def _strip_dump(argv: List[str]) -> List[str]:
    kept = []
    skip = False
    for arg in argv:
        if skip:
            skip = False
        elif arg == "--dump-config":
            skip = True
        elif not arg.startswith("--dump-config="):
            kept.append(arg)
    return kept


def _configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else config.LOG_LEVEL,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.verbose)
        if args.dump_config:
            RunConfig(args.command, tuple(_strip_dump(argv))).dump(args.dump_config)
        io.emit(args.handler(args), args.output)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

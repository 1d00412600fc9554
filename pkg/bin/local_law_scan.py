import logging

from freeconv import config
from freeconv.measures import bernoulli
from freeconv.models.ensemble import EnsembleConfig
from freeconv.rmt import local_law_experiment

logging.basicConfig(level=config.LOG_LEVEL)


def local_law_scan(sizes, E=1.0, trials=20, seed=7, group="unitary"):
    """Median local-law error at eta = n^(-1/2) for each n, next to the 1/(n eta^(3/2)) envelope."""
    rows = []
    for n in sizes:
        cfg = EnsembleConfig(n=n, group=group, spec_a=bernoulli(0.5), spec_b=bernoulli(0.5), seed=seed, trials=trials)
        eta = n ** -0.5
        report = local_law_experiment(cfg, [E], [eta])
        rows.append(report.row(E, eta))
    return rows


if __name__ == "__main__":
    for row in local_law_scan([250, 500, 1000]):
        print(f"n={row.n:5d}  eta={row.eta:.4f}  median={row.median_err:.3e}  max={row.max_err:.3e}  envelope={row.envelope:.3e}  std={row.fluct_std:.3e}")

"""Test-environment evaluation, the p_e sweep and cross-seed aggregation."""

from dataclasses import dataclass, field

import numpy as np

from . import colored, net
from .colored import ColoredDataset, SynthesisConfig
from .errors import GridMismatch
from .idx import RawDataset

DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass
class RunReport:
    method: str
    seed: int
    p_grid: tuple
    accuracies: list
    wall_seconds: float = 0.0


@dataclass
class AggregateReport:
    p_grid: tuple
    methods: dict = field(default_factory=dict)  # method -> {mean: [...], std: [...]|None, n}


def evaluate(model, testset: ColoredDataset) -> float:
    logits, _ = net.forward(model.params, testset.flat_images())
    return net.accuracy(logits, testset.labels)


def sweep(model, raw_test: RawDataset, p_grid=DEFAULT_GRID, noise_level: float = 0.25,
          seed: int = 0, grayscale: bool = False) -> list:
    """Accuracy per p_e over test sets sharing one noise realization.

    All grid points use the same synthesis seed, so the label-noise draws
    (and the color uniforms) are identical; only the flip threshold p_e
    changes between grid points.
    """
    accs = []
    for p in p_grid:
        cfg = SynthesisConfig(noise_level=noise_level, color_correlation=p,
                              seed=seed, grayscale=grayscale)
        accs.append(evaluate(model, colored.synthesize(raw_test, cfg)))
    return accs


def aggregate_runs(reports) -> AggregateReport:
    """Per method and grid point: mean and sample std (n-1) over seeds."""
    if not reports:
        raise GridMismatch("no reports to aggregate")
    grid = reports[0].p_grid
    by_method = {}
    for r in reports:
        if r.p_grid != grid:
            raise GridMismatch(f"{r.method} grid {r.p_grid} vs {grid}")
        by_method.setdefault(r.method, []).append(r.accuracies)
    out = AggregateReport(p_grid=grid)
    for method in sorted(by_method):
        runs = np.asarray(by_method[method], dtype=np.float64)
        entry = {"mean": runs.mean(axis=0).tolist(), "n": len(runs)}
        entry["std"] = runs.std(axis=0, ddof=1).tolist() if len(runs) > 1 else None
        out.methods[method] = entry
    return out


def write_results_csv(reports, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("method,seed,p_e,accuracy\n")
        for r in sorted(reports, key=lambda r: (r.method, r.seed)):
            for p, acc in zip(r.p_grid, r.accuracies):
                fh.write(f"{r.method},{r.seed},{p:.1f},{acc:.4f}\n")


def write_aggregate_csv(agg: AggregateReport, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("method,p_e,mean,std,n\n")
        for method in sorted(agg.methods):
            entry = agg.methods[method]
            for i, p in enumerate(agg.p_grid):
                std = "" if entry["std"] is None else f"{entry['std'][i]:.4f}"
                fh.write(f"{method},{p:.1f},{entry['mean'][i]:.4f},{std},{entry['n']}\n")

"""Monte Carlo coverage and normality experiments.

A cell is one (delta, J, phi) configuration. Replication ``r`` of a cell
seeded with ``seed`` draws everything (latents first, then bootstrap
multipliers) from ``rng.stream(seed, r)``, so results do not depend on how
replications are split across worker processes. Per-replication outcomes are
collected in replication order and reduced with ``math.fsum``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from twoway import rng as rngmod
from twoway.bootstrap import BootstrapConfig, two_way_wild_bootstrap
from twoway.diagnostics import NormalityStats, normality_stats
from twoway.dgp import DgpSpec, sample_latents, assemble_panel, true_mean
from twoway.estimators import sample_mean, twcr_ci

MIN_REPLICATIONS = 100


@dataclass(frozen=True)
class GridSpec:
    deltas: tuple[float, ...]
    js: tuple[int, ...]
    phis: tuple[float, ...]
    n_rows: int = 50
    n_cols: int = 50
    replications: int = 2000
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    level: float = 0.95
    master_seed: int = 0
    correction: float = 1.0

    def __post_init__(self) -> None:
        for name in ("deltas", "js", "phis"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "phis", tuple(float(p) for p in self.phis))
        if any(isinstance(j, bool) or int(j) != j or j < 1 for j in self.js):
            raise ValueError("js must contain positive integers")
        object.__setattr__(self, "js", tuple(int(j) for j in self.js))
        if any(p < 0 for p in self.phis):
            raise ValueError("phis must be >= 0")
        _check_replications(self.replications)
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        if not self.correction > 0:
            raise ValueError(f"correction must be > 0, got {self.correction}")
        rngmod.check_seed(self.master_seed)
        # validates the sizes
        DgpSpec(self.n_rows, self.n_cols)

    def cells(self) -> list[tuple[float, int, float]]:
        """Cell coordinates in lexicographic (delta, J, phi) order."""
        return sorted(
            set(itertools.product(self.deltas, self.js, self.phis)),
        )

    def spec_for(self, delta: float, j: int, phi: float) -> DgpSpec:
        return DgpSpec(self.n_rows, self.n_cols, j, delta, phi)


@dataclass(frozen=True)
class GridCellSummary:
    delta: float
    j: int
    phi: float
    coverage_cgm: float
    coverage_m: float
    mean_ci_length_cgm: float
    mean_ci_length_m: float
    negative_variance_rate: float
    ks_distance: float
    replications: int
    coverage_mc_se: float
    covered_cgm: int = 0
    covered_m: int = 0


class CellError(RuntimeError):
    def __init__(self, delta, j, phi, cause: BaseException):
        super().__init__(f"cell (delta={delta}, J={j}, phi={phi}) failed: {cause}")
        self.coordinates = (delta, j, phi)
        self.cause = cause


def _check_replications(replications) -> int:
    if isinstance(replications, bool) or int(replications) != replications:
        raise TypeError(f"replications must be an integer, got {replications!r}")
    if replications < MIN_REPLICATIONS:
        raise ValueError(f"replications must be >= {MIN_REPLICATIONS}, got {replications}")
    return int(replications)


def simulate_replications(
    spec: DgpSpec,
    bootstrap: BootstrapConfig | None,
    level: float,
    seed: int,
    start: int,
    stop: int,
    correction: float = 1.0,
) -> np.ndarray:
    """Outcomes for replications ``start..stop-1`` as an array of rows.

    Columns: theta_hat, covered_cgm, covered_m, len_cgm, len_m, clamped.
    With ``bootstrap=None`` only theta_hat is computed (other columns NaN).
    """
    theta = true_mean(spec)
    out = np.full((stop - start, 6), np.nan)
    for k, r in enumerate(range(start, stop)):
        gen = rngmod.stream(seed, r)
        panel = assemble_panel(spec, sample_latents(spec, gen))
        if bootstrap is None:
            out[k, 0] = sample_mean(panel)
            continue
        cgm = twcr_ci(panel, level=level, correction=correction)
        boot = two_way_wild_bootstrap(panel, bootstrap, gen)
        out[k] = (
            cgm.estimate,
            cgm.covers(theta),
            boot.covers(theta),
            cgm.length,
            boot.length,
            bool(cgm.flags),
        )
    return out


def _chunks(total: int, pieces: int) -> list[tuple[int, int]]:
    pieces = max(1, min(pieces, total))
    bounds = np.linspace(0, total, pieces + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_replications(
    spec, bootstrap, level, seed, replications, correction, workers, executor
) -> np.ndarray:
    if workers <= 1:
        return simulate_replications(spec, bootstrap, level, seed, 0, replications, correction)
    own = executor is None
    if own:
        executor = ProcessPoolExecutor(max_workers=workers)
    try:
        futures = [
            executor.submit(
                simulate_replications, spec, bootstrap, level, seed, a, b, correction
            )
            for a, b in _chunks(replications, workers * 4)
        ]
        return np.concatenate([f.result() for f in futures], axis=0)
    finally:
        if own:
            executor.shutdown()


def summarize(spec: DgpSpec, outcomes: np.ndarray) -> GridCellSummary:
    n = outcomes.shape[0]
    covered_cgm = int(np.sum(outcomes[:, 1]))
    covered_m = int(np.sum(outcomes[:, 2]))
    coverage = covered_cgm / n
    return GridCellSummary(
        delta=spec.delta,
        j=spec.n_factors,
        phi=spec.phi,
        coverage_cgm=coverage,
        coverage_m=covered_m / n,
        mean_ci_length_cgm=math.fsum(outcomes[:, 3]) / n,
        mean_ci_length_m=math.fsum(outcomes[:, 4]) / n,
        negative_variance_rate=int(np.sum(outcomes[:, 5])) / n,
        ks_distance=normality_stats(outcomes[:, 0]).ks_distance,
        replications=n,
        coverage_mc_se=math.sqrt(coverage * (1.0 - coverage) / n),
        covered_cgm=covered_cgm,
        covered_m=covered_m,
    )


def run_cell(
    spec: DgpSpec,
    replications: int = 2000,
    bootstrap: BootstrapConfig | None = None,
    level: float = 0.95,
    seed: int = 0,
    *,
    correction: float = 1.0,
    workers: int = 1,
    executor: Executor | None = None,
) -> GridCellSummary:
    """Coverage of the TWCR and bootstrap intervals for one DGP.

    ``bootstrap.level`` is ignored in favour of ``level`` so both intervals
    share the nominal level.
    """
    replications = _check_replications(replications)
    rngmod.check_seed(seed)
    bootstrap = bootstrap or BootstrapConfig()
    if bootstrap.level != level:
        bootstrap = BootstrapConfig(
            bootstrap.n_draws, bootstrap.multiplier, bootstrap.include_degenerate_term, level
        )
    outcomes = _run_replications(
        spec, bootstrap, level, seed, replications, correction, workers, executor
    )
    return summarize(spec, outcomes)


def qq_cell(
    spec: DgpSpec,
    replications: int = 2000,
    seed: int = 0,
    *,
    probs=None,
    workers: int = 1,
    executor: Executor | None = None,
) -> NormalityStats:
    """Normality summary of the sample mean across replications.

    Draws the same panels as :func:`run_cell` with the same seed.
    """
    replications = _check_replications(replications)
    rngmod.check_seed(seed)
    outcomes = _run_replications(
        spec, None, 0.95, seed, replications, 1.0, workers, executor
    )
    return normality_stats(outcomes[:, 0], probs=probs)


def run_grid(grid: GridSpec, workers: int | None = 1) -> list[GridCellSummary]:
    """Run every cell of ``grid`` in lexicographic (delta, J, phi) order.

    Each cell is seeded with ``rng.cell_seed(master_seed, delta, J, phi)``.
    """
    workers = max(1, int(workers or 1))
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    results = []
    try:
        for delta, j, phi in grid.cells():
            try:
                spec = grid.spec_for(delta, j, phi)
                results.append(
                    run_cell(
                        spec,
                        grid.replications,
                        grid.bootstrap,
                        grid.level,
                        rngmod.cell_seed(grid.master_seed, delta, j, phi),
                        correction=grid.correction,
                        workers=workers,
                        executor=executor,
                    )
                )
            except Exception as exc:  # noqa: BLE001 - re-raised with coordinates
                raise CellError(delta, j, phi, exc) from exc
    finally:
        if executor is not None:
            executor.shutdown()
    return results


SUMMARY_FIELDS = [f.name for f in fields(GridCellSummary)]

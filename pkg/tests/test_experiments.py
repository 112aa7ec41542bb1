import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from twoway import rng as rngmod
from twoway.bootstrap import BootstrapConfig, empirical_quantile
from twoway.dgp import DgpSpec, sample_panel
from twoway.estimators import sample_mean
from twoway.experiments import (
    CellError,
    GridSpec,
    qq_cell,
    run_cell,
    run_grid,
    simulate_replications,
)

SMALL_BOOT = BootstrapConfig(n_draws=99)


def small_spec(delta=0.5, j=2, phi=0.5):
    return DgpSpec(8, 8, j, delta, phi)


class TestRunCell:
    def test_summary_fields(self):
        s = run_cell(small_spec(), 100, SMALL_BOOT, 0.95, 3)
        assert s.replications == 100
        assert (s.delta, s.j, s.phi) == (0.5, 2, 0.5)
        assert 0 <= s.coverage_cgm <= 1 and 0 <= s.coverage_m <= 1
        assert s.coverage_mc_se == pytest.approx(math.sqrt(s.coverage_cgm * (1 - s.coverage_cgm) / 100))
        assert s.mean_ci_length_cgm > 0 and s.mean_ci_length_m > 0

    def test_conservation(self):
        s = run_cell(small_spec(0.0, 1, 0.0), 200, SMALL_BOOT, 0.95, 4)
        assert s.covered_cgm == round(s.coverage_cgm * 200)
        assert s.covered_m == round(s.coverage_m * 200)
        assert 0 <= s.covered_cgm <= 200 and 0 <= s.covered_m <= 200

    def test_too_few_replications(self):
        with pytest.raises(ValueError, match="replications"):
            run_cell(small_spec(), 99, SMALL_BOOT, 0.95, 1)

    def test_replication_draws_match_simulate(self):
        spec = small_spec()
        rows = simulate_replications(spec, None, 0.95, 17, 0, 5)
        for r in range(5):
            assert rows[r, 0] == sample_mean(sample_panel(spec, rngmod.stream(17, r)))

    def test_workers_identical(self):
        spec = small_spec()
        a = run_cell(spec, 120, SMALL_BOOT, 0.95, 9)
        b = run_cell(spec, 120, SMALL_BOOT, 0.95, 9, workers=3)
        assert a == b

    def test_shared_executor_identical(self):
        spec = small_spec()
        with ProcessPoolExecutor(max_workers=2) as ex:
            b = run_cell(spec, 100, SMALL_BOOT, 0.95, 9, workers=2, executor=ex)
        assert b == run_cell(spec, 100, SMALL_BOOT, 0.95, 9)

    def test_nested_seeds(self):
        # the first half of a 2R run is exactly the R run
        spec = DgpSpec(10, 10, 5, 0.5, 0.5)
        half = run_cell(spec, 500, SMALL_BOOT, 0.95, 21)
        full = run_cell(spec, 1000, SMALL_BOOT, 0.95, 21)
        rows_half = simulate_replications(spec, SMALL_BOOT, 0.95, 21, 0, 500)
        rows_full = simulate_replications(spec, SMALL_BOOT, 0.95, 21, 0, 1000)
        assert np.array_equal(rows_half, rows_full[:500])
        assert abs(full.coverage_cgm - half.coverage_cgm) <= 3 * half.coverage_mc_se
        assert full.coverage_mc_se < half.coverage_mc_se or full.coverage_cgm in (0.0, 1.0)


class TestRunGrid:
    def test_single_cell_grid_matches_run_cell(self):
        grid = GridSpec((0.5,), (2,), (0.5,), n_rows=8, n_cols=8, replications=100, bootstrap=SMALL_BOOT, master_seed=5)
        (summary,) = run_grid(grid)
        expected = run_cell(small_spec(), 100, SMALL_BOOT, 0.95, rngmod.cell_seed(5, 0.5, 2, 0.5))
        assert summary == expected

    def test_nine_cell_layout(self):
        grid = GridSpec((1.0, 0.0, 0.5), (100, 1, 50), (0.5,), n_rows=6, n_cols=6, replications=100, bootstrap=BootstrapConfig(n_draws=19))
        out = run_grid(grid)
        coords = [(s.delta, s.j, s.phi) for s in out]
        assert coords == sorted((d, j, 0.5) for d in (0.0, 0.5, 1.0) for j in (1, 50, 100))

    def test_adding_cells_keeps_existing(self):
        kw = dict(n_rows=6, n_cols=6, replications=100, bootstrap=BootstrapConfig(n_draws=19), master_seed=8)
        one = run_grid(GridSpec((0.5,), (1,), (0.5,), **kw))
        two = run_grid(GridSpec((0.0, 0.5), (1,), (0.5,), **kw))
        assert two[1] == one[0]

    def test_determinism_across_runs(self):
        grid = GridSpec((0.0, 1.0), (1,), (0.0, 0.5), n_rows=6, n_cols=6, replications=100, bootstrap=BootstrapConfig(n_draws=19))
        assert run_grid(grid) == run_grid(grid) == run_grid(grid, workers=2)

    def test_cell_error_names_coordinates(self):
        # a single-row panel cannot produce a TWCR variance
        grid = GridSpec((0.5,), (1,), (0.5,), n_rows=1, n_cols=6, replications=100)
        with pytest.raises(CellError) as info:
            run_grid(grid)
        assert info.value.coordinates == (0.5, 1, 0.5)

    @pytest.mark.parametrize(
        "kwargs", [dict(deltas=()), dict(js=(0,)), dict(phis=(-1.0,)), dict(replications=10), dict(level=1.0), dict(master_seed=-1)]
    )
    def test_invalid_grid(self, kwargs):
        base = dict(deltas=(0.0,), js=(1,), phis=(0.5,))
        base.update(kwargs)
        with pytest.raises((ValueError, TypeError)):
            GridSpec(**base)


class TestQqCell:
    def test_same_panels_as_run_cell(self):
        spec = small_spec()
        stats = qq_cell(spec, 150, 13)
        rows = simulate_replications(spec, SMALL_BOOT, 0.95, 13, 0, 150)
        theta = rows[:, 0]
        z = (theta - theta.mean()) / theta.std(ddof=1)
        assert np.allclose([q[1] for q in stats.qq_points], empirical_quantile(z, stats.probs), atol=1e-12)

    def test_workers_identical(self):
        spec = small_spec()
        a = qq_cell(spec, 150, 13)
        b = qq_cell(spec, 150, 13, workers=2)
        assert a.ks_distance == b.ks_distance and a.qq_points == b.qq_points

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "delta,j,phi,check",
        [
            (0.0, 1, 0.5, lambda ks: ks > 0.05),
            (1.0, 1, 0.5, lambda ks: ks < 0.03),
            (0.0, 100, 0.0, lambda ks: ks < 0.03),
        ],
    )
    def test_examples(self, delta, j, phi, check):
        from conftest import MASTER_SEED

        spec = DgpSpec(50, 50, j, delta, phi)
        ks = qq_cell(spec, 2000, rngmod.cell_seed(MASTER_SEED, delta, j, phi)).ks_distance
        assert check(ks), ks

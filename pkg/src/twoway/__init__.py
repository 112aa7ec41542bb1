"""Two-way cluster-robust inference for the mean of a two-way clustered array."""

__version__ = "0.1.0"

from twoway.bootstrap import BootstrapConfig, Multiplier, empirical_quantile, two_way_wild_bootstrap
from twoway.decision import (
    DgpCharacterization,
    TableVerdict,
    TreeVerdict,
    characterize_spec,
    table_verdict,
    tree_verdict,
)
from twoway.dgp import (
    DgpSpec,
    LatentDraw,
    Panel,
    assemble_panel,
    oracle_kernels,
    sample_latents,
    true_mean,
)
from twoway.diagnostics import (
    AssumptionReport,
    HoeffdingParts,
    NormalityStats,
    assumption_report,
    hoeffding_decompose,
    martingale_sequence,
    normality_stats,
    vanishing_moment_check,
)
from twoway.estimators import (
    IntervalResult,
    normal_ci,
    oneway_variance,
    sample_mean,
    twcr_ci,
    twcr_variance,
)
from twoway.experiments import GridCellSummary, GridSpec, qq_cell, run_cell, run_grid

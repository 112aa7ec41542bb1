"""CSV writers for experiment results.

Reals are written with 6 significant digits by default; ``precision="full"``
writes ``repr(float)``, which round-trips exactly.
"""

from __future__ import annotations

import io
import sys
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from twoway.diagnostics import AssumptionReport, NormalityStats, VarianceShares
from twoway.estimators import IntervalResult
from twoway.experiments import GridCellSummary

GRID_HEADER = (
    "delta,j,phi,coverage_cgm,coverage_m,ci_len_cgm,ci_len_m,"
    "neg_var_rate,ks,replications,coverage_mc_se"
)


def format_real(x, precision: str = "6") -> str:
    x = float(x)
    if precision == "full":
        return repr(x)
    if precision != "6":
        raise ValueError(f"precision must be '6' or 'full', got {precision!r}")
    return f"{x:.6g}"


def _format(value, precision: str) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value, precision)
    return str(value)


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    elif isinstance(path, io.TextIOBase):
        yield path
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _write_lines(path, lines: Iterable[str]) -> None:
    with _sink(path) as fh:
        for line in lines:
            fh.write(line + "\n")


def grid_lines(summaries: Sequence[GridCellSummary], precision: str = "6") -> list[str]:
    if not summaries:
        raise ValueError("no summaries to write")
    ordered = sorted(summaries, key=lambda s: (s.delta, s.j, s.phi))
    lines = [GRID_HEADER]
    for s in ordered:
        values = (
            s.delta,
            s.j,
            s.phi,
            s.coverage_cgm,
            s.coverage_m,
            s.mean_ci_length_cgm,
            s.mean_ci_length_m,
            s.negative_variance_rate,
            s.ks_distance,
            s.replications,
            s.coverage_mc_se,
        )
        lines.append(",".join(_format(v, precision) for v in values))
    return lines


def emit_grid_csv(summaries: Sequence[GridCellSummary], path, precision: str = "6") -> None:
    """One header row, then one row per cell sorted by (delta, J, phi)."""
    _write_lines(path, grid_lines(summaries, precision))


def qq_lines(stats: NormalityStats, precision: str = "6") -> list[str]:
    lines = ["p,theoretical,sample"]
    for p, (theo, samp) in zip(stats.probs, stats.qq_points):
        lines.append(",".join(format_real(v, precision) for v in (p, theo, samp)))
    lines.append(f"# ks={format_real(stats.ks_distance, precision)}")
    return lines


def emit_qq_csv(stats: NormalityStats, path, precision: str = "6") -> None:
    """``p,theoretical,sample`` rows followed by a ``# ks=<value>`` comment."""
    if not stats.qq_points:
        raise ValueError("normality stats have no QQ points")
    _write_lines(path, qq_lines(stats, precision))


def emit_panel_csv(data: np.ndarray, path, precision: str = "full") -> None:
    """Plain comma-separated matrix, no header."""
    _write_lines(path, (",".join(format_real(v, precision) for v in row) for row in data))


def read_panel_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: panel contains non-finite values")
    return data


def emit_report_csv(
    reports: Sequence[tuple[str, AssumptionReport]],
    shares: VarianceShares,
    path,
    precision: str = "6",
) -> None:
    """One row per (source, report) plus the closed-form variance shares."""
    header = None
    lines = []
    for source, report in reports:
        row = {"source": source, **report.to_row()}
        row.update(
            var_linear=shares.linear,
            var_interaction=shares.interaction,
            var_idiosyncratic=shares.idiosyncratic,
        )
        if header is None:
            header = list(row)
            lines.append(",".join(header))
        lines.append(",".join(_format(row[k], precision) for k in header))
    _write_lines(path, lines)


def emit_intervals_csv(results: Sequence[IntervalResult], path, precision: str = "6") -> None:
    header = ["method", "estimate", "std_error", "ci_lower", "ci_upper", "level", "flags"]
    lines = [",".join(header)]
    for res in results:
        row = res.to_row()
        lines.append(",".join(_format(row[k], precision) for k in header))
    _write_lines(path, lines)

"""Sample mean, cluster-robust variances and normal-theory intervals.

All variance estimators work on the residuals ``u_it = D_it - mean(D)`` and
return the variance of the sample mean (not of a single observation).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from twoway._normal import norm_ppf_scalar
from twoway.dgp import Panel

PanelLike = Union[Panel, np.ndarray]


class Method(str, enum.Enum):
    TWCR = "TWCR"
    ONE_WAY_ROW = "OneWayRow"
    ONE_WAY_COL = "OneWayCol"
    IID = "IID"
    BOOTSTRAP = "Bootstrap"


class Flag(str, enum.Enum):
    NEGATIVE_VARIANCE_CLAMPED = "NegativeVarianceClamped"
    DEGENERATE_INTERVAL = "DegenerateInterval"


@dataclass(frozen=True)
class IntervalResult:
    estimate: float
    std_error: float
    ci_lower: float
    ci_upper: float
    level: float
    method: Method
    flags: frozenset = frozenset()

    def covers(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper

    @property
    def length(self) -> float:
        return self.ci_upper - self.ci_lower

    def to_row(self) -> dict:
        return {
            "method": self.method.value,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "level": self.level,
            "flags": "|".join(sorted(f.value for f in self.flags)),
        }


class TwcrVariance(NamedTuple):
    variance: float
    raw_variance: float
    clamped: bool


def _values(panel: PanelLike) -> np.ndarray:
    if isinstance(panel, Panel):
        return panel.data
    arr = np.asarray(panel, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"panel must be two-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("panel is empty")
    return arr


def _require_clusters(values: np.ndarray, min_rows: int, min_cols: int) -> None:
    n, t = values.shape
    if n < min_rows or t < min_cols:
        raise ValueError(
            f"panel is {n}x{t}; need at least {min_rows} row and {min_cols} column clusters"
        )


def sample_mean(panel: PanelLike) -> float:
    values = _values(panel)
    return float(values.mean())


def _residual_sums(values: np.ndarray) -> tuple[float, float, float]:
    u = values - values.mean()
    row_part = float(np.sum(u.sum(axis=1) ** 2))
    col_part = float(np.sum(u.sum(axis=0) ** 2))
    cell_part = float(np.sum(u * u))
    return row_part, col_part, cell_part


def twcr_variance(panel: PanelLike, correction: float = 1.0) -> TwcrVariance:
    """Two-way cluster-robust variance of the sample mean.

    ``raw = correction * (NT)^-2 * [sum_i (sum_t u_it)^2 + sum_t (sum_i u_it)^2
    - sum_it u_it^2]``. A negative ``raw`` is clamped to zero and reported
    through ``clamped``.
    """
    values = _values(panel)
    _require_clusters(values, 2, 2)
    if not correction > 0:
        raise ValueError(f"correction must be > 0, got {correction}")
    n, t = values.shape
    row_part, col_part, cell_part = _residual_sums(values)
    raw = correction * (row_part + col_part - cell_part) / float(n * t) ** 2
    return TwcrVariance(max(raw, 0.0), raw, raw < 0)


def oneway_variance(panel: PanelLike, axis: str = "rows") -> float:
    """Variance of the mean clustering on rows or on columns only."""
    values = _values(panel)
    if axis == "rows":
        _require_clusters(values, 2, 1)
        sums = (values - values.mean()).sum(axis=1)
    elif axis == "cols":
        _require_clusters(values, 1, 2)
        sums = (values - values.mean()).sum(axis=0)
    else:
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    return float(np.sum(sums**2)) / float(values.size) ** 2


def iid_variance(panel: PanelLike) -> float:
    """Plug-in variance of the mean ignoring clustering."""
    values = _values(panel)
    u = values - values.mean()
    return float(np.sum(u * u)) / float(values.size) ** 2


def normal_quantile(level: float) -> float:
    """Two-sided critical value ``z_{(1+level)/2}``."""
    _check_level(level)
    return norm_ppf_scalar(0.5 * (1.0 + level))


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")


def normal_ci(
    estimate: float,
    variance: float,
    level: float = 0.95,
    method: Method = Method.TWCR,
    flags=(),
) -> IntervalResult:
    _check_level(level)
    if variance < 0 or not math.isfinite(variance):
        raise ValueError(f"variance must be finite and >= 0, got {variance}")
    flags = set(flags)
    se = math.sqrt(variance)
    half = normal_quantile(level) * se
    if se == 0.0:
        flags.add(Flag.DEGENERATE_INTERVAL)
    return IntervalResult(
        estimate=float(estimate),
        std_error=se,
        ci_lower=estimate - half,
        ci_upper=estimate + half,
        level=level,
        method=method,
        flags=frozenset(flags),
    )


def twcr_ci(panel: PanelLike, level: float = 0.95, correction: float = 1.0) -> IntervalResult:
    est = sample_mean(panel)
    var = twcr_variance(panel, correction=correction)
    flags = {Flag.NEGATIVE_VARIANCE_CLAMPED} if var.clamped else set()
    return normal_ci(est, var.variance, level, Method.TWCR, flags)


def oneway_ci(panel: PanelLike, axis: str = "rows", level: float = 0.95) -> IntervalResult:
    method = Method.ONE_WAY_ROW if axis == "rows" else Method.ONE_WAY_COL
    return normal_ci(sample_mean(panel), oneway_variance(panel, axis), level, method)


def iid_ci(panel: PanelLike, level: float = 0.95) -> IntervalResult:
    return normal_ci(sample_mean(panel), iid_variance(panel), level, Method.IID)

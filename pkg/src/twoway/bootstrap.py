"""Two-way wild bootstrap for the sample mean.

The panel is split into estimated Hoeffding components

    a_i  = rowmean_i - mean
    b_t  = colmean_t - mean
    w_it = D_it - rowmean_i - colmean_t + mean

and each bootstrap draw perturbs them with independent row multipliers
``eta_i`` and column multipliers ``xi_t``:

    theta*_b - mean = N^-1 sum_i eta_i a_i + T^-1 sum_t xi_t b_t
                      + (NT)^-1 sum_it eta_i xi_t w_it

The last term is optional (``include_degenerate_term``). The interval is the
basic bootstrap interval ``[mean - q_hi, mean - q_lo]`` built from quantiles
of the deviations ``theta*_b - mean``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from twoway.estimators import Flag, IntervalResult, Method, PanelLike, _values


class Multiplier(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


@dataclass(frozen=True)
class BootstrapConfig:
    n_draws: int = 399
    multiplier: Multiplier = Multiplier.GAUSSIAN
    include_degenerate_term: bool = True
    level: float = 0.95

    def __post_init__(self) -> None:
        if isinstance(self.n_draws, bool) or int(self.n_draws) != self.n_draws:
            raise TypeError(f"n_draws must be an integer, got {self.n_draws!r}")
        if self.n_draws < 1:
            raise ValueError(f"n_draws must be >= 1, got {self.n_draws}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        object.__setattr__(self, "n_draws", int(self.n_draws))
        object.__setattr__(self, "multiplier", Multiplier(self.multiplier))
        object.__setattr__(self, "include_degenerate_term", bool(self.include_degenerate_term))

    def to_dict(self) -> dict:
        return {
            "n_draws": self.n_draws,
            "multiplier": self.multiplier.value,
            "include_degenerate_term": self.include_degenerate_term,
            "level": self.level,
        }


def empirical_quantile(samples, p):
    """Quantile of ``samples`` by linear interpolation of order statistics.

    With sorted values ``x_(0) <= ... <= x_(n-1)`` and ``h = (n - 1) * p``,
    the result is ``x_(floor h) + (h - floor h) * (x_(floor h + 1) - x_(floor h))``.
    This is the "linear" (type 7) convention; ``p = 0`` gives the minimum and
    ``p = 1`` the maximum. ``p`` may be a scalar or an array.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("cannot take a quantile of an empty sample")
    probs = np.asarray(p, dtype=float)
    if np.any((probs < 0) | (probs > 1)) or np.any(np.isnan(probs)):
        raise ValueError("p must lie in [0, 1]")
    h = (x.size - 1) * probs
    lo = np.floor(h).astype(np.intp)
    hi = np.minimum(lo + 1, x.size - 1)
    frac = h - lo
    q = x[lo] + frac * (x[hi] - x[lo])
    return float(q) if q.ndim == 0 else q


def hoeffding_estimates(panel: PanelLike) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(mean, a_hat, b_hat, w_hat)`` for a panel."""
    values = _values(panel)
    mean = values.mean()
    row_means = values.mean(axis=1)
    col_means = values.mean(axis=0)
    a_hat = row_means - mean
    b_hat = col_means - mean
    w_hat = values - row_means[:, None] - col_means[None, :] + mean
    return float(mean), a_hat, b_hat, w_hat


def _multipliers(rng: np.random.Generator, kind: Multiplier, shape) -> np.ndarray:
    if kind is Multiplier.GAUSSIAN:
        return rng.standard_normal(shape)
    return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0


def bootstrap_deviations(
    panel: PanelLike, config: BootstrapConfig, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``theta*_b - mean`` for ``b = 1..n_draws``.

    Row multipliers for all draws are generated first (an n_draws x N block)
    and then column multipliers (n_draws x T), so the output depends only on
    the state of ``rng``.
    """
    values = _values(panel)
    n, t = values.shape
    if n < 2 or t < 2:
        raise ValueError(f"panel is {n}x{t}; the bootstrap needs at least 2x2")
    _, a_hat, b_hat, w_hat = hoeffding_estimates(values)
    eta = _multipliers(rng, config.multiplier, (config.n_draws, n))
    xi = _multipliers(rng, config.multiplier, (config.n_draws, t))
    dev = eta @ a_hat / n + xi @ b_hat / t
    if config.include_degenerate_term:
        dev = dev + np.einsum("bt,bt->b", eta @ w_hat, xi) / (n * t)
    return dev


def interval_from_deviations(estimate: float, deviations, level: float) -> IntervalResult:
    alpha = 1.0 - level
    q_lo, q_hi = empirical_quantile(deviations, [alpha / 2.0, 1.0 - alpha / 2.0])
    lower = estimate - q_hi
    upper = estimate - q_lo
    dev = np.asarray(deviations, dtype=float)
    se = float(np.sqrt(np.mean((dev - dev.mean()) ** 2)))
    flags = frozenset({Flag.DEGENERATE_INTERVAL}) if lower == upper else frozenset()
    return IntervalResult(
        estimate=estimate,
        std_error=se,
        ci_lower=float(lower),
        ci_upper=float(upper),
        level=level,
        method=Method.BOOTSTRAP,
        flags=flags,
    )


def two_way_wild_bootstrap(
    panel: PanelLike, config: BootstrapConfig, rng: np.random.Generator
) -> IntervalResult:
    """Basic two-way wild bootstrap interval for the mean of ``panel``.

    ``std_error`` is the standard deviation of the bootstrap deviations.
    """
    values = _values(panel)
    deviations = bootstrap_deviations(values, config, rng)
    return interval_from_deviations(float(values.mean()), deviations, config.level)

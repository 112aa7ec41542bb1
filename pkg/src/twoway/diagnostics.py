"""Oracle diagnostics for the two-way factor DGP.

Everything here relies on the latent factors being known: the Hoeffding
components of the sample mean, the moment ratios that govern whether the
degenerate interaction term is asymptotically gaussian, the martingale
difference construction behind that limit theory, and simple normality
summaries of simulated estimates.

Notation: ``a_kernel``, ``b_kernel``, ``w_kernel`` and ``r_kernel`` are the
unscaled centered conditional expectations from
:class:`twoway.dgp.OracleKernels`. The scaled components carry the
``1/N``, ``1/T`` and ``1/(NT)`` factors so that they sum to
``mean(D) - theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from twoway._normal import norm_cdf, norm_ppf
from twoway.bootstrap import empirical_quantile
from twoway.dgp import DgpSpec, LatentDraw, oracle_kernels


class VarianceShares(NamedTuple):
    """Variances of the linear, interaction and idiosyncratic sums."""

    linear: float
    interaction: float
    idiosyncratic: float

    @property
    def total(self) -> float:
        return self.linear + self.interaction + self.idiosyncratic


@dataclass(frozen=True, eq=False)
class HoeffdingParts:
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    r: np.ndarray
    variance_shares: VarianceShares

    @property
    def linear(self) -> float:
        return math.fsum(self.a) + math.fsum(self.b)

    @property
    def interaction(self) -> float:
        return math.fsum(self.w.ravel())

    @property
    def idiosyncratic(self) -> float:
        return math.fsum(self.r.ravel())

    @property
    def total(self) -> float:
        """Sum of all four components, i.e. ``mean(D) - theta``."""
        return math.fsum(
            np.concatenate([self.a, self.b, self.w.ravel(), self.r.ravel()])
        )


def closed_form_variance(spec: DgpSpec) -> VarianceShares:
    k = oracle_kernels(spec)
    n, t = spec.n_rows, spec.n_cols
    return VarianceShares(
        linear=k.a_second_moment / n + k.b_second_moment / t,
        interaction=k.w_second_moment / (n * t),
        idiosyncratic=k.r_second_moment / (n * t),
    )


def hoeffding_decompose(spec: DgpSpec, latents: LatentDraw) -> HoeffdingParts:
    latents.check_against(spec)
    k = oracle_kernels(spec)
    n, t = spec.n_rows, spec.n_cols
    return HoeffdingParts(
        a=k.a(latents.alpha) / n,
        b=k.b(latents.gamma) / t,
        w=k.w_matrix(latents.alpha, latents.gamma) / (n * t),
        r=k.r(latents.eps) / (n * t),
        variance_shares=closed_form_variance(spec),
    )


# --------------------------------------------------------------------------
# Moment-ratio conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    """Moment ratios of the interaction kernel and the linear terms.

    ``lyapunov_ratio``
        ``N^-1 E[w^4] / (E[w^2])^2``.
    ``hall_ratio_rows``, ``hall_ratio_cols``
        ``E[(E[w(a1,g) w(a2,g) | a1,a2])^2] / (E[w^2])^2`` and its column
        analogue.
    ``hall_ratio_total``
        Their sum, the full Hall-type ratio.
    ``hall_ratio``
        Their average. Vanishes exactly when ``hall_ratio_total`` does and
        equals ``sum w^4 / (sum w^2)^2`` for the factor DGP.
    ``a2_first_ratio``, ``a2_second_ratio``
        The two linear-versus-interaction ratios, in their N = T form.
    ``eigen_ratio``
        ``sum w_j^4 / (sum w_j^2)^2``, computed exactly from the weights.

    Expected values like ``E[D^2] >= kappa_min`` and ``E|D|^3 < inf`` hold for
    every spec with gaussian latents and are not reported.
    """

    lyapunov_ratio: float
    hall_ratio: float
    hall_ratio_rows: float
    hall_ratio_cols: float
    hall_ratio_total: float
    a2_first_ratio: float
    a2_second_ratio: float
    eigen_ratio: float
    mc_std_errors: dict = field(default_factory=dict)
    mc_draws: int = 0

    RATIO_FIELDS = (
        "lyapunov_ratio",
        "hall_ratio",
        "hall_ratio_rows",
        "hall_ratio_cols",
        "hall_ratio_total",
        "a2_first_ratio",
        "a2_second_ratio",
    )

    def to_row(self) -> dict:
        row = {"mc_draws": self.mc_draws, "eigen_ratio": self.eigen_ratio}
        for name in self.RATIO_FIELDS:
            row[name] = getattr(self, name)
            row[name + "_se"] = self.mc_std_errors.get(name, 0.0)
        return row


def eigen_ratio(weights: Sequence[float]) -> float:
    """``sum w^4 / (sum w^2)^2``; equal weights give exactly ``1/J``."""
    w = [float(x) for x in weights]
    if not w:
        raise ValueError("weights must be non-empty")
    if len(set(w)) == 1:
        return 1.0 / len(w)
    s2 = math.fsum(x * x for x in w)
    s4 = math.fsum(x**4 for x in w)
    return s4 / (s2 * s2)


def _div(num: float, den: float) -> float:
    # 0/0 = 0 convention
    if den == 0.0:
        if num == 0.0:
            return 0.0
        return math.inf
    return num / den


def _ratio_functions(n: int):
    """Ratios as functions of the vector of raw moments.

    Moment order: E[w^2], E[w^4], E[c_rows^2], E[c_cols^2], E[a^2], E[a^4],
    E[b^2], E[b^4], E[(a w)^2], E[(b w)^2]; a, b and w already scaled.
    """

    def lyapunov(m):
        return _div(m[1] / n, m[0] ** 2)

    def hall_rows(m):
        return _div(m[2], m[0] ** 2)

    def hall_cols(m):
        return _div(m[3], m[0] ** 2)

    def hall_total(m):
        return _div(m[2] + m[3], m[0] ** 2)

    def hall_avg(m):
        return 0.5 * hall_total(m)

    def a2_first(m):
        num = m[5] + m[7]
        den = n * (m[4] ** 2 + m[6] ** 2) + n**3 * m[0] ** 2
        return _div(num, den)

    def a2_second(m):
        num = n * (m[8] + m[9])
        den = m[4] ** 2 + m[6] ** 2 + n**2 * m[0] ** 2
        return _div(num, den)

    return {
        "lyapunov_ratio": lyapunov,
        "hall_ratio": hall_avg,
        "hall_ratio_rows": hall_rows,
        "hall_ratio_cols": hall_cols,
        "hall_ratio_total": hall_total,
        "a2_first_ratio": a2_first,
        "a2_second_ratio": a2_second,
    }


def _delta_method_se(samples: np.ndarray, func: Callable) -> tuple[float, float]:
    """Plug-in estimate of ``func(E[X])`` and its delta-method standard error."""
    n = samples.shape[0]
    means = samples.mean(axis=0)
    cov = np.atleast_2d(np.cov(samples, rowvar=False, ddof=1))
    value = func(means)
    grad = np.zeros_like(means)
    for k in range(means.size):
        h = 1e-6 * max(abs(means[k]), 1.0)
        up = means.copy()
        dn = means.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (func(up) - func(dn)) / (2 * h)
    var = float(grad @ cov @ grad) / n
    return float(value), math.sqrt(max(var, 0.0))


def _moment_samples(spec: DgpSpec, draws: int, rng: np.random.Generator) -> np.ndarray:
    k = oracle_kernels(spec)
    j = spec.n_factors
    n, t = spec.n_rows, spec.n_cols
    alpha = rng.standard_normal((2, draws, j))
    gamma = rng.standard_normal((2, draws, j))
    lam2 = k.weights**2
    w11 = k.w(alpha[0], gamma[0]) / (n * t)
    w12 = k.w(alpha[0], gamma[1]) / (n * t)
    w21 = k.w(alpha[1], gamma[0]) / (n * t)
    # E[w(a1,g) w(a2,g) | a1, a2] = sum_j lam_j^2 a1j a2j for standard normal g
    c_rows = (alpha[0] * alpha[1]) @ lam2 / (n * t) ** 2
    c_cols = (gamma[0] * gamma[1]) @ lam2 / (n * t) ** 2
    a1 = k.a(alpha[0]) / n
    b1 = k.b(gamma[0]) / t
    return np.column_stack(
        [
            w11**2,
            w11**4,
            c_rows**2,
            c_cols**2,
            a1**2,
            a1**4,
            b1**2,
            b1**4,
            (a1 * w12) ** 2,
            (b1 * w21) ** 2,
        ]
    )


def closed_form_moments(spec: DgpSpec) -> np.ndarray:
    """Exact values of the moments used by :func:`assumption_report`.

    Uses Isserlis' theorem for standard normal latents, with
    ``s2 = sum lam^2`` and ``s4 = sum lam^4``:
    ``E[w^4] = 3 s2^2 + 6 s4``, ``E[c^2] = s4``, ``E[a^4] = 3 delta^4 s2^2``,
    ``E[(a w)^2] = delta^2 (s2^2 + 2 s4)``.
    """
    k = oracle_kernels(spec)
    s2, s4 = k.weight_power_sums
    d2 = spec.delta**2
    n, t = spec.n_rows, spec.n_cols
    nt = n * t
    return np.array(
        [
            s2 / nt**2,
            (3 * s2**2 + 6 * s4) / nt**4,
            s4 / nt**4,
            s4 / nt**4,
            d2 * s2 / n**2,
            3 * d2**2 * s2**2 / n**4,
            d2 * s2 / t**2,
            3 * d2**2 * s2**2 / t**4,
            d2 * (s2**2 + 2 * s4) / (n**2 * nt**2),
            d2 * (s2**2 + 2 * s4) / (t**2 * nt**2),
        ]
    )


def closed_form_report(spec: DgpSpec) -> AssumptionReport:
    """The exact ratios for the factor DGP (no Monte Carlo error)."""
    moments = closed_form_moments(spec)
    funcs = _ratio_functions(spec.n_rows)
    values = {name: f(moments) for name, f in funcs.items()}
    return AssumptionReport(
        eigen_ratio=eigen_ratio(spec.weights),
        mc_std_errors={name: 0.0 for name in funcs},
        mc_draws=0,
        **values,
    )


def assumption_report(
    spec: DgpSpec, mc_draws: int, rng: np.random.Generator
) -> AssumptionReport:
    """Monte Carlo estimates of the moment ratios with delta-method SEs.

    Each draw uses fresh ``alpha_1, alpha_2, gamma_1, gamma_2``. The inner
    conditional expectations in the Hall-type ratio use the closed form
    ``sum_j lam_j^2 alpha_1j alpha_2j``.
    """
    if mc_draws < 1000:
        raise ValueError(f"mc_draws must be >= 1000, got {mc_draws}")
    samples = _moment_samples(spec, int(mc_draws), rng)
    # rescale columns to O(1) so the covariance is well conditioned
    scale = closed_form_moments(spec)
    scale = np.where(scale > 0, scale, 1.0)
    scaled = samples / scale
    funcs = _ratio_functions(spec.n_rows)
    values = {}
    ses = {}
    for name, f in funcs.items():
        values[name], ses[name] = _delta_method_se(scaled, lambda m, f=f: f(m * scale))
    return AssumptionReport(
        eigen_ratio=eigen_ratio(spec.weights),
        mc_std_errors=ses,
        mc_draws=int(mc_draws),
        **values,
    )


# --------------------------------------------------------------------------
# Martingale difference construction
# --------------------------------------------------------------------------


def interaction_sd(spec: DgpSpec) -> float:
    """``sigma_W = sqrt(sum_it E[w_it^2])`` for the scaled interaction terms."""
    return math.sqrt(closed_form_variance(spec).interaction)


def martingale_differences(w: np.ndarray, sigma_w: float) -> np.ndarray:
    """Martingale differences ``U_1..U_T`` from scaled interaction terms.

    ``w`` has shape ``(..., N, T)`` with ``N <= T``. With 1-based indices,
    for ``s <= N``
    ``U_s = (sum_{t<s} w_st + w_ss + sum_{i<s} w_is) / sigma_w`` and for
    ``s > N`` ``U_s = sum_{i<=N} w_is / sigma_w``. Leading axes are batch axes.
    """
    w = np.asarray(w, dtype=float)
    n, t = w.shape[-2:]
    if n > t:
        raise ValueError(f"need N <= T, got N={n}, T={t}")
    if not sigma_w > 0:
        raise ValueError("sigma_W is zero; the interaction term is degenerate")
    out = np.empty(w.shape[:-2] + (t,))
    for s in range(t):
        if s < n:
            out[..., s] = (
                w[..., s, :s].sum(axis=-1) + w[..., s, s] + w[..., :s, s].sum(axis=-1)
            )
        else:
            out[..., s] = w[..., :, s].sum(axis=-1)
    return out / sigma_w


def martingale_sequence(spec: DgpSpec, latents: LatentDraw) -> np.ndarray:
    if spec.n_rows > spec.n_cols:
        raise ValueError(f"need N <= T, got N={spec.n_rows}, T={spec.n_cols}")
    parts = hoeffding_decompose(spec, latents)
    return martingale_differences(parts.w, interaction_sd(spec))


# --------------------------------------------------------------------------
# Products of interaction kernels
# --------------------------------------------------------------------------


def vanishing_moment_check(
    spec: DgpSpec,
    index_pattern: Sequence[tuple[int, int]],
    mc_draws: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo mean of ``prod_k w_kernel(alpha_{i_k}, gamma_{t_k})``.

    Indices are 1-based and limited to a 4 x 4 grid. Returns the estimate and
    its standard error. The unscaled kernel is used, so a pattern like
    ``[(1, 1), (1, 1)]`` estimates ``E[w^2] = sum lam^2``.
    """
    pattern = [(int(i), int(t)) for i, t in index_pattern]
    if not pattern:
        raise ValueError("index_pattern is empty")
    if any(not (1 <= i <= 4 and 1 <= t <= 4) for i, t in pattern):
        raise ValueError("pattern indices must lie in 1..4")
    if mc_draws < 10_000:
        raise ValueError(f"mc_draws must be >= 10000, got {mc_draws}")
    k = oracle_kernels(spec)
    n_i = max(i for i, _ in pattern)
    n_t = max(t for _, t in pattern)
    alpha = rng.standard_normal((mc_draws, n_i, spec.n_factors))
    gamma = rng.standard_normal((mc_draws, n_t, spec.n_factors))
    prod = np.ones(mc_draws)
    for i, t in pattern:
        prod *= k.w(alpha[:, i - 1], gamma[:, t - 1])
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(mc_draws))


def has_singleton_index(index_pattern: Sequence[tuple[int, int]]) -> bool:
    """True when some row or column index occurs exactly once."""
    rows = [i for i, _ in index_pattern]
    cols = [t for _, t in index_pattern]
    return any(rows.count(i) == 1 for i in rows) or any(cols.count(t) == 1 for t in cols)


# --------------------------------------------------------------------------
# Normality summaries
# --------------------------------------------------------------------------

DEFAULT_QQ_PROBS = np.round(np.arange(1, 200) * 0.005, 3)


@dataclass(frozen=True, eq=False)
class NormalityStats:
    ks_distance: float
    standardized_sample_mean: float
    standardized_sample_sd: float
    qq_points: list
    probs: np.ndarray
    sample_mean: float
    sample_sd: float
    n_samples: int


def ks_distance_normal(z) -> float:
    """Sup-distance between the empirical CDF of ``z`` and Phi."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    cdf = norm_cdf(z)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(min(max(upper.max(), lower.max(), 0.0), 1.0))


def normality_stats(samples, probs=None) -> NormalityStats:
    """Standardize by sample mean and sd (ddof=1), then compare with N(0, 1).

    ``qq_points`` pairs ``Phi^-1(p)`` with the interpolated sample quantile of
    the standardized data for each ``p`` in ``probs`` (default: 199 points
    from 0.005 to 0.995).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    probs = DEFAULT_QQ_PROBS if probs is None else np.sort(np.asarray(probs, dtype=float))
    if np.any((probs <= 0) | (probs >= 1)):
        raise ValueError("QQ probabilities must lie in (0, 1)")
    mean = math.fsum(x) / x.size
    sd = math.sqrt(math.fsum((x - mean) ** 2) / (x.size - 1))
    if sd == 0.0 or sd < 1e-14 * max(abs(mean), 1.0):
        raise ValueError("samples have zero standard deviation")
    z = (x - mean) / sd
    theoretical = norm_ppf(probs)
    sample_q = empirical_quantile(z, probs)
    return NormalityStats(
        ks_distance=ks_distance_normal(z),
        standardized_sample_mean=float(z.mean()),
        standardized_sample_sd=float(z.std(ddof=1)),
        qq_points=list(zip(theoretical.tolist(), sample_q.tolist())),
        probs=probs,
        sample_mean=mean,
        sample_sd=sd,
        n_samples=int(x.size),
    )

"""Two-way factor data-generating process.

Panels are drawn from

    D_it = sum_j weights[j] * (alpha_ij - delta) * (gamma_tj - delta) + phi * eps_it

with alpha, gamma and eps independent standard normals. Uniform weights
``1/J`` give the simulation design used throughout the package; arbitrary
positive weights let the eigenvalue-concentration diagnostics be exercised.

Because the latent factors are generated here, every conditional
expectation of D_it is available in closed form (:func:`oracle_kernels`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np


def _positive_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the two-way factor DGP.

    Parameters
    ----------
    n_rows, n_cols : int
        Number of row clusters (N) and column clusters (T).
    n_factors : int
        Number of interactive factors (J).
    delta : float
        Mean shift subtracted from every latent factor.
    phi : float
        Scale of the idiosyncratic component, ``phi >= 0``.
    weights : sequence of float, optional
        Positive factor weights; ``None`` means uniform ``1/J``.
    """

    n_rows: int
    n_cols: int
    n_factors: int = 1
    delta: float = 0.0
    phi: float = 0.0
    weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_rows", _positive_int("n_rows", self.n_rows))
        object.__setattr__(self, "n_cols", _positive_int("n_cols", self.n_cols))
        object.__setattr__(self, "n_factors", _positive_int("n_factors", self.n_factors))
        delta = float(self.delta)
        phi = float(self.phi)
        if not np.isfinite(delta):
            raise ValueError(f"delta must be finite, got {self.delta!r}")
        if not np.isfinite(phi) or phi < 0:
            raise ValueError(f"phi must be finite and >= 0, got {self.phi!r}")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "phi", phi)

        if self.weights is None:
            weights = (1.0 / self.n_factors,) * self.n_factors
        else:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != self.n_factors:
                raise ValueError(
                    f"weights has {len(weights)} entries but n_factors is {self.n_factors}"
                )
            if not all(np.isfinite(w) and w > 0 for w in weights):
                raise ValueError("every weight must be finite and > 0")
        object.__setattr__(self, "weights", weights)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def with_changes(self, **changes) -> "DgpSpec":
        """Copy with some fields replaced; changing J resets uniform weights."""
        params = self.to_dict()
        if "n_factors" in changes and "weights" not in changes:
            params["weights"] = None
        params.update(changes)
        return DgpSpec(**params)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "n_factors": self.n_factors,
            "delta": self.delta,
            "phi": self.phi,
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DgpSpec":
        allowed = {"n_rows", "n_cols", "n_factors", "delta", "phi", "weights"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValueError(f"unknown DgpSpec field {unknown[0]!r}")
        return cls(**dict(data))


@dataclass(frozen=True, eq=False)
class Panel:
    """An N x T array; rows are i-clusters and columns are t-clusters."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"panel data must be two-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("panel is empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("panel contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def T(self) -> "Panel":
        return Panel(self.data.T)


@dataclass(frozen=True, eq=False)
class LatentDraw:
    """Latent factors behind one panel.

    ``alpha`` is N x J, ``gamma`` is T x J and ``eps`` is N x T.
    """

    alpha: np.ndarray
    gamma: np.ndarray
    eps: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alpha", "gamma", "eps"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if self.alpha.shape[1] != self.gamma.shape[1]:
            raise ValueError(
                f"alpha has {self.alpha.shape[1]} factors but gamma has {self.gamma.shape[1]}"
            )
        if self.eps.shape != (self.alpha.shape[0], self.gamma.shape[0]):
            raise ValueError(
                f"eps has shape {self.eps.shape}, expected "
                f"{(self.alpha.shape[0], self.gamma.shape[0])}"
            )

    def check_against(self, spec: DgpSpec) -> None:
        expected = {
            "alpha": (spec.n_rows, spec.n_factors),
            "gamma": (spec.n_cols, spec.n_factors),
            "eps": (spec.n_rows, spec.n_cols),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, spec requires {shape}")


def sample_latents(spec: DgpSpec, rng: np.random.Generator) -> LatentDraw:
    """Draw alpha, gamma and eps, in that order, from ``rng``."""
    alpha = rng.standard_normal((spec.n_rows, spec.n_factors))
    gamma = rng.standard_normal((spec.n_cols, spec.n_factors))
    eps = rng.standard_normal((spec.n_rows, spec.n_cols))
    return LatentDraw(alpha, gamma, eps)


def assemble_panel(spec: DgpSpec, latents: LatentDraw) -> Panel:
    latents.check_against(spec)
    shifted_alpha = (latents.alpha - spec.delta) * spec.weight_array
    data = shifted_alpha @ (latents.gamma - spec.delta).T
    if spec.phi != 0.0:
        data = data + spec.phi * latents.eps
    return Panel(data)


def sample_panel(spec: DgpSpec, rng: np.random.Generator) -> Panel:
    return assemble_panel(spec, sample_latents(spec, rng))


def true_mean(spec: DgpSpec) -> float:
    """Population mean of D_it: ``delta**2 * sum(weights)``."""
    return spec.delta**2 * float(np.sum(spec.weight_array))


@dataclass(frozen=True, eq=False)
class OracleKernels:
    """Centered conditional-expectation kernels of D_it.

    With ``theta = true_mean(spec)``,

    * ``a(alpha_i) = E[D_it | alpha_i] - theta = -delta * sum_j w_j alpha_ij``
    * ``b(gamma_t) = E[D_it | gamma_t] - theta = -delta * sum_j w_j gamma_tj``
    * ``w(alpha_i, gamma_t) = sum_j w_j alpha_ij gamma_tj``
    * ``r(eps_it) = phi * eps_it``

    and ``D_it - theta = a + b + w + r`` holds identically. Factor rows are
    taken along the last axis, so leading axes broadcast.
    """

    delta: float
    phi: float
    weights: np.ndarray

    def a(self, alpha) -> np.ndarray:
        return -self.delta * (np.asarray(alpha, dtype=float) @ self.weights)

    def b(self, gamma) -> np.ndarray:
        return -self.delta * (np.asarray(gamma, dtype=float) @ self.weights)

    def w(self, alpha, gamma) -> np.ndarray:
        """Interaction kernel for paired rows (elementwise over leading axes)."""
        alpha = np.asarray(alpha, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        return np.sum(alpha * gamma * self.weights, axis=-1)

    def w_matrix(self, alpha, gamma) -> np.ndarray:
        """Interaction kernel for every (row of alpha, row of gamma) pair."""
        alpha = np.asarray(alpha, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        return (alpha * self.weights) @ np.swapaxes(gamma, -1, -2)

    def r(self, eps) -> np.ndarray:
        return self.phi * np.asarray(eps, dtype=float)

    # Moments of the kernels under standard normal latents.
    @property
    def weight_power_sums(self) -> tuple[float, float]:
        """``(sum w_j**2, sum w_j**4)``."""
        return float(np.sum(self.weights**2)), float(np.sum(self.weights**4))

    @property
    def a_second_moment(self) -> float:
        return self.delta**2 * self.weight_power_sums[0]

    b_second_moment = a_second_moment

    @property
    def w_second_moment(self) -> float:
        return self.weight_power_sums[0]

    @property
    def r_second_moment(self) -> float:
        return self.phi**2


def oracle_kernels(spec: DgpSpec) -> OracleKernels:
    return OracleKernels(delta=spec.delta, phi=spec.phi, weights=spec.weight_array)


def population_variance(spec: DgpSpec) -> float:
    """Var(D_it) = sum_j w_j**2 * (1 + 2 delta**2) + phi**2."""
    k = oracle_kernels(spec)
    return k.a_second_moment + k.b_second_moment + k.w_second_moment + k.r_second_moment

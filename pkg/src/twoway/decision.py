"""When is the TWCR standard error usable?

Two encodings of the same guidance:

* a verdict table over four booleans (is J small; are the additive row,
  column and idiosyncratic components degenerate), where only the
  all-degenerate, few-factor row rules TWCR out;
* a three-gate decision tree (non-degenerate? sparse network? very few
  latent factors?).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from twoway.dgp import DgpSpec

DEFAULT_J_SMALL_THRESHOLD = 10


class TableVerdict(str, enum.Enum):
    CAN_USE = "CanUse"
    CANNOT_USE = "CannotUse"


class TreeVerdict(str, enum.Enum):
    TWCR_VALID = "TwcrValid"
    TWCR_NOT_VALID = "TwcrNotValid"


class Gate(str, enum.Enum):
    """The tree node that decided the verdict."""

    NONDEGENERATE = "nondegenerate"
    SPARSE_NETWORK = "sparse_network"
    VERY_FEW_FACTORS = "very_few_factors"
    MANY_FACTORS = "many_factors"


@dataclass(frozen=True)
class DgpCharacterization:
    j_small: Optional[bool] = None
    alpha0_degenerate: Optional[bool] = None
    gamma0_degenerate: Optional[bool] = None
    eps_degenerate: Optional[bool] = None
    nondegenerate_assumed: Optional[bool] = None
    sparse_network: Optional[bool] = None
    very_few_factors: Optional[bool] = None

    TABLE_FIELDS = ("j_small", "alpha0_degenerate", "gamma0_degenerate", "eps_degenerate")
    TREE_FIELDS = ("nondegenerate_assumed", "sparse_network", "very_few_factors")

    def _require(self, names) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"missing characterization field(s): {', '.join(missing)}")

    @property
    def has_table_fields(self) -> bool:
        return all(getattr(self, n) is not None for n in self.TABLE_FIELDS)

    @property
    def has_tree_fields(self) -> bool:
        return all(getattr(self, n) is not None for n in self.TREE_FIELDS)


def table_verdict(c: DgpCharacterization) -> TableVerdict:
    c._require(DgpCharacterization.TABLE_FIELDS)
    if c.j_small and c.alpha0_degenerate and c.gamma0_degenerate and c.eps_degenerate:
        return TableVerdict.CANNOT_USE
    return TableVerdict.CAN_USE


def explain_tree(c: DgpCharacterization) -> tuple[TreeVerdict, Gate]:
    """Tree verdict together with the gate that produced it."""
    c._require(DgpCharacterization.TREE_FIELDS)
    if c.nondegenerate_assumed:
        return TreeVerdict.TWCR_VALID, Gate.NONDEGENERATE
    if c.sparse_network:
        return TreeVerdict.TWCR_VALID, Gate.SPARSE_NETWORK
    if c.very_few_factors:
        return TreeVerdict.TWCR_NOT_VALID, Gate.VERY_FEW_FACTORS
    return TreeVerdict.TWCR_VALID, Gate.MANY_FACTORS


def tree_verdict(c: DgpCharacterization) -> TreeVerdict:
    return explain_tree(c)[0]


def characterize_spec(
    spec: DgpSpec, j_small_threshold: int = DEFAULT_J_SMALL_THRESHOLD
) -> DgpCharacterization:
    """Map a factor DGP onto the table and tree inputs.

    The centered-product DGP only has additive row and column effects when
    ``delta != 0``; the idiosyncratic term is degenerate when ``phi == 0``.
    Sparse networks are never inferred.
    """
    if isinstance(j_small_threshold, bool) or int(j_small_threshold) < 1:
        raise ValueError(f"j_small_threshold must be >= 1, got {j_small_threshold}")
    j_small = spec.n_factors <= int(j_small_threshold)
    additive_degenerate = spec.delta == 0.0
    return DgpCharacterization(
        j_small=j_small,
        alpha0_degenerate=additive_degenerate,
        gamma0_degenerate=additive_degenerate,
        eps_degenerate=spec.phi == 0.0,
        nondegenerate_assumed=not additive_degenerate,
        sparse_network=False,
        very_few_factors=j_small,
    )

"""Memory accounting.

One unit is one stored transition (world model), one search-tree node
(plan), one hidden neuron, or one replay-buffer slot.  Reward estimates,
visit counters and other bookkeeping are not charged.  Output layers of
Q-networks are fixed by the action count and are excluded as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

DEFAULT_TOTAL = 500
DEFAULT_HIDDEN = (128, 256, 64)
DEFAULT_BUFFER = 52


class BudgetError(ValueError):
    """An allocation does not fit the memory budget."""


@dataclass(frozen=True)
class MemoryBudget:
    total: int
    model_units: int
    plan_units: int

    def __post_init__(self):
        if self.model_units < 0 or self.plan_units < 0:
            raise BudgetError(f"negative allocation in {self}")
        if self.model_units + self.plan_units != self.total:
            raise BudgetError(
                f"model {self.model_units} + plan {self.plan_units} != total {self.total}")


def make_split(total: int, plan_units: int) -> MemoryBudget:
    """Give ``plan_units`` to the plan and the rest of ``total`` to the model."""
    if total < 0 or not 0 <= plan_units <= total:
        raise BudgetError(f"plan_units {plan_units} outside [0, {total}]")
    return MemoryBudget(total=total, model_units=total - plan_units, plan_units=plan_units)


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def allocate_pt_layers(hidden_widths: Sequence[int], permanent_fraction: float
                       ) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split every hidden layer between the permanent and transient nets.

    The permanent share of each layer is ``fraction * width`` rounded half
    up, computed on the decimal value of ``fraction`` so that e.g. 0.35 of
    10 gives 4 rather than falling victim to binary rounding.  The
    transient net keeps the remainder.
    """
    if not 0.0 <= permanent_fraction <= 1.0:
        raise BudgetError(f"permanent fraction {permanent_fraction} outside [0, 1]")
    if any(w <= 0 for w in hidden_widths):
        raise BudgetError(f"hidden widths must be positive: {list(hidden_widths)}")
    frac = Fraction(str(permanent_fraction))
    permanent = tuple(_round_half_up(frac * w) for w in hidden_widths)
    transient = tuple(w - p for w, p in zip(hidden_widths, permanent))
    return permanent, transient


@dataclass(frozen=True)
class PtSplit:
    hidden_widths: tuple[int, ...]
    buffer_capacity: int
    permanent_fraction: float
    permanent_widths: tuple[int, ...]
    transient_widths: tuple[int, ...]

    @property
    def units(self) -> int:
        return sum(self.hidden_widths) + self.buffer_capacity

    def __post_init__(self):
        if len(self.permanent_widths) != len(self.hidden_widths) or \
                len(self.transient_widths) != len(self.hidden_widths):
            raise BudgetError("per-layer width lists differ in length")
        for w, p, t in zip(self.hidden_widths, self.permanent_widths, self.transient_widths):
            if p < 0 or t < 0 or p + t != w:
                raise BudgetError(f"layer of width {w} split as {p} + {t}")
        if self.buffer_capacity < 0:
            raise BudgetError("negative buffer capacity")


def make_pt_split(hidden_widths: Sequence[int] = DEFAULT_HIDDEN,
                  buffer_capacity: int = DEFAULT_BUFFER,
                  permanent_fraction: float = 0.5) -> PtSplit:
    perm, trans = allocate_pt_layers(hidden_widths, permanent_fraction)
    return PtSplit(tuple(hidden_widths), buffer_capacity, permanent_fraction, perm, trans)


def verify_budget(split: PtSplit, total: int = DEFAULT_TOTAL) -> bool:
    """True iff hidden units plus buffer slots use exactly ``total`` units."""
    return split.units == total

"""Count-based maximum-likelihood model of dynamics and rewards."""

from __future__ import annotations

import bisect
import csv
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

import numpy as np

from membudget.core import Transition
from membudget.memory_ledger import BudgetError, MemoryBudget


class KnownStep(NamedTuple):
    next_state: int
    reward: float
    terminal: bool


@dataclass
class TabularModel:
    """p(s'|s,a) = count(s,a,s') / count(s,a); rewards averaged per (s,a,s').

    Unobserved pairs are left unknown rather than smoothed:
    ``sample_next`` returns ``None`` for them.
    """

    counts: dict[tuple[int, int], dict[int, int]]
    reward_sums: dict[tuple[int, int, int], float]
    terminal_flags: dict[tuple[int, int, int], bool]
    stored_transitions: int

    def __post_init__(self):
        # Sampling tables: successors and cumulative counts per known pair.
        self._table = {}
        self._known = defaultdict(set)
        for (s, a), succ in self.counts.items():
            nexts = sorted(succ)
            cum = np.cumsum([succ[n] for n in nexts]).tolist()
            steps = [KnownStep(n, self.reward(s, a, n), self.terminal_flags[(s, a, n)])
                     for n in nexts]
            self._table[(s, a)] = (steps, cum)
            self._known[s].add(a)

    def prob(self, s: int, a: int, s_next: int) -> Fraction:
        succ = self.counts.get((s, a))
        if not succ:
            return Fraction(0)
        return Fraction(succ.get(s_next, 0), sum(succ.values()))

    def reward(self, s: int, a: int, s_next: int) -> float:
        n = self.counts[(s, a)][s_next]
        return self.reward_sums[(s, a, s_next)] / n

    def known_actions(self, s: int) -> frozenset[int]:
        return frozenset(self._known.get(s, ()))

    def is_known(self, s: int, a: int) -> bool:
        return (s, a) in self._table

    def sample_next(self, s: int, a: int, rng: np.random.Generator) -> Optional[KnownStep]:
        entry = self._table.get((s, a))
        if entry is None:
            return None
        if len(entry[0]) == 1:
            return entry[0][0]
        return self.draw(s, a, rng.random())

    def draw(self, s: int, a: int, u: float) -> Optional[KnownStep]:
        """Like ``sample_next`` with the uniform variate ``u`` in [0, 1) supplied."""
        entry = self._table.get((s, a))
        if entry is None:
            return None
        steps, cum = entry
        if len(steps) == 1:
            return steps[0]
        return steps[bisect.bisect_right(cum, u * cum[-1])]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["state", "action", "next_state", "count", "mean_reward", "terminal"])
            for (s, a) in sorted(self.counts):
                for n in sorted(self.counts[(s, a)]):
                    writer.writerow([s, a, n, self.counts[(s, a)][n],
                                     repr(self.reward(s, a, n)),
                                     int(self.terminal_flags[(s, a, n)])])


def fit(transitions: Iterable[Transition], budget: Optional[MemoryBudget] = None) -> TabularModel:
    """Fit the MLE model; raises ``BudgetError`` if the data exceed ``model_units``."""
    transitions = list(transitions)
    if budget is not None and len(transitions) > budget.model_units:
        raise BudgetError(
            f"{len(transitions)} transitions exceed the model budget of {budget.model_units}")
    counts: dict = defaultdict(lambda: defaultdict(int))
    reward_sums: dict = defaultdict(float)
    terminal: dict = defaultdict(bool)
    for t in transitions:
        counts[(t.state, t.action)][t.next_state] += 1
        key = (t.state, t.action, t.next_state)
        reward_sums[key] += t.reward
        terminal[key] = terminal[key] or t.terminal
    return TabularModel(
        counts={k: dict(v) for k, v in counts.items()},
        reward_sums=dict(reward_sums),
        terminal_flags=dict(terminal),
        stored_transitions=len(transitions),
    )

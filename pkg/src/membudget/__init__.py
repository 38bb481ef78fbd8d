"""Memory-budgeted reinforcement-learning agents.

Two experiments share one accounting rule: an agent owns ``N`` units of
memory and must split them between competing internal processes.

* ``budgeted_mcts`` splits units between a tabular world model (stored
  transitions) and a search tree (nodes) on a small corridor gridworld.
* ``ptdqn`` splits hidden neurons between a permanent and a transient
  Q-network, with the remaining units spent on replay-buffer slots, in a
  never-ending item-collection world whose rewards swap periodically.
"""

from membudget.core import (
    ACTIONS,
    DOWN,
    LEFT,
    RIGHT,
    UP,
    EpisodeResult,
    Transition,
    derive_seed,
    discounted_return,
    make_rng,
    run_episode,
)
from membudget.memory_ledger import (
    BudgetError,
    MemoryBudget,
    PtSplit,
    allocate_pt_layers,
    make_pt_split,
    make_split,
    verify_budget,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "UP",
    "DOWN",
    "RIGHT",
    "LEFT",
    "Transition",
    "EpisodeResult",
    "make_rng",
    "derive_seed",
    "discounted_return",
    "run_episode",
    "BudgetError",
    "MemoryBudget",
    "PtSplit",
    "make_split",
    "allocate_pt_layers",
    "make_pt_split",
    "verify_budget",
]

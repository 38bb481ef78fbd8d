"""Shared MDP vocabulary, seeded randomness and episode execution.

Randomness
----------
Every stochastic component takes a ``numpy.random.Generator`` backed by
PCG64 (``make_rng``).  PCG64's output stream for a given integer seed is
fixed by numpy's documented stream-compatibility policy, so the same seed
reproduces the same draws on every platform.  Seeds for sub-tasks (one
dataset, one sweep cell, one world chunk) are derived with ``derive_seed``,
a SplitMix64 hash chain over 64-bit integers.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

UP, DOWN, RIGHT, LEFT = 0, 1, 2, 3
ACTIONS = (UP, DOWN, RIGHT, LEFT)
ACTION_NAMES = ("up", "down", "right", "left")
# (dx, dy) with y growing downwards, so row 0 is the top row.
ACTION_DELTAS = ((0, -1), (0, 1), (1, 0), (-1, 0))

_MASK64 = (1 << 64) - 1


class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


@dataclass(frozen=True, slots=True)
class Transition:
    """One experience tuple; the unit of world-model memory."""

    state: int
    action: int
    reward: float
    next_state: int
    terminal: bool = False

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise ContractViolation(f"non-finite reward {self.reward!r}")
        check_action(self.action)


@dataclass(frozen=True, slots=True)
class EpisodeResult:
    undiscounted_return: float
    steps: int
    reached_goal: Optional[str] = None


def check_action(action) -> int:
    if isinstance(action, bool) or int(action) != action or not 0 <= action < 4:
        raise ContractViolation(f"action {action!r} outside [0, 4)")
    return int(action)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(*parts) -> int:
    """Hash integers (or strings) into a 64-bit seed.

    Order matters: ``derive_seed(1, 2) != derive_seed(2, 1)``.  Strings are
    folded in through CRC-32 so labels such as dataset names are stable.
    Negative integers are taken modulo 2**64.
    """
    h = 0
    for part in parts:
        if isinstance(part, str):
            part = zlib.crc32(part.encode("utf-8"))
        h = _splitmix64(h ^ (int(part) & _MASK64))
    return h


def discounted_return(rewards: Iterable[float], gamma: float = 1.0) -> float:
    """Sum of ``gamma**t * r_t``; an empty sequence returns 0.0.

    Terms are added with ``math.fsum`` so that, e.g., 100 step penalties of
    0.01 come to exactly -1.0.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ContractViolation(f"gamma {gamma} outside [0, 1]")
    terms = []
    discount = 1.0
    for r in rewards:
        terms.append(discount * r)
        discount *= gamma
    return math.fsum(terms)


def mean_and_se(values: Sequence[float]) -> tuple[float, Optional[float]]:
    """Mean and standard error ``sigma / sqrt(n)``.

    ``sigma`` is the population standard deviation.  With a single value
    the standard error is undefined and returned as ``None``.
    """
    if len(values) == 0:
        raise ValueError("no values to aggregate")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    return mean, float(arr.std(ddof=0) / math.sqrt(arr.size))


class SteppableEnv(Protocol):
    def reset(self): ...

    def step(self, state, action: int): ...


ActionSource = Callable[[object, np.random.Generator], int]


def run_episode(env: SteppableEnv, policy: ActionSource, horizon: int,
                rng: np.random.Generator) -> EpisodeResult:
    """Roll ``policy`` in ``env`` from a fresh reset for at most ``horizon`` steps.

    ``env.step(state, action)`` must return ``(next_state, reward, ...)`` and
    states must expose ``done``; a ``goal`` attribute on the final state, if
    present, is reported as ``reached_goal``.  Rewards are summed undiscounted.
    """
    if horizon < 1:
        raise ContractViolation("horizon must be >= 1")
    state = env.reset()
    rewards = []
    while len(rewards) < horizon and not state.done:
        action = check_action(policy(state, rng))
        state, reward, *_ = env.step(state, action)
        rewards.append(reward)
    return EpisodeResult(
        undiscounted_return=discounted_return(rewards, 1.0),
        steps=len(rewards),
        reached_goal=getattr(state, "goal", None),
    )


def uniform_policy(state, rng: np.random.Generator) -> int:
    return int(rng.integers(4))

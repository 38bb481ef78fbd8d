"""Transition datasets for the corridor and once-through selection from them.

Dataset kinds
-------------
``O0`` .. ``O3``
    The shortest trajectory to pink, blue, green and orange respectively.
``Oa``
    All four shortest trajectories, orange first.
``Ra``
    ``Oa`` followed by ``noise`` transitions of a uniform-random agent.
``Ronly``
    ``noise`` random-agent transitions only.

Random-agent transitions come from back-to-back episodes of the uniform
policy, each cut at the environment horizon; goal arrivals are kept.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from membudget.core import Transition
from membudget.corridor_env import CorridorEnv

OPTIMAL_TARGETS = {"O0": "pink", "O1": "blue", "O2": "green", "O3": "orange"}
KINDS = ("O0", "O1", "O2", "O3", "Oa", "Ra", "Ronly")
CSV_HEADER = ("state", "action", "reward", "next_state", "terminal")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    noise: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.noise < 0:
            raise ValueError("noise count must be non-negative")

    @property
    def label(self) -> str:
        if self.kind in ("Ra", "Ronly"):
            return f"{self.kind}{self.noise}"
        return self.kind

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "DatasetSpec":
        """``"Ra500"`` -> ``DatasetSpec("Ra", 500)``; ``"O1"`` -> ``DatasetSpec("O1")``."""
        text = text.strip()
        for kind in ("Ronly", "Ra"):
            if text.startswith(kind):
                rest = text[len(kind):]
                return cls(kind, int(rest) if rest else 0, seed)
        return cls(text, 0, seed)


class TransitionStream:
    """A sequence of transitions that can be iterated exactly once."""

    def __init__(self, transitions: Iterable[Transition]):
        self._items = list(transitions)
        self._consumed = False
        self.touched = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Transition]:
        if self._consumed:
            raise RuntimeError("transition stream already consumed")
        self._consumed = True
        for item in self._items:
            self.touched += 1
            yield item


def optimal_trajectory(env: CorridorEnv, goal_label: str) -> list[Transition]:
    state = env.reset()
    out = []
    for action in env.shortest_path(state.agent_cell, goal_label):
        state, _, transition = env.step(state, action)
        out.append(transition)
    return out


def random_transitions(env: CorridorEnv, count: int, rng: np.random.Generator
                       ) -> list[Transition]:
    out: list[Transition] = []
    while len(out) < count:
        state = env.reset()
        actions = rng.integers(0, 4, size=env.layout.horizon)
        for a in actions:
            state, _, transition = env.step(state, int(a))
            out.append(transition)
            if state.done or len(out) == count:
                break
    return out


def generate_list(spec: DatasetSpec, env: CorridorEnv,
                  rng: Optional[np.random.Generator] = None) -> list[Transition]:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind in OPTIMAL_TARGETS:
        return optimal_trajectory(env, OPTIMAL_TARGETS[spec.kind])
    data: list[Transition] = []
    if spec.kind in ("Oa", "Ra"):
        for label in ("orange", "green", "blue", "pink"):
            data.extend(optimal_trajectory(env, label))
    if spec.kind in ("Ra", "Ronly"):
        data.extend(random_transitions(env, spec.noise, rng))
    return data


def generate(spec: DatasetSpec, env: CorridorEnv,
             rng: Optional[np.random.Generator] = None) -> TransitionStream:
    """Build the dataset described by ``spec`` as a single-pass stream.

    ``rng`` drives the random agent; it defaults to a PCG64 generator
    seeded with ``spec.seed``.
    """
    return TransitionStream(generate_list(spec, env, rng))


def reservoir_select(stream: Iterable, capacity: int, rng: np.random.Generator) -> list:
    """Uniform random subset of ``min(n, capacity)`` items in one pass.

    Li's Algorithm L: after filling the reservoir it jumps over a
    geometrically distributed number of items between replacements, so it
    needs O(k log(n/k)) random draws instead of one per item.  Skipped
    items are still pulled from the iterator, each exactly once.
    """
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    it = iter(stream)
    reservoir = list(itertools.islice(it, capacity))
    if capacity == 0 or len(reservoir) < capacity:
        for _ in it:
            pass
        return reservoir
    w = math.exp(math.log(1.0 - rng.random()) / capacity)
    while True:
        # 1 - w can underflow to 0 for huge capacities; then nothing more is kept.
        if w >= 1.0:
            for _ in it:
                pass
            return reservoir
        skip = math.floor(math.log(1.0 - rng.random()) / math.log1p(-w))
        item = next(itertools.islice(it, skip, None), _END)
        if item is _END:
            return reservoir
        reservoir[int(rng.integers(capacity))] = item
        w *= math.exp(math.log(1.0 - rng.random()) / capacity)


_END = object()


def write_csv(transitions: Iterable[Transition], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for t in transitions:
            writer.writerow([t.state, t.action, repr(t.reward), t.next_state, int(t.terminal)])


def read_csv(path) -> list[Transition]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        return [Transition(int(row["state"]), int(row["action"]), float(row["reward"]),
                           int(row["next_state"]), row["terminal"].strip() in ("1", "true", "True"))
                for row in reader]

"""Deterministic corridor gridworld with four goals of increasing value.

Default layout (16 x 2, y grows downwards, start in the top-left corner)::

    S . . . . . . . . . . . . . . .
    . . O . . . G . . . B . . . P .

Goals orange/green/blue/pink pay 0.2/0.4/0.6/0.8 on arrival and lie 3, 7,
11 and 15 steps from the start.  Every step costs 0.01 and an episode ends
on a goal or after 100 steps, so returns lie in [-1, 0.65].

States are encoded row-major: ``state_id = x + y * width``.
"""

from __future__ import annotations

import configparser
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from membudget.core import ACTION_DELTAS, ACTIONS, ContractViolation, Transition, check_action

Cell = tuple[int, int]

GOAL_ORDER = ("orange", "green", "blue", "pink")


def _default_goals() -> dict[str, tuple[Cell, float]]:
    return {
        "orange": ((2, 1), 0.2),
        "green": ((6, 1), 0.4),
        "blue": ((10, 1), 0.6),
        "pink": ((14, 1), 0.8),
    }


@dataclass(frozen=True)
class CorridorLayout:
    width: int = 16
    height: int = 2
    start: Cell = (0, 0)
    goals: dict[str, tuple[Cell, float]] = field(default_factory=_default_goals)
    step_penalty: float = 0.01
    horizon: int = 100

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.horizon < 1:
            raise ValueError("grid size and horizon must be positive")
        for label, (cell, _) in self.goals.items():
            if not self.in_bounds(cell):
                raise ValueError(f"goal {label} at {cell} is off the grid")
        if not self.in_bounds(self.start):
            raise ValueError(f"start {self.start} is off the grid")

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def state_id(self, cell: Cell) -> int:
        return cell[0] + cell[1] * self.width

    def cell_of(self, state_id: int) -> Cell:
        return state_id % self.width, state_id // self.width

    def goal_at(self, cell: Cell) -> Optional[str]:
        for label, (goal_cell, _) in self.goals.items():
            if goal_cell == cell:
                return label
        return None


def load_layout(path) -> CorridorLayout:
    """Read a ``[corridor]`` section from an INI-style config file.

    Recognised keys: ``width``, ``height``, ``start`` (``x,y``),
    ``step_penalty``, ``horizon`` and ``goal.<label>`` = ``x,y,reward``.
    When any ``goal.*`` key is present it replaces the default goal set.
    """
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    return layout_from_section(parser["corridor"] if parser.has_section("corridor") else {})


def layout_from_section(section) -> CorridorLayout:
    kwargs = {}
    for key in ("width", "height", "horizon"):
        if key in section:
            kwargs[key] = int(section[key])
    if "step_penalty" in section:
        kwargs["step_penalty"] = float(section["step_penalty"])
    if "start" in section:
        x, y = (int(v) for v in section["start"].split(","))
        kwargs["start"] = (x, y)
    goals = {}
    for key in section:
        if key.startswith("goal."):
            x, y, reward = section[key].split(",")
            goals[key[len("goal."):]] = ((int(x), int(y)), float(reward))
    if goals:
        kwargs["goals"] = goals
    return CorridorLayout(**kwargs)


@dataclass(frozen=True)
class CorridorState:
    agent_cell: Cell
    steps_elapsed: int = 0
    done: bool = False
    goal: Optional[str] = None


class CorridorEnv:
    """Pure-function dynamics: ``step`` never mutates its input state."""

    def __init__(self, layout: Optional[CorridorLayout] = None):
        self.layout = layout or CorridorLayout()
        self._goal_cells = {cell: (label, r) for label, (cell, r) in self.layout.goals.items()}

    @property
    def n_states(self) -> int:
        return self.layout.n_states

    def reset(self) -> CorridorState:
        return CorridorState(agent_cell=self.layout.start)

    def state_id(self, state: CorridorState) -> int:
        return self.layout.state_id(state.agent_cell)

    def move(self, cell: Cell, action: int) -> Cell:
        dx, dy = ACTION_DELTAS[action]
        nxt = (cell[0] + dx, cell[1] + dy)
        return nxt if self.layout.in_bounds(nxt) else cell

    def step(self, state: CorridorState, action: int
             ) -> tuple[CorridorState, float, Transition]:
        if state.done:
            raise ContractViolation("step called on a finished episode")
        action = check_action(action)
        cell = self.move(state.agent_cell, action)
        reward = -self.layout.step_penalty
        goal = None
        if cell in self._goal_cells:
            goal, bonus = self._goal_cells[cell]
            reward += bonus
        steps = state.steps_elapsed + 1
        done = goal is not None or steps >= self.layout.horizon
        # Only goal arrival is a true terminal; horizon cut-offs are truncations.
        transition = Transition(self.layout.state_id(state.agent_cell), action, reward,
                                self.layout.state_id(cell), goal is not None)
        return CorridorState(cell, steps, done, goal), reward, transition

    def state_at(self, cell: Cell) -> CorridorState:
        return replace(self.reset(), agent_cell=cell)

    def _distances_to(self, target: Cell) -> dict[Cell, int]:
        # Reverse BFS from the target; other goal cells are terminal and
        # cannot be passed through.
        dist = {target: 0}
        queue = deque([target])
        while queue:
            cell = queue.popleft()
            for a in ACTIONS:
                prev = (cell[0] - ACTION_DELTAS[a][0], cell[1] - ACTION_DELTAS[a][1])
                if prev in dist or not self.layout.in_bounds(prev):
                    continue
                if prev in self._goal_cells:
                    continue
                dist[prev] = dist[cell] + 1
                queue.append(prev)
        return dist

    def shortest_path(self, start: Cell, goal_label: str) -> list[int]:
        """Shortest action sequence from ``start`` to a goal.

        Among equally short paths the lexicographically smallest action
        sequence under up < down < right < left is returned.
        """
        if goal_label not in self.layout.goals:
            raise KeyError(goal_label)
        target = self.layout.goals[goal_label][0]
        dist = self._distances_to(target)
        if start not in dist:
            raise ValueError(f"goal {goal_label} unreachable from {start}")
        path = []
        cell = start
        while cell != target:
            for a in ACTIONS:
                nxt = self.move(cell, a)
                if dist.get(nxt) == dist[cell] - 1:
                    path.append(a)
                    cell = nxt
                    break
        return path

    def render(self, state: Optional[CorridorState] = None) -> str:
        marks = {cell: label[0].upper() for cell, (label, _) in self._goal_cells.items()}
        rows = []
        for y in range(self.layout.height):
            row = []
            for x in range(self.layout.width):
                if state is not None and state.agent_cell == (x, y):
                    row.append("A")
                else:
                    row.append(marks.get((x, y), "."))
            rows.append(" ".join(row))
        return "\n".join(rows)

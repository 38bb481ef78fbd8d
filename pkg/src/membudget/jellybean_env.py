"""Never-ending item-collection gridworld with swapping rewards.

The plane is cut into ``chunk_size`` x ``chunk_size`` chunks generated on
first sight from a seed derived from (world seed, chunk x, chunk y), so a
chunk's initial contents never depend on the order in which the agent
explores.  Each chunk holds

* green items, independently per cell with probability ``green_density``;
* clusters: each cell becomes a cluster centre with probability
  ``cluster_center_density``; a centre scatters ``cluster_item_count``
  items of one colour uniformly over the square of radius
  ``cluster_radius`` around it.  Items that would land outside the chunk
  are dropped.  Red and blue centres alternate in generation order, with
  the first colour chosen by the chunk seed.

Collected items are gone for good.  Green pays 0.1; red and blue start at
-1 and +2 and exchange values every ``swap_period`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from membudget.core import ACTION_DELTAS, check_action, derive_seed, make_rng

RED, GREEN, BLUE = 0, 1, 2
EMPTY = -1
VIEW = 11
_HALF = VIEW // 2


@dataclass(frozen=True)
class WorldConfig:
    green_density: float = 0.02
    cluster_center_density: float = 0.001
    cluster_radius: int = 3
    cluster_item_count: int = 12
    chunk_size: int = 32
    swap_period: int = 150_000
    green_reward: float = 0.1
    red_reward: float = -1.0
    blue_reward: float = 2.0

    def __post_init__(self):
        for name in ("green_density", "cluster_center_density"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.swap_period < 1:
            raise ValueError("swap_period must be >= 1")
        if self.chunk_size < 1 or self.cluster_radius < 0 or self.cluster_item_count < 0:
            raise ValueError("chunk_size, cluster_radius, cluster_item_count out of range")


def phase(t: int, swap_period: int = 150_000, red: float = -1.0, blue: float = 2.0
          ) -> tuple[float, float]:
    """(red reward, blue reward) at step ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if (t // swap_period) % 2 == 0:
        return red, blue
    return blue, red


def generate_chunk(seed: int, cx: int, cy: int, config: WorldConfig) -> np.ndarray:
    """Item colours of one chunk, indexed ``[y, x]`` in local coordinates."""
    cs = config.chunk_size
    rng = make_rng(derive_seed(seed, cx, cy))
    grid = np.full((cs, cs), EMPTY, dtype=np.int8)
    grid[rng.random((cs, cs)) < config.green_density] = GREEN
    centres = np.argwhere(rng.random((cs, cs)) < config.cluster_center_density)
    colour = RED if rng.random() < 0.5 else BLUE
    r = config.cluster_radius
    for cy_, cx_ in centres:
        offsets = rng.integers(-r, r + 1, size=(config.cluster_item_count, 2))
        for dy, dx in offsets:
            y, x = cy_ + dy, cx_ + dx
            if 0 <= y < cs and 0 <= x < cs:
                grid[y, x] = colour
        colour = BLUE if colour == RED else RED
    return grid


class JellyBeanWorld:
    """Mutable world state for one agent.

    ``position`` is unbounded; the window observation is an 11 x 11 x 3
    one-hot array over (red, green, blue) with the agent at the centre,
    ``obs[5 + dy, 5 + dx, colour]``.
    """

    def __init__(self, config: WorldConfig | None = None, seed: int = 0):
        self.config = config or WorldConfig()
        self.seed = seed
        self.position = (0, 0)
        self.t = 0
        self.consumed: set[tuple[int, int]] = set()
        self._chunks: dict[tuple[int, int], np.ndarray] = {}

    def reset(self) -> np.ndarray:
        self.position = (0, 0)
        self.t = 0
        self.consumed.clear()
        self._chunks.clear()
        return self.observe()

    def chunk(self, cx: int, cy: int) -> np.ndarray:
        grid = self._chunks.get((cx, cy))
        if grid is None:
            grid = generate_chunk(self.seed, cx, cy, self.config)
            cs = self.config.chunk_size
            for (x, y) in self.consumed:
                if x // cs == cx and y // cs == cy:
                    grid[y % cs, x % cs] = EMPTY
            self._chunks[(cx, cy)] = grid
        return grid

    def item_at(self, x: int, y: int) -> int:
        cs = self.config.chunk_size
        return int(self.chunk(x // cs, y // cs)[y % cs, x % cs])

    def place(self, x: int, y: int, colour: int) -> None:
        """Overwrite one cell; meant for building test fixtures."""
        cs = self.config.chunk_size
        self.chunk(x // cs, y // cs)[y % cs, x % cs] = colour

    def clear_items(self, radius: int = 64) -> None:
        """Empty every chunk within ``radius`` cells of the agent (test helper)."""
        cs = self.config.chunk_size
        px, py = self.position
        for cx in range((px - radius) // cs, (px + radius) // cs + 1):
            for cy in range((py - radius) // cs, (py + radius) // cs + 1):
                self.chunk(cx, cy)[:] = EMPTY

    def observe(self) -> np.ndarray:
        cs = self.config.chunk_size
        px, py = self.position
        x0, y0 = px - _HALF, py - _HALF
        window = np.empty((VIEW, VIEW), dtype=np.int8)
        # Copy the window chunk by chunk; it spans at most 2x2 chunks when cs >= 11.
        y = y0
        while y < y0 + VIEW:
            cy, ly = divmod(y, cs)
            h = min(cs - ly, y0 + VIEW - y)
            x = x0
            while x < x0 + VIEW:
                cx, lx = divmod(x, cs)
                w = min(cs - lx, x0 + VIEW - x)
                window[y - y0:y - y0 + h, x - x0:x - x0 + w] = \
                    self.chunk(cx, cy)[ly:ly + h, lx:lx + w]
                x += w
            y += h
        obs = np.zeros((VIEW, VIEW, 3), dtype=np.float64)
        for colour in (RED, GREEN, BLUE):
            obs[:, :, colour] = window == colour
        return obs

    def current_rewards(self) -> tuple[float, float, float]:
        red, blue = phase(self.t, self.config.swap_period,
                          self.config.red_reward, self.config.blue_reward)
        return red, self.config.green_reward, blue

    def step(self, action: int) -> tuple[np.ndarray, float]:
        action = check_action(action)
        dx, dy = ACTION_DELTAS[action]
        x, y = self.position[0] + dx, self.position[1] + dy
        self.position = (x, y)
        reward = 0.0
        colour = self.item_at(x, y)
        if colour != EMPTY:
            reward = self.current_rewards()[colour]
            cs = self.config.chunk_size
            self.chunk(x // cs, y // cs)[y % cs, x % cs] = EMPTY
            self.consumed.add((x, y))
        self.t += 1
        return self.observe(), reward

    def render_ascii(self) -> str:
        obs = self.observe()
        rows = []
        for i in range(VIEW):
            row = []
            for j in range(VIEW):
                if i == _HALF and j == _HALF:
                    row.append("@")
                elif obs[i, j, RED]:
                    row.append("r")
                elif obs[i, j, GREEN]:
                    row.append("g")
                elif obs[i, j, BLUE]:
                    row.append("b")
                else:
                    row.append(".")
            rows.append(" ".join(row))
        return "\n".join(rows)

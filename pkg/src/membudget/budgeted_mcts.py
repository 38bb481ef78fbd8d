"""Monte Carlo tree search with a hard cap on the number of tree nodes.

The planner searches the learned ``TabularModel`` from the start state and
returns a fixed, open-loop action sequence.  Every materialised node costs
one plan unit; rollouts are free.  Once the node budget is spent, further
iterations still select, simulate and back up, but no longer expand.

The whole experiment for one memory split is ``run_cell``: select
``N - n_pi`` transitions from the dataset stream, fit the model, build the
tree with ``n_pi`` nodes, extract the plan and execute it in the real
corridor, falling back to uniform-random actions when the plan runs out.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from membudget.core import (
    EpisodeResult,
    derive_seed,
    make_rng,
    mean_and_se,
    run_episode,
)
from membudget.corridor_env import CorridorEnv, CorridorLayout
from membudget.datasets import DatasetSpec, TransitionStream, generate_list, reservoir_select
from membudget.memory_ledger import BudgetError, MemoryBudget, make_split
from membudget.world_model import TabularModel, fit

DEFAULT_UCT_C = math.sqrt(2.0)
DEFAULT_ITERATION_FACTOR = 4


class _Uniforms:
    """Block-buffered uniform draws; a cheap stand-in for scalar ``rng.random()``."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf = rng.random(block).tolist()
        self._i = 0

    def random(self) -> float:
        if self._i == self._block:
            self._buf = self._rng.random(self._block).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


class SearchNode:
    __slots__ = ("state", "visit_count", "value_sum", "action_visits", "action_values",
                 "outcomes", "children")

    def __init__(self, state: int):
        self.state = state
        self.visit_count = 0
        self.value_sum = 0.0
        self.action_visits = [0, 0, 0, 0]
        self.action_values = [0.0, 0.0, 0.0, 0.0]
        # action -> {next_state: [times sampled, terminal]}
        self.outcomes: dict[int, dict[int, list]] = {}
        self.children: dict[tuple[int, int], SearchNode] = {}


@dataclass
class SearchTree:
    root: Optional[SearchNode]
    node_budget: int
    nodes_used: int = 0
    iterations: int = 0

    def nodes(self):
        if self.root is None:
            return
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())


@dataclass(frozen=True)
class Plan:
    actions: tuple[int, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.actions)


def _select(node: SearchNode, known: tuple[int, ...], c: float) -> int:
    for a in known:
        if node.action_visits[a] == 0:
            return a
    log_n = math.log(node.visit_count)
    best_a, best = known[0], -math.inf
    for a in known:
        n = node.action_visits[a]
        score = node.action_values[a] / n + c * math.sqrt(log_n / n)
        if score > best:
            best_a, best = a, score
    return best_a


def _rollout(model: TabularModel, s: int, remaining: int, u: _Uniforms) -> float:
    total = 0.0
    for _ in range(remaining):
        step = model.sample_next(s, int(u.random() * 4), u)
        if step is None:
            break
        total += step.reward
        if step.terminal:
            break
        s = step.next_state
    return total


def build_tree(model: TabularModel, s0: int, budget: MemoryBudget | int, horizon: int = 100,
               uct_c: float = DEFAULT_UCT_C, iteration_factor: int = DEFAULT_ITERATION_FACTOR,
               rng: Optional[np.random.Generator] = None) -> SearchTree:
    """Run ``iteration_factor * max(1, n_pi)`` UCT iterations from ``s0``.

    ``budget`` is a ``MemoryBudget`` (its ``plan_units`` are used) or a
    plain node count.  Returns are undiscounted.  A zero budget gives an
    empty tree; a start state absent from the model gives a lone root.
    """
    n_pi = budget.plan_units if isinstance(budget, MemoryBudget) else int(budget)
    if n_pi < 0:
        raise BudgetError("negative plan budget")
    tree = SearchTree(root=None, node_budget=n_pi)
    if n_pi == 0:
        return tree
    if rng is None:
        rng = make_rng(0)
    u = _Uniforms(rng)
    tree.root = SearchNode(s0)
    tree.nodes_used = 1
    known_cache: dict[int, tuple[int, ...]] = {}

    def known(s):
        k = known_cache.get(s)
        if k is None:
            k = known_cache[s] = tuple(sorted(model.known_actions(s)))
        return k

    if not known(s0):
        return tree

    for _ in range(iteration_factor * max(1, n_pi)):
        node = tree.root
        path = []
        leaf_value = 0.0
        depth = 0
        while depth < horizon:
            actions = known(node.state)
            if not actions:
                break
            a = _select(node, actions, uct_c)
            step = model.sample_next(node.state, a, u)
            path.append((node, a, step.reward))
            depth += 1
            outcome = node.outcomes.setdefault(a, {}).setdefault(
                step.next_state, [0, step.terminal])
            outcome[0] += 1
            if step.terminal:
                break
            child = node.children.get((a, step.next_state))
            if child is None:
                if tree.nodes_used < n_pi:
                    child = SearchNode(step.next_state)
                    node.children[(a, step.next_state)] = child
                    tree.nodes_used += 1
                leaf_value = _rollout(model, step.next_state, horizon - depth, u)
                break
            node = child
        value = leaf_value
        for node, a, reward in reversed(path):
            value += reward
            node.visit_count += 1
            node.value_sum += value
            node.action_visits[a] += 1
            node.action_values[a] += value
        tree.iterations += 1
    return tree


def extract_plan(tree: SearchTree, horizon: int = 100) -> Plan:
    """Greedy descent along the most-visited action (ties: lowest index)."""
    actions: list[int] = []
    node = tree.root
    while node is not None and len(actions) < horizon:
        visits = node.action_visits
        if max(visits) == 0:
            break
        a = visits.index(max(visits))
        actions.append(a)
        outcomes = node.outcomes[a]
        nxt = max(sorted(outcomes), key=lambda s: outcomes[s][0])
        if outcomes[nxt][1]:
            break
        node = node.children.get((a, nxt))
    return Plan(tuple(actions))


def execute_plan(env: CorridorEnv, plan: Plan, rng: np.random.Generator) -> EpisodeResult:
    """Play the plan open-loop, then act uniformly at random until the episode ends."""
    actions = plan.actions
    t = 0

    def policy(state, rng):
        nonlocal t
        t += 1
        if t <= len(actions):
            return actions[t - 1]
        return int(rng.integers(4))

    return run_episode(env, policy, env.layout.horizon, rng)


@dataclass(frozen=True)
class SweepRow:
    dataset: str
    n_pi: int
    seed: int
    ret: float
    steps: int
    goal: Optional[str]


def run_cell(spec: DatasetSpec, total: int, n_pi: int, data_seed: int, plan_seed: int,
             layout: Optional[CorridorLayout] = None, uct_c: float = DEFAULT_UCT_C,
             iteration_factor: int = DEFAULT_ITERATION_FACTOR) -> EpisodeResult:
    env = CorridorEnv(layout)
    budget = make_split(total, n_pi)
    stream = TransitionStream(generate_list(spec, env, make_rng(data_seed)))
    rng = make_rng(plan_seed)
    kept = reservoir_select(stream, budget.model_units, rng)
    model = fit(kept, budget)
    s0 = env.state_id(env.reset())
    tree = build_tree(model, s0, budget, env.layout.horizon, uct_c, iteration_factor, rng)
    plan = extract_plan(tree, env.layout.horizon)
    return execute_plan(env, plan, rng)


def _run_job(job):
    spec, total, n_pi, seed_index, data_seed, plan_seed, layout, uct_c, factor = job
    res = run_cell(spec, total, n_pi, data_seed, plan_seed, layout, uct_c, factor)
    return SweepRow(spec.label, n_pi, seed_index, res.undiscounted_return, res.steps,
                    res.reached_goal)


def sweep_rows(spec: DatasetSpec, total: int, plan_grid: Sequence[int], seeds: int,
               master_seed: int = 0, layout: Optional[CorridorLayout] = None,
               uct_c: float = DEFAULT_UCT_C, iteration_factor: int = DEFAULT_ITERATION_FACTOR,
               jobs: int = 1) -> list[SweepRow]:
    """Raw per-seed results for every ``n_pi`` in ``plan_grid``.

    The dataset for seed ``i`` depends only on (master seed, dataset, i), so
    every grid cell sees the same data; the selection and search seed also
    mixes in ``n_pi``.  Output order is (grid order, seed) whatever ``jobs`` is.
    """
    for n_pi in plan_grid:
        if not 0 <= n_pi <= total:
            raise BudgetError(f"grid value {n_pi} outside [0, {total}]")
    jobs_list = []
    for n_pi in plan_grid:
        for i in range(seeds):
            data_seed = derive_seed(master_seed, spec.label, "data", i)
            plan_seed = derive_seed(master_seed, spec.label, n_pi, i)
            jobs_list.append((spec, total, n_pi, i, data_seed, plan_seed, layout,
                              uct_c, iteration_factor))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_job, jobs_list, chunksize=4))
    return [_run_job(job) for job in jobs_list]


def sweep_allocation(spec: DatasetSpec, total: int, plan_grid: Sequence[int], seeds: int,
                     **kwargs) -> list[tuple[int, float, Optional[float]]]:
    """``(n_pi, mean return, standard error)`` per grid value."""
    rows = sweep_rows(spec, total, plan_grid, seeds, **kwargs)
    table = []
    for n_pi in plan_grid:
        mean, se = mean_and_se([r.ret for r in rows if r.n_pi == n_pi])
        table.append((n_pi, mean, se))
    return table

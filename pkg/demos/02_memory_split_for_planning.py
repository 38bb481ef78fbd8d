# %% [markdown]
# # Splitting 500 units between a world model and a search tree
#
# The agent has room for 500 items.  Transitions it keeps for its tabular
# model and nodes in its Monte Carlo search tree draw from the same pool,
# so every node spent on planning is a transition it cannot remember.

# %%
import numpy as np

from membudget.budgeted_mcts import build_tree, extract_plan, sweep_allocation
from membudget.core import make_rng
from membudget.corridor_env import CorridorEnv
from membudget.datasets import DatasetSpec, TransitionStream, generate_list, reservoir_select
from membudget.memory_ledger import make_split
from membudget.world_model import fit

env = CorridorEnv()
data = generate_list(DatasetSpec("Oa"), env)
print(len(data), "transitions: one optimal trajectory to every goal")

# %% [markdown]
# One split, step by step: keep a uniform sample of the stream, fit the
# model, search, read off the plan.

# %%
budget = make_split(500, 100)
rng = make_rng(3)
kept = reservoir_select(TransitionStream(data), budget.model_units, rng)
model = fit(kept, budget)
tree = build_tree(model, 0, budget, rng=rng)
plan = extract_plan(tree)
print(f"model keeps {model.stored_transitions}, tree uses {tree.nodes_used}/{budget.plan_units}")
print("plan:", "".join("UDRL"[a] for a in plan.actions))

# %% [markdown]
# Sweeping the split.  A tiny tree cannot see past the nearest goal; a
# tiny model has forgotten the way.  The middle does best.

# %%
grid = [0, 10, 50, 100, 250, 450, 480, 500]
for n_pi, mean, se in sweep_allocation(DatasetSpec("Oa"), 500, grid, seeds=10):
    bar = "#" * int(max(mean, 0) * 40)
    print(f"N_pi={n_pi:3d}  {mean:+.3f} ± {se:.3f}  {bar}")

# %% [markdown]
# Data quality matters as much as the split.  O0 is the optimal trajectory,
# O3 the one to the nearest goal; Ra mixes in random transitions.

# %%
for name in ("O0", "O1", "O2", "O3", "Ra500", "Ronly36"):
    (_, mean, se), = sweep_allocation(DatasetSpec.parse(name), 500, [250], seeds=10)
    print(f"{name:>8}: {mean:+.3f} ± {se:.3f}")

# %% [markdown]
# # The corridor and its four goals
#
# A 16 x 2 grid.  The agent starts top-left; four goals sit along the bottom
# row, each further away and worth more.  Every step costs 0.01 and an
# episode lasts at most 100 steps.

# %%
from membudget.core import make_rng, run_episode
from membudget.corridor_env import GOAL_ORDER, CorridorEnv

env = CorridorEnv()
print(env.render(env.reset()))

# %% [markdown]
# Walking the shortest path to each goal gives the best return that goal
# can offer.  The pink goal, the furthest, is the optimum.

# %%
for goal in GOAL_ORDER:
    path = env.shortest_path((0, 0), goal)
    actions = iter(path)
    result = run_episode(env, lambda s, rng: next(actions), 100, make_rng(0))
    print(f"{goal:>6}: {len(path):2d} steps, return {result.undiscounted_return:.2f}")

# %% [markdown]
# An agent that never reaches a goal pays the step cost for the whole
# horizon.  Pushing against the top wall is one way to do that.

# %%
stuck = run_episode(env, lambda s, rng: 0, 100, make_rng(0))
print("never reaching a goal:", stuck.undiscounted_return)

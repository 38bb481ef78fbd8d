# %% [markdown]
# # A permanent and a transient value network under one budget
#
# The agent's Q-value is the sum of a slow permanent network and a fast
# transient one.  Hidden neurons of both networks and replay-buffer slots
# all come out of the same 500 units.

# %%
from membudget.jellybean_env import JellyBeanWorld, WorldConfig
from membudget.memory_ledger import make_pt_split
from membudget.ptdqn import AgentConfig, run_continual

for frac in (0.0, 0.1, 0.5):
    split = make_pt_split(permanent_fraction=frac)
    print(f"{frac:.0%} permanent: {split}")

# %% [markdown]
# A short run in a dense world with quick swaps (every 2000 steps).  The
# smoothed trace, printed every 1000 steps, sags after swaps.  One seed is
# noisy; the harness averages many.

# %%
world_cfg = WorldConfig(green_density=0.1, cluster_center_density=0.005, swap_period=2000)
agent_cfg = AgentConfig(consolidation_period=200, smoothing_window=500)
steps = 8000

for frac in (0.1, 0.5):
    res = run_continual(JellyBeanWorld(world_cfg, seed=1), make_pt_split(permanent_fraction=frac),
                        agent_cfg, steps, seed=2)
    marks = res.smoothed[::1000]
    print(f"{frac:.0%}:", " ".join(f"{v:.3f}" for v in marks))

rand = run_continual(JellyBeanWorld(world_cfg, seed=1), make_pt_split(), agent_cfg, steps,
                     seed=2, learn=False)
print("random:", f"{rand.smoothed[-1]:.3f}")

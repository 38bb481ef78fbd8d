# %% [markdown]
# # An endless world whose rewards change
#
# Items are laid out chunk by chunk as the agent wanders.  Green beans are
# scattered everywhere; red and blue come in clusters.  Red and blue trade
# values on a fixed schedule, so a good habit becomes a bad one.

# %%
from membudget.core import make_rng
from membudget.jellybean_env import JellyBeanWorld, WorldConfig, phase

world = JellyBeanWorld(WorldConfig(green_density=0.1, cluster_center_density=0.005), seed=7)
world.reset()
start_view = world.render_ascii()
print(start_view)

# %% [markdown]
# The reward schedule: (red, blue) values before and after each swap.

# %%
for t in (0, 149_999, 150_000, 300_000):
    print(t, phase(t))

# %% [markdown]
# A random walk, and what it picks up.

# %%
rng = make_rng(0)
total = 0.0
for _ in range(2000):
    _, r = world.step(int(rng.integers(4)))
    total += r
print(f"2000 random steps: reward {total:.1f}, items eaten {len(world.consumed)}")

# %% [markdown]
# The same seed always lays out the same world, whatever path reveals it.

# %%
again = JellyBeanWorld(world.config, seed=7)
again.reset()
print("identical start view:", again.render_ascii() == start_view)

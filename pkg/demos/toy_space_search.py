# %% [markdown]
# # Partition search on a small ConvNet space
#
# convnet_toy holds every network of 1 to 5 layers where each layer picks a
# kernel (3 or 5) and a width (32 or 64): 1364 networks in total.  The
# synthetic metric rewards depth most, then width, then small kernels, so
# the single best network is five 3x3 layers of width 64.

# %%
import numpy as np

from latent_mcts import SearchConfig, convnet_objective, lanas_search, make_builtin_space, random_search

space = make_builtin_space("convnet_toy")
objective = convnet_objective(space)
print(space.name, "holds", space.size(), "networks")

# %% [markdown]
# Run the tree search until it finds the optimum.  The budget counts unique
# networks, so re-proposing a known network never burns budget.

# %%
cfg = SearchConfig(height=4, selects_per_relearn=20, init_samples=100, c=0.1,
                   budget=space.size(), seed=0, target=1.0)
trace = lanas_search(cfg, objective)
print("tree search reached 1.0 after", trace.samples_to_reach(1.0), "networks")

# %%
rs = random_search(space, objective, space.size(), seed=0, target=1.0)
print("random search reached 1.0 after", rs.samples_to_reach(1.0), "networks")

# %% [markdown]
# One seed is noisy.  Twenty seeds each give a fairer picture.

# %%
lanas_n = [lanas_search(SearchConfig(**{**cfg.to_dict(), "seed": s}), objective).samples_to_reach(1.0)
           for s in range(20)]
rand_n = [random_search(space, objective, space.size(), s, target=1.0).samples_to_reach(1.0)
          for s in range(20)]
print("median networks to optimum: tree", np.median(lanas_n), "random", np.median(rand_n))

# %% [markdown]
# # Does the shape of the action tree matter?
#
# Plain MCTS needs a hand-made action tree.  Two designs cover the same 1364
# networks:
#
# * sequential: kernel, width, then add another layer or stop
# * global: pick the depth first, then every kernel, then every width
#
# Which one finds the best network sooner under the synthetic metric?

# %%
import numpy as np

from latent_mcts import convnet_objective, make_action_adapter, make_builtin_space, vanilla_mcts
from latent_mcts.baselines import count_adapter_leaves

space = make_builtin_space("convnet_toy")
objective = convnet_objective(space)

for kind in ("sequential", "global"):
    adapter = make_action_adapter(space, kind)
    print(kind, "tree has", count_adapter_leaves(adapter), "leaves")

# %%
for kind in ("sequential", "global"):
    adapter = make_action_adapter(space, kind)
    n = [vanilla_mcts(space, objective, adapter, space.size(), s, target=1.0).samples_to_reach(1.0)
         for s in range(20)]
    print(f"{kind:>10}: median {np.median(n):.0f} networks to the optimum")

# %% [markdown]
# Here the sequential tree wins.  The metric adds up per-layer quality, and
# a per-layer decision tree is exactly what credits each layer on its own.

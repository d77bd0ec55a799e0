# %% [markdown]
# # How the sampled distribution approaches the full one
#
# A reference tree fit on all 1364 networks gives a metric histogram per
# leaf.  Routing a search's samples through that same tree shows how close
# each leaf's sampled histogram is to the full one as the search proceeds.

# %%
from latent_mcts import SearchConfig, build_reference_tree, convnet_objective, kl_dynamics, \
    lanas_search, make_builtin_space
from latent_mcts.dataset import enumerate_objective

space = make_builtin_space("convnet_toy")
objective = convnet_objective(space)
X, y = enumerate_objective(space, objective)
reference = build_reference_tree(X, y, height=4)
print("reference leaf means:", reference.leaf_means().round(3))

# %%
cfg = SearchConfig(height=4, budget=600, seed=0)
trace = lanas_search(cfg, objective)
for point in kl_dynamics(trace, reference, [200, 300, 400, 500, 600]):
    print(f"n={point.n:4d}  mean KL {point.mean_kl:.4f}  mean gap {point.mean_gap:+.4f}")

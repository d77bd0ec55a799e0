# %% [markdown]
# # Multi-seed runs and an ablation from code
#
# run_experiment writes one JSON-lines trace per seed plus a manifest.  The
# same JSON config also works with `latent-mcts run --config cfg.json`.

# %%
import tempfile
from pathlib import Path

from latent_mcts import ExperimentConfig, ablation_sweep, regret_curve, run_experiment
from latent_mcts.harness import load_experiment

root = Path(tempfile.mkdtemp())
cfg = ExperimentConfig(task="convnet_toy", algorithm="lanas", budget=400, seeds=[0, 1, 2, 3],
                       params={"height": 4, "init_samples": 100, "selects_per_relearn": 20},
                       output_dir=str(root / "lanas"))
out = run_experiment(cfg)
print(sorted(p.name for p in out.iterdir()))

manifest, traces = load_experiment(out)
regret = regret_curve(traces, manifest["v_star"])
for n in (1, 100, 200, 400):
    print(f"after {n:3d} networks: mean regret {regret.mean[n - 1]:.3f}")

# %% [markdown]
# Ablate the tree height.  Every value reuses the same seeds.

# %%
for row in ablation_sweep(cfg, "height", [2, 4, 6], root / "ablation"):
    print(row["value"], "median to optimum", row["sto_median"], "best median", row["best_median"])

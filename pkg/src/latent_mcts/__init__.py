"""Search over learned partitions of a design space.

A complete binary tree of linear regressors splits the space into regions
ranked by predicted metric; a UCB walk picks a region and new samples are
drawn inside its half-space constraints.
"""
from .analysis import (build_reference_tree, cdf_at_budget, kl_divergence, kl_dynamics,
                       partition_export, regret_curve)
from .baselines import (ActionSpaceAdapter, make_action_adapter, random_search,
                        regularized_evolution, vanilla_mcts)
from .dataset import (EvalLedger, FunctionObjective, Measurement, TabularBenchmark,
                      convnet_objective, eggholder, eggholder_objective, evaluate, load_tabular,
                      synthetic_convnet_metric)
from .harness import ExperimentConfig, ablation_sweep, make_task, run_experiment
from .latree import (Constraint, LaTree, fit_node_regressor, leftmost_bound_diagnostic,
                     leftmost_leaf_bound, node_threshold, satisfies)
from .search import (SearchConfig, get_ucb, lanas_search, sample_bayes_in_partition,
                     sample_random_in_partition, ucb_select)
from .space import Dimension, SearchSpace, make_builtin_space, mutate, sample_uniform, space_size
from .trace import SearchTrace, validate_trace_lines

__version__ = "0.1.0"

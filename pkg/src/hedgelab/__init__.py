"""Parameter-free expert-advice learners with runtime regret certificates.

Core pieces: a potential/weight pair driving all prediction rules, a fixed-N
learner with anytime regret bounds, a confidence-rated sleeping registry, an
interval-adaptive learner built from birth-scheduled copies, a tree-pruning
forecaster over edge experts, and an experiment harness with exact oracles.
"""

from .fixed import FixedLearner, relative_entropy
from .interval import TvLearner, adaptive_regret, check_all_interval_bounds, interval_bound
from .lab import (
    HedgeLearner,
    LossTrace,
    RunRecord,
    decomposition_bruteforce,
    decomposition_value,
    first_order_bound,
    gen_adversarial,
    gen_shifting,
    gen_stochastic_gap,
    kshift_bruteforce,
    kshift_oracle,
    play,
    quantile_competitor,
    rng_for,
    timevarying_regret,
    truncated_loss_totals,
    tv_bound,
    variation,
)
from .potential import ExpertState, PotentialParams, phi, weight
from .sleeping import ConfidenceRound, SleepingRegistry
from .tree import (
    PruningTree,
    TemplateTree,
    TreeLearner,
    TreeNode,
    absolute_loss,
    best_pruning,
    best_pruning_bruteforce,
    generate_tree_data,
    pruning_leaves,
    pruning_predict,
    random_template_tree,
    squared_loss,
)

__all__ = [
    "FixedLearner",
    "relative_entropy",
    "TvLearner",
    "adaptive_regret",
    "check_all_interval_bounds",
    "interval_bound",
    "HedgeLearner",
    "LossTrace",
    "RunRecord",
    "decomposition_bruteforce",
    "decomposition_value",
    "first_order_bound",
    "gen_adversarial",
    "gen_shifting",
    "gen_stochastic_gap",
    "kshift_bruteforce",
    "kshift_oracle",
    "play",
    "quantile_competitor",
    "rng_for",
    "timevarying_regret",
    "truncated_loss_totals",
    "tv_bound",
    "variation",
    "ExpertState",
    "PotentialParams",
    "phi",
    "weight",
    "ConfidenceRound",
    "SleepingRegistry",
    "PruningTree",
    "TemplateTree",
    "TreeLearner",
    "TreeNode",
    "absolute_loss",
    "best_pruning",
    "best_pruning_bruteforce",
    "generate_tree_data",
    "pruning_leaves",
    "pruning_predict",
    "random_template_tree",
    "squared_loss",
]

__version__ = "0.1.0"

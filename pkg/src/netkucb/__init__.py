"""Cooperative kernelized contextual bandits over networks with delays."""

from .backend import BACKEND
from .embeddings import EmbeddingState, EmpiricalNetworkKernel
from .environment import (
    GroundTruth,
    derived_rng,
    gen_network_contexts,
    instant_regret,
    make_ground_truth,
    reward,
)
from .graphs import (
    CentralAssignment,
    CliqueCover,
    Graph,
    all_pairs_distances,
    assign_peripherals,
    gen_erdos_renyi,
    graph_power,
    greedy_clique_cover,
    greedy_max_weight_independent_set,
    load_edge_list,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    RegretTrace,
    aggregate,
    metrics_report,
    run_experiment,
    run_trial,
    write_csv,
)
from .kernels import (
    AugmentedContext,
    ComposedKernel,
    KernelSpec,
    build_gram,
    eval_composed,
    eval_kernel,
    gram_compose,
    kernel_matrix,
    numerical_rank,
)
from .network import Message, MessageSchedule
from .policies import Agent, LinUcbState
from .regression import (
    DualState,
    NumericalCorruptionError,
    PrimalState,
    UcbParams,
    init_state,
    make_state,
)

__version__ = "0.1.0"

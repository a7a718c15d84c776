"""Distributed block-wise minimization of sums of submodular functions.

A numpy library plus a small CLI simulating a network of agents that
cooperatively minimize a sum of private submodular functions by averaging
neighbor estimates, stepping along single blocks of greedy subgradients of
the convex relaxation, and rounding the result by thresholding. Includes a
distributed graph-cut image segmentation workload and exhaustive/max-flow
verification oracles.
"""

from .engine import (
    AveragedTrace,
    RoundMessage,
    RunConfig,
    RunTrace,
    StepsizeSchedule,
    consensus_error,
    expected_metrics,
    init,
    run,
    step,
    stepsize,
)
from .oracle import FlowNetwork, build_flow_network, cut_value, max_flow_min_cut
from .segmentation import (
    CutInstance,
    CutSetFunction,
    ProbabilityModel,
    add_noise,
    build_cut_instance,
    build_segmentation_workload,
    disk_image,
    disk_mask,
    load_pgm,
    local_cut_function,
    mask_from_set,
    pairwise_weight,
    partition_image,
    save_pgm,
    unary_weights,
)
from .submodular import (
    BlockPartition,
    ModularFunction,
    SetFunction,
    as_indices,
    as_mask,
    block_greedy,
    brute_force_min,
    descending_order,
    full_greedy_subgradient,
    in_base_polyhedron,
    is_submodular,
    lovasz_extension,
    partial_sort,
    threshold,
)
from .synthetic import (
    planted_cut_workload,
    random_cut_function,
    random_cut_instance,
    random_cut_workload,
)
from .topology import (
    Digraph,
    check_doubly_stochastic,
    erdos_renyi_strongly_connected,
    is_strongly_connected,
    load_edge_list,
    metropolis_weights,
    save_edge_list,
    sinkhorn_weights,
    symmetrize,
)

__version__ = "0.1.0"

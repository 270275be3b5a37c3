"""Balanced tree-weighted 2-partitions of grid regions via staged dual walks."""

from .chains import Chain, Plan, recom_step, revrecom_step, run_experiment
from .errors import (
    BadInput,
    CrossRegionPath,
    DisconnectedInput,
    InfeasibleBalance,
    NoTargetReachable,
    NotAnEdgeQCenter,
    NotSimplyConnected,
    NotSpanningTree,
    QTooLarge,
    TooLarge,
    TooSmall,
    TreesplitError,
)
from .oracle import (
    closed_form_distribution,
    enumerate_spanning_trees,
    exact_split_distribution,
    matrix_tree_count,
)
from .planar import (
    Z2,
    Z2_PARAMS,
    LatticeParams,
    PlanarGraph,
    PlanarRegion,
    WiredDual,
    build_grid_region,
    dual_tree_to_primal_tree,
    face_depths,
    grid_region,
    is_simply_connected,
    load_region,
    wired_dual,
)
from .regiontree import (
    Center,
    QCenterSet,
    RegionTree,
    WeightedTree,
    contiguity_precheck,
    enumerate_q_centers,
    find_center,
    select_vstar,
)
from .rng import RNG_ALGORITHM, WalkRng
from .sampler import Partition2, SampleOutcome, sample_balanced, sample_q_balanced, sample_ust
from .separator import Policy, PolicyDirective, PolicyParams, SeparatorCurve, cycle_separator, policy_Q
from .walks import DualForest, dual_wilson_ust, loop_erased_walk, modified_wilson_stage, wilson_ust

__version__ = "0.1.0"

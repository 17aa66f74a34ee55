"""Maximum entropy deep inverse reinforcement learning for grid cost maps."""

from .estimators import ManualCostTransformer, MaxEntIRLEstimator
from .grid import (
    Action,
    DemonstrationSet,
    GridSpec,
    Mdp,
    Trajectory,
    crop_trajectories,
    transition,
    validate_trajectory,
)
from .maps import CostMap, OccupancyGrid
from .metrics import eval_mhd, eval_nll, modified_hausdorff, pr_sweep, trajectory_score
from .network import NetConfig, NetworkParams, forward, init_params
from .prior import ManualRules, manual_cost
from .solver import (
    Policy,
    RewardMap,
    SoftValues,
    VisitationMap,
    data_loss_and_grad,
    demo_svf,
    expected_svf,
    sample_trajectories,
    soft_value_iteration,
)
from .training import TrainConfig, TrainReport, finetune, pretrain, run_pipeline
from .worlds import (
    FeatureKind,
    Scenario,
    corner_case_scenario,
    generate_collision_trajectories,
    generate_demos,
    generate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CostMap",
    "DemonstrationSet",
    "FeatureKind",
    "GridSpec",
    "ManualCostTransformer",
    "ManualRules",
    "MaxEntIRLEstimator",
    "Mdp",
    "NetConfig",
    "NetworkParams",
    "OccupancyGrid",
    "Policy",
    "RewardMap",
    "Scenario",
    "SoftValues",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "VisitationMap",
    "corner_case_scenario",
    "crop_trajectories",
    "data_loss_and_grad",
    "demo_svf",
    "eval_mhd",
    "eval_nll",
    "expected_svf",
    "finetune",
    "forward",
    "generate_collision_trajectories",
    "generate_demos",
    "generate_scenario",
    "init_params",
    "manual_cost",
    "modified_hausdorff",
    "pr_sweep",
    "pretrain",
    "run_pipeline",
    "sample_trajectories",
    "soft_value_iteration",
    "trajectory_score",
    "transition",
    "validate_trajectory",
]

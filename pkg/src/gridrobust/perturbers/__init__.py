from .base import GradientPerturber, NullPerturber, RandomPerturber, RlPerturber
from .gradient import GepaConfig, NonFiniteObjective, estimate_gradient, fgsm_attack, gepa_attack
from .random_agent import PerturbationRecord, RpaConfig, draw_perturbation, rpa_apply
from .rl_agent import (
    NO_PERTURBATION,
    PerturbationAction,
    QFunction,
    RlpaConfig,
    SensorAttacker,
    action_group_targets,
    grid_features,
    load_qfunction,
    reduce_action_space,
    rlpa_act,
    rlpa_train,
    save_qfunction,
)

__all__ = [
    "GepaConfig",
    "GradientPerturber",
    "NO_PERTURBATION",
    "NonFiniteObjective",
    "NullPerturber",
    "PerturbationAction",
    "PerturbationRecord",
    "QFunction",
    "RandomPerturber",
    "RlPerturber",
    "RlpaConfig",
    "RpaConfig",
    "SensorAttacker",
    "action_group_targets",
    "draw_perturbation",
    "estimate_gradient",
    "fgsm_attack",
    "gepa_attack",
    "grid_features",
    "load_qfunction",
    "reduce_action_space",
    "rlpa_act",
    "rlpa_train",
    "rpa_apply",
    "save_qfunction",
]

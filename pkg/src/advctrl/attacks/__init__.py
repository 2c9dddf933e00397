"""The adversary problems: poisoning, evasion and reward shaping."""

from .evasion import (
    evasion_control_problem,
    minimal_flip_perturbation,
    perturbation_norm,
    testtime_attack,
)
from .goals import AttackGoal, CleanReference
from .poisoning import (
    FeaturePerturbSurface,
    LabelFlipSurface,
    PoisonResult,
    SeqPoisonResult,
    batch_poison,
    batch_poison_problem,
    sequential_poison,
    sequential_poison_problem,
)
from .shaping import (
    ShapingRun,
    greedy_shaping_step,
    shape_rewards,
    shaping_control_problem,
    shaping_step_cost,
)

__all__ = [
    "AttackGoal",
    "CleanReference",
    "testtime_attack",
    "minimal_flip_perturbation",
    "perturbation_norm",
    "evasion_control_problem",
    "LabelFlipSurface",
    "FeaturePerturbSurface",
    "PoisonResult",
    "SeqPoisonResult",
    "batch_poison",
    "batch_poison_problem",
    "sequential_poison",
    "sequential_poison_problem",
    "ShapingRun",
    "greedy_shaping_step",
    "shape_rewards",
    "shaping_control_problem",
    "shaping_step_cost",
]

"""Adversarial machine learning as discrete-time optimal control.

Victim learners are plants, attacks are control inputs found by
trajectory optimization, and defenses are control problems over model
states.  Five scenarios are covered at desk scale: batch training-set
poisoning, sequential (online) poisoning, test-time evasion,
adversarial-training defense, and reward shaping against a UCB bandit.
"""

from . import attacks, bandit, control, defense, learners, solvers
from .attacks import (
    AttackGoal,
    CleanReference,
    FeaturePerturbSurface,
    LabelFlipSurface,
    batch_poison,
    greedy_shaping_step,
    sequential_poison,
    shape_rewards,
    testtime_attack,
)
from .bandit import BanditEnv, BanditState, UcbConfig
from .control import ControlProblem, Trajectory, objective, project_control, rollout
from .defense import DefenseConfig, adversarial_training, margin_violation_rate
from .learners import (
    Dataset,
    LabeledExample,
    LearnerConfig,
    LinearModel,
    batch_svm_train,
    sgd_step,
)

__version__ = "0.1.0"

__all__ = [
    "attacks",
    "bandit",
    "control",
    "defense",
    "learners",
    "solvers",
    "AttackGoal",
    "CleanReference",
    "FeaturePerturbSurface",
    "LabelFlipSurface",
    "batch_poison",
    "greedy_shaping_step",
    "sequential_poison",
    "shape_rewards",
    "testtime_attack",
    "BanditEnv",
    "BanditState",
    "UcbConfig",
    "ControlProblem",
    "Trajectory",
    "objective",
    "project_control",
    "rollout",
    "DefenseConfig",
    "adversarial_training",
    "margin_violation_rate",
    "Dataset",
    "LabeledExample",
    "LearnerConfig",
    "LinearModel",
    "batch_svm_train",
    "sgd_step",
]

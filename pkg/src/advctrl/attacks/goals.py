"""Adversary goals and clean-reference effort costs shared by the attacks.

A goal fixes the terminal cost of the attack's control problem; a clean
reference fixes the running cost as a distance between the chosen
controls and what an unmodified data stream would have looked like.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..control import INF, indicator
from ..learners import Dataset, LabeledExample

__all__ = ["AttackGoal", "CleanReference", "GOAL_KINDS", "DISTANCE_KINDS"]

GOAL_KINDS = ("exact-model", "near-model", "target-set", "flip-item", "target-arm")
DISTANCE_KINDS = ("edit-count", "summed-euclidean", "p1", "p2", "pinf")

_NORM_ORDERS = {1.0: 1, 2.0: 2, INF: np.inf}


@dataclass
class AttackGoal:
    """What the adversary wants; exactly the fields of ``kind`` are set.

    Kinds:
        exact-model: land the trained weights exactly on ``target_model``
            (hard constraint, tolerance ``atol``).
        near-model:  minimize ``||w - target_model||`` in the given norm.
        target-set:  force ``w . target_item >= confidence`` (hard).
        flip-item:   flip the prediction of ``target_item`` with margin
            ``tau`` (test-time attack; consumed by the harness).
        target-arm:  make the bandit pull ``target_arm``; ``tradeoff``
            weighs wrong-arm rounds against squared shaping effort.
    """

    kind: str
    target_model: np.ndarray | None = None
    norm: float = 2.0
    target_item: np.ndarray | None = None
    confidence: float | None = None
    tau: float | None = None
    target_arm: int | None = None
    tradeoff: float | None = None
    atol: float = 0.0

    def __post_init__(self):
        if self.kind not in GOAL_KINDS:
            raise ValueError(f"unknown goal kind {self.kind!r}; expected one of {GOAL_KINDS}")
        if self.target_model is not None:
            self.target_model = np.atleast_1d(np.asarray(self.target_model, dtype=float))
        if self.target_item is not None:
            self.target_item = np.atleast_1d(np.asarray(self.target_item, dtype=float))
        if self.kind in ("exact-model", "near-model") and self.target_model is None:
            raise ValueError(f"{self.kind} goal needs a target model")
        if self.kind == "target-set" and (self.target_item is None or self.confidence is None):
            raise ValueError("target-set goal needs a target item and a confidence level")
        if self.kind == "flip-item" and self.target_item is None:
            raise ValueError("flip-item goal needs a target item")
        if self.kind == "target-arm":
            if self.target_arm is None:
                raise ValueError("target-arm goal needs an arm index")
            if self.tradeoff is None or self.tradeoff <= 0:
                raise ValueError("target-arm goal needs a positive trade-off weight")
        if float(self.norm) not in _NORM_ORDERS:
            raise ValueError("norm must be 1, 2 or inf")

    # -- constructors --------------------------------------------------

    @classmethod
    def exact_model(cls, target, atol: float = 0.0) -> "AttackGoal":
        return cls("exact-model", target_model=target, atol=atol)

    @classmethod
    def near_model(cls, target, norm: float = 2.0) -> "AttackGoal":
        return cls("near-model", target_model=target, norm=norm)

    @classmethod
    def target_set(cls, item, confidence: float) -> "AttackGoal":
        return cls("target-set", target_item=item, confidence=float(confidence))

    @classmethod
    def flip_item(cls, item, tau: float = 1e-2) -> "AttackGoal":
        return cls("flip-item", target_item=item, tau=float(tau))

    @classmethod
    def pull_arm(cls, arm: int, tradeoff: float = 1.0) -> "AttackGoal":
        return cls("target-arm", target_arm=int(arm), tradeoff=float(tradeoff))

    # -- costs ----------------------------------------------------------

    def terminal_cost(self, w: np.ndarray) -> float:
        """Cost of ending at weight vector w (model-state goals only)."""
        w = np.asarray(w, dtype=float)
        if self.kind == "exact-model":
            if self.atol == 0.0:
                hit = bool(np.array_equal(w, self.target_model))
            else:
                hit = bool(np.max(np.abs(w - self.target_model)) <= self.atol)
            return indicator(not hit)
        if self.kind == "near-model":
            return float(np.linalg.norm(w - self.target_model, ord=_NORM_ORDERS[float(self.norm)]))
        if self.kind == "target-set":
            return indicator(float(w @ self.target_item) < self.confidence)
        raise ValueError(f"goal kind {self.kind!r} has no model-state terminal cost")

    def terminal_violation(self, w: np.ndarray) -> float:
        """Finite badness measure, used to rank infeasible candidates."""
        w = np.asarray(w, dtype=float)
        if self.kind == "exact-model":
            return float(np.max(np.abs(w - self.target_model)))
        if self.kind == "target-set":
            return max(0.0, self.confidence - float(w @ self.target_item))
        return self.terminal_cost(w)

    @property
    def hard(self) -> bool:
        """True when the terminal cost is an indicator (infinite on miss)."""
        return self.kind in ("exact-model", "target-set")


def _feature_diffs(candidate, reference) -> np.ndarray:
    return np.stack(
        [np.asarray(c.features, dtype=float) - np.asarray(r.features, dtype=float)
         for c, r in zip(candidate, reference)]
    ) if len(reference) else np.zeros((0, 1))


@dataclass
class CleanReference:
    """Clean data the attack is measured against.

    ``distance`` picks the effort metric:
        edit-count:       number of modified items (features or label),
        summed-euclidean: sum over items of the Euclidean feature change,
        p1 / p2 / pinf:   p-norm of the stacked feature changes.

    ``effort_weight`` scales the resulting running cost; 0 models an
    adversary whose edits are free.
    """

    reference: Dataset | list
    distance: str = "summed-euclidean"
    effort_weight: float = 1.0

    def __post_init__(self):
        if self.distance not in DISTANCE_KINDS:
            raise ValueError(f"unknown distance {self.distance!r}; expected one of {DISTANCE_KINDS}")
        if self.effort_weight < 0:
            raise ValueError("effort weight must be nonnegative")
        if not isinstance(self.reference, Dataset):
            self.reference = Dataset(list(self.reference))

    def __len__(self) -> int:
        return len(self.reference)

    def raw_distance(self, candidate) -> float:
        """Distance between a candidate item sequence and the reference."""
        if len(candidate) != len(self.reference):
            raise ValueError("candidate and reference sizes differ "
                             "(insertion/deletion is outside the attack surface)")
        if self.distance == "edit-count":
            changed = 0
            for c, r in zip(candidate, self.reference):
                if c.label != r.label or not np.array_equal(c.features, r.features):
                    changed += 1
            return float(changed)
        diffs = _feature_diffs(candidate, self.reference)
        if self.distance == "summed-euclidean":
            return float(np.linalg.norm(diffs, axis=1).sum())
        order = {"p1": 1, "p2": 2, "pinf": np.inf}[self.distance]
        return float(np.linalg.norm(diffs.ravel(), ord=order))

    def cost(self, candidate) -> float:
        return self.effort_weight * self.raw_distance(candidate)

    def step_distance(self, item: LabeledExample, t: int) -> float:
        """Per-step distance between one control item and its reference slot."""
        ref = self.reference[t]
        if self.distance == "edit-count":
            same = item.label == ref.label and np.array_equal(item.features, ref.features)
            return 0.0 if same else 1.0
        delta = item.features - ref.features
        if self.distance == "summed-euclidean":
            return float(np.linalg.norm(delta))
        order = {"p1": 1, "p2": 2, "pinf": np.inf}[self.distance]
        return float(np.linalg.norm(delta, ord=order))

    def step_cost(self, item: LabeledExample, t: int) -> float:
        return self.effort_weight * self.step_distance(item, t)

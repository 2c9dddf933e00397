"""Adversarial-training defense as sequential control over the model.

The defended property is a large-margin requirement: no point within an
epsilon p-ball of a training item may receive a different label than
the item.  For linear models the requirement is checked exactly via the
dual-norm distance to the decision boundary; a Monte-Carlo ball check
is available as the generic-model fallback.  The training loop
repeatedly attacks the current model, appends the adversarial item with
its clean label, and applies one gradient step -- the model state under
unit-cost control inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks.evasion import minimal_flip_perturbation, perturbation_norm
from .csvio import write_csv
from .learners import Dataset, LabeledExample, LinearModel, sgd_step

__all__ = [
    "DefenseConfig",
    "TrailEntry",
    "boundary_distance",
    "find_adversarial",
    "margin_violation_rate",
    "adversarial_training",
    "write_trail_csv",
]

_DUAL = {1.0: np.inf, 2.0: 2, np.inf: 1}


@dataclass
class DefenseConfig:
    """Margin target and training-loop hyperparameters."""

    epsilon: float
    p: float = 2.0
    iterations: int = 10
    eta: float = 0.1
    mc_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("margin epsilon must be positive")
        if float(self.p) not in _DUAL:
            raise ValueError("norm p must be 1, 2 or inf")
        if self.iterations < 0:
            raise ValueError("iteration count must be nonnegative")
        if self.eta <= 0:
            raise ValueError("update step must be positive")
        if self.mc_samples < 1:
            raise ValueError("sample count must be at least 1")


def boundary_distance(model: LinearModel, x, p: float = 2.0) -> float:
    """p-norm distance from x to the decision boundary: |w.x + b| / ||w||_q."""
    w = model.weights
    if not np.any(w != 0.0):
        raise ValueError("model has a zero weight vector: no decision boundary")
    return abs(model.decision(x)) / float(np.linalg.norm(w, ord=_DUAL[float(p)]))


def _violates_margin(model: LinearModel, item: LabeledExample, epsilon: float,
                     p: float) -> bool:
    """Exact check: does some point in the epsilon ball get a label
    other than the item's?  (Prediction ties at 0 go to +1.)"""
    c = model.decision(item.features)
    reach = epsilon * float(np.linalg.norm(model.weights, ord=_DUAL[float(p)]))
    if item.label == 1:
        return c - reach < 0.0
    return c + reach >= 0.0


def find_adversarial(
    model: LinearModel,
    item: LabeledExample,
    epsilon: float,
    p: float = 2.0,
    tau: float = 1e-6,
) -> np.ndarray | None:
    """A point within epsilon of the item that the model labels differently,
    or None when no such point exists.

    Misclassified items are their own adversarial examples.  Otherwise
    the closed-form minimal perturbation is pushed ``tau`` past the
    boundary and re-checked against the epsilon ball.
    """
    if model.predict(item.features) != item.label:
        return item.features.copy()
    delta = minimal_flip_perturbation(model, item.features, p=p, tau=tau)
    if perturbation_norm(delta, p) > epsilon:
        return None
    candidate = item.features + delta
    if model.predict(candidate) == item.label:
        return None
    return candidate


def _sample_ball(rng: np.random.Generator, center: np.ndarray, radius: float,
                 p: float, m: int) -> np.ndarray:
    """m points drawn uniformly from the p-ball around ``center``."""
    d = center.shape[0]
    radii = radius * rng.random(m) ** (1.0 / d)
    if p == np.inf:
        directions = rng.uniform(-1.0, 1.0, size=(m, d))
        scale = np.abs(directions).max(axis=1)
    elif p == 2.0:
        directions = rng.standard_normal((m, d))
        scale = np.linalg.norm(directions, axis=1)
    else:
        magnitudes = rng.exponential(size=(m, d))
        directions = np.sign(rng.uniform(-1.0, 1.0, size=(m, d))) * magnitudes
        scale = np.abs(directions).sum(axis=1)
    return center + directions / scale[:, None] * radii[:, None]


def margin_violation_rate(
    model: LinearModel,
    data: Dataset,
    epsilon: float,
    p: float = 2.0,
    method: str = "exact",
    mc_samples: int = 1000,
    seed: int = 0,
) -> float:
    """Fraction of training items whose epsilon ball crosses the boundary.

    ``method="exact"`` uses the dual-norm distance test (linear models).
    ``method="montecarlo"`` samples ``mc_samples`` points per ball and
    reports an item violated when any sample flips -- the generic-model
    fallback, which agrees with the exact rate up to sampling error.
    """
    if len(data) == 0:
        return 0.0
    if method == "exact":
        bad = sum(_violates_margin(model, it, epsilon, p) for it in data)
        return bad / len(data)
    if method != "montecarlo":
        raise ValueError(f"unknown method {method!r}; expected exact or montecarlo")
    rng = np.random.default_rng(seed)
    w, b = model.weights, model.bias
    bad = 0
    for it in data:
        points = _sample_ball(rng, it.features, epsilon, float(p), mc_samples)
        labels = np.where(points @ w + b >= 0.0, 1, -1)
        if np.any(labels != it.label):
            bad += 1
    return bad / len(data)


@dataclass
class TrailEntry:
    """One executed defense step: the appended item and the margin state after."""

    iteration: int
    features: np.ndarray
    label: int
    violation_rate_after: float


def adversarial_training(
    h0: LinearModel,
    data: Dataset,
    config: DefenseConfig,
) -> tuple[LinearModel, list]:
    """Iteratively harden a model with self-generated adversarial items.

    Each iteration sweeps the training items in dataset order, takes the
    first one that still admits an adversarial example against the
    current model, appends that example with the item's clean label and
    applies one hinge-loss gradient step.  Stops early once no item
    yields an adversarial example.  Every executed step costs 1, so the
    running-cost total equals the trail length (at most ``iterations``).
    """
    if len(data) == 0:
        raise ValueError("training data must be non-empty")
    model = h0.copy()
    trail: list[TrailEntry] = []
    for i in range(1, config.iterations + 1):
        found = None
        for item in data:
            adv = find_adversarial(model, item, config.epsilon, config.p)
            if adv is not None:
                found = LabeledExample(adv, item.label)
                break
        if found is None:
            break
        model = sgd_step(model, found, config.eta, lam=0.0, loss="hinge")
        rate = margin_violation_rate(model, data, config.epsilon, config.p)
        trail.append(TrailEntry(i, found.features, found.label, rate))
    return model, trail


def write_trail_csv(trail, path, dim: int) -> None:
    """Audit-trail export: iteration, x components, y, violation_rate_after."""
    header = ["iteration"] + [f"x_{j}" for j in range(dim)] + ["y", "violation_rate_after"]
    rows = (
        [e.iteration, *e.features, e.label, e.violation_rate_after]
        for e in trail
    )
    write_csv(path, header, rows)

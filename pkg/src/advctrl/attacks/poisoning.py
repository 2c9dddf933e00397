"""Training-data poisoning attacks.

Against a batch learner the adversary faces a degenerate one-step
control problem: the control is a whole training set and the plant maps
it through regularized hinge-loss ERM (the bilevel / Stackelberg view).
Against a sequential learner the adversary plays classic discrete-time
control, choosing one training item per step of the victim's gradient
descent.

The searchable attack surfaces are label flips and bounded feature
edits on a fixed-size dataset; inserting or deleting items is out of
scope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..control import INF, ControlProblem, NormBall, Trajectory, rollout
from ..learners import (
    Dataset,
    LabeledExample,
    LearnerConfig,
    batch_svm_train,
    item_gradient,
    svm_train_weights,
)
from ..solvers import SolverReport, cross_entropy, grid_search, projected_gradient
from .goals import AttackGoal, CleanReference

__all__ = [
    "LabelFlipSurface",
    "FeaturePerturbSurface",
    "PoisonResult",
    "SeqPoisonResult",
    "batch_poison_problem",
    "batch_poison",
    "sequential_poison_problem",
    "sequential_poison",
]

_MODEL_GOALS = ("exact-model", "near-model", "target-set")
_FLIP_ENUMERATION_LIMIT = 16


@dataclass(frozen=True)
class LabelFlipSurface:
    """Flip labels of a fixed-size training set (optionally at most
    ``max_flips`` of them)."""

    max_flips: int | None = None


@dataclass(frozen=True)
class FeaturePerturbSurface:
    """Perturb item features within a per-item p-norm budget.

    ``items`` restricts which rows the adversary may edit (None = all).
    """

    budget: float
    p: float = INF
    items: tuple | None = None

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")


@dataclass
class PoisonResult:
    """Poisoned dataset, its trajectory through the learner, and the
    solver report (status ``infeasible`` carries the best-effort
    candidate found)."""

    dataset: Dataset
    trajectory: Trajectory
    report: SolverReport

    @property
    def feasible(self) -> bool:
        return self.report.status != "infeasible"


@dataclass
class SeqPoisonResult:
    """Optimized training sequence, its trajectory, and the solver report."""

    controls: list
    trajectory: Trajectory
    report: SolverReport

    @property
    def feasible(self) -> bool:
        return self.report.status != "infeasible"


# ----------------------------------------------------------------------
# Batch learner (one-step problem)
# ----------------------------------------------------------------------


def batch_poison_problem(
    clean: CleanReference,
    goal: AttackGoal,
    learner: LearnerConfig,
) -> ControlProblem:
    """The batch-poisoning bilevel problem as one-step control.

    The control is a whole :class:`Dataset`; the dynamics hide the
    victim's training run; the running cost is the distance to the
    clean data and the terminal cost encodes the goal.
    """
    return ControlProblem(
        dynamics=lambda state, u, t, rng: batch_svm_train(u, learner.lam).weights,
        running_cost=lambda state, u, t: clean.cost(u),
        terminal_cost=goal.terminal_cost,
        horizon=1,
        smooth=not goal.hard,
    )


def _flip_pattern(data: Dataset, pattern) -> Dataset:
    items = [
        LabeledExample(it.features, -it.label if flip else it.label)
        for it, flip in zip(data, pattern)
    ]
    return Dataset(items)


def _solve_label_flips(problem, clean, goal, surface):
    n = len(clean)
    if n > _FLIP_ENUMERATION_LIMIT:
        raise ValueError(
            f"label-flip enumeration over {n} items exceeds the "
            f"{_FLIP_ENUMERATION_LIMIT}-item guard"
        )
    best_obj = INF
    best = None  # (pattern, dataset)
    fallback = None  # (violation, running, pattern, dataset) among infeasible
    evals = 0
    for pattern in itertools.product((0, 1), repeat=n):
        if surface.max_flips is not None and sum(pattern) > surface.max_flips:
            continue
        candidate = _flip_pattern(clean.reference, pattern)
        traj = rollout(problem, [candidate], None)
        evals += 1
        obj = traj.total_cost
        if obj < best_obj:
            best_obj, best = obj, (pattern, candidate)
        elif best is None:
            key = (goal.terminal_violation(traj.states[-1]), traj.step_costs[0])
            if fallback is None or key < fallback[0]:
                fallback = (key, pattern, candidate)
    if best is not None:
        pattern, dataset = best
        status = "optimal-on-grid"
    else:
        _, pattern, dataset = fallback
        best_obj, status = INF, "infeasible"
    report = SolverReport(
        best_controls=[np.asarray(pattern, dtype=float)],
        best_objective=best_obj,
        evaluations=evals,
        status=status,
    )
    return dataset, report


def _delta_running_cost(clean: CleanReference, edit_idx, dim: int):
    """Running cost over the flat delta vector, equal to the dataset
    distance (unedited rows contribute nothing)."""
    weight = clean.effort_weight
    kind = clean.distance

    def cost(state, u, t):
        rows = np.asarray(u, dtype=float).reshape(len(edit_idx), dim)
        if kind == "edit-count":
            return weight * float(np.count_nonzero(np.any(rows != 0.0, axis=1)))
        if kind == "summed-euclidean":
            return weight * float(np.linalg.norm(rows, axis=1).sum())
        order = {"p1": 1, "p2": 2, "pinf": np.inf}[kind]
        return weight * float(np.linalg.norm(rows.ravel(), ord=order))

    return cost


def _run_solver(problem, init, solver, options, x0=None):
    options = dict(options or {})
    x0 = options.pop("x0", x0)
    seed = options.pop("seed", 0)
    if solver == "projected-gradient":
        return projected_gradient(problem, init, x0=x0, seed=seed, **options)
    if solver == "cross-entropy":
        return cross_entropy(problem, init, x0=x0, seed=seed, **options)
    if solver == "grid":
        grids = options.pop("grids", None)
        if grids is None:
            raise ValueError("grid solver needs explicit per-dimension 'grids'")
        return grid_search(problem, grids, x0=x0, seed=seed, **options)
    raise ValueError(
        f"unknown solver {solver!r}; expected projected-gradient, cross-entropy or grid"
    )


def batch_poison(
    clean: CleanReference,
    goal: AttackGoal,
    learner: LearnerConfig,
    surface,
    solver: str = "auto",
    solver_options: dict | None = None,
) -> PoisonResult:
    """Poison a batch training set toward the goal at minimal effort.

    Label-flip surfaces are solved exactly by enumerating flip patterns
    (the clean pattern comes first, so zero-cost goals return the clean
    data).  Feature-edit surfaces go through a generic solver over the
    flat per-item delta vector; hard-constraint goals that come back
    infeasible are reported as such together with the least-violating
    candidate found.
    """
    if goal.kind not in _MODEL_GOALS:
        raise ValueError(f"batch poisoning expects a model-state goal, got {goal.kind!r}")
    if len(clean) == 0:
        raise ValueError("clean reference dataset is empty")
    problem = batch_poison_problem(clean, goal, learner)

    if isinstance(surface, LabelFlipSurface):
        dataset, report = _solve_label_flips(problem, clean, goal, surface)
    elif isinstance(surface, FeaturePerturbSurface):
        dataset, report = _solve_feature_edits(problem, clean, goal, learner,
                                               surface, solver, solver_options)
    else:
        raise TypeError(f"unknown attack surface {type(surface).__name__}")

    trajectory = rollout(problem, [dataset], None)
    return PoisonResult(dataset=dataset, trajectory=trajectory, report=report)


def _solve_feature_edits(problem, clean, goal, learner, surface, solver, options):
    ref = clean.reference
    d = ref.dim
    edit_idx = list(surface.items) if surface.items is not None else list(range(len(ref)))
    X0 = ref.features()
    labels = ref.labels()

    def perturbed_features(flat: np.ndarray) -> np.ndarray:
        X = X0.copy()
        X[edit_idx] += np.asarray(flat, dtype=float).reshape(len(edit_idx), d)
        return X

    def candidate_for(flat: np.ndarray) -> Dataset:
        return Dataset.from_arrays(perturbed_features(flat), labels)

    inner = ControlProblem(
        dynamics=lambda state, u, t, rng: svm_train_weights(
            perturbed_features(u), labels, learner.lam),
        running_cost=_delta_running_cost(clean, edit_idx, d),
        terminal_cost=goal.terminal_cost,
        constraint=NormBall(surface.budget, surface.p, block=d),
        horizon=1,
        smooth=not goal.hard,
    )
    if solver == "auto":
        solver = "projected-gradient" if inner.smooth else "cross-entropy"
    options = dict(options or {})
    init = options.pop("init", None) or [np.zeros(len(edit_idx) * d)]
    report = _run_solver(inner, init, solver, options)

    if math.isinf(report.best_objective) and goal.hard:
        # best-effort candidate: minimize goal violation plus effort
        surrogate = ControlProblem(
            dynamics=inner.dynamics,
            running_cost=inner.running_cost,
            terminal_cost=lambda w: goal.terminal_violation(w),
            constraint=inner.constraint,
            horizon=1,
            smooth=True,
        )
        effort = projected_gradient(surrogate, init)
        report = SolverReport(
            best_controls=effort.best_controls,
            best_objective=INF,
            evaluations=report.evaluations + effort.evaluations,
            status="infeasible",
            seed=report.seed,
        )
    return candidate_for(report.best_controls[0]), report


# ----------------------------------------------------------------------
# Sequential learner (T-step problem)
# ----------------------------------------------------------------------


def sequential_poison_problem(
    clean: CleanReference,
    goal: AttackGoal,
    learner: LearnerConfig,
    labels,
    T: int,
) -> ControlProblem:
    """T-step poisoning of a gradient-descent learner, labels fixed.

    State is the weight vector; the control at step t is the feature
    vector of the t-th training item (its label comes from ``labels``).
    """
    labels = [int(y) for y in labels]
    etas = [learner.eta_at(t) for t in range(T)]
    lam = learner.lam
    loss = learner.loss
    ref_feats = [it.features for it in clean.reference]
    ref_labels = [it.label for it in clean.reference]
    weight = clean.effort_weight
    kind = clean.distance

    def dynamics(w, u, t, rng):
        g = item_gradient(w, u, labels[t], loss)
        if lam > 0.0:
            g = g + 2.0 * lam * w
        return w - etas[t] * g

    def running(w, u, t):
        if weight == 0.0:
            return 0.0
        delta = u - ref_feats[t]
        if kind == "edit-count":
            changed = labels[t] != ref_labels[t] or bool(np.any(delta != 0.0))
            return weight if changed else 0.0
        if kind in ("summed-euclidean", "p2"):
            return weight * float(np.linalg.norm(delta))
        if kind == "p1":
            return weight * float(np.abs(delta).sum())
        return weight * float(np.abs(delta).max())

    return ControlProblem(
        dynamics=dynamics,
        running_cost=running,
        terminal_cost=goal.terminal_cost,
        horizon=T,
        smooth=not goal.hard,
    )


def sequential_poison(
    clean: CleanReference,
    goal: AttackGoal,
    learner: LearnerConfig,
    w0,
    T: int,
    solver: str = "projected-gradient",
    solver_options: dict | None = None,
) -> SeqPoisonResult:
    """Optimize the training sequence fed to a sequential learner.

    Labels are enumerated over all per-step sign patterns for T <= 8
    (clean pattern first) and pinned to the clean labels for longer
    horizons; features are optimized by the chosen solver.  ``w0`` is
    the learner's initial model (a LinearModel or raw weight vector).
    """
    if T < 1:
        raise ValueError("horizon must be at least 1")
    if goal.kind not in _MODEL_GOALS:
        raise ValueError(f"sequential poisoning expects a model-state goal, got {goal.kind!r}")
    if len(clean) != T:
        raise ValueError(f"clean reference has {len(clean)} items for horizon {T}")
    w0 = np.asarray(getattr(w0, "weights", w0), dtype=float)
    if w0.shape[0] != clean.reference.dim:
        raise ValueError("initial model and clean reference dimensions differ")

    clean_labels = [it.label for it in clean.reference]
    if T <= 8:
        patterns = itertools.product(*[(y, -y) for y in clean_labels])
    else:
        patterns = [tuple(clean_labels)]

    init = [it.features.copy() for it in clean.reference]
    best = None  # (objective, labels, report, problem)
    total_evals = 0
    for labels in patterns:
        problem = sequential_poison_problem(clean, goal, learner, labels, T)
        report = _run_solver(problem, init, solver, solver_options, x0=w0)
        total_evals += report.evaluations
        if best is None or report.best_objective < best[0]:
            best = (report.best_objective, labels, report, problem)

    objective_value, labels, report, problem = best
    trajectory = rollout(problem, report.best_controls, w0)
    controls = [LabeledExample(np.atleast_1d(u), y)
                for u, y in zip(report.best_controls, labels)]
    status = "infeasible" if math.isinf(objective_value) else report.status
    final = SolverReport(
        best_controls=report.best_controls,
        best_objective=objective_value,
        evaluations=total_evals,
        status=status,
        seed=report.seed,
    )
    return SeqPoisonResult(controls=controls, trajectory=trajectory, report=final)

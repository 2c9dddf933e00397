"""Generic optimizers over open-loop control sequences.

All three solvers score candidates by rolling the plant forward and
summing costs; they differ in how they move through control space:

* :func:`grid_search` -- exact minimizer on a Cartesian grid (the desk
  oracle the other solvers are checked against),
* :func:`projected_gradient` -- finite-difference gradient descent with
  per-step Euclidean projection,
* :func:`cross_entropy` -- derivative-free Gaussian search, for costs
  with indicator terms.

Controls are handled as flat vectors of length ``T * m`` and split into
T per-step vectors of length m for the rollout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .control import INF, ControlProblem, rollout

__all__ = [
    "SolverReport",
    "grid_search",
    "projected_gradient",
    "cross_entropy",
]

_PG_MAX_STEPS = 10000
_CEM_STD_FLOOR = 1e-6


@dataclass
class SolverReport:
    """Outcome of a solver run."""

    best_controls: list
    best_objective: float
    evaluations: int
    status: str  # optimal-on-grid | converged | iteration-capped | infeasible
    seed: int = 0

    def to_text(self) -> str:
        """Flat ``key = value`` block for harness logs."""
        controls = ";".join(
            ",".join(repr(float(v)) for v in np.atleast_1d(u)) for u in self.best_controls
        )
        return "\n".join(
            [
                f"status = {self.status}",
                f"best_objective = {self.best_objective!r}",
                f"evaluations = {self.evaluations}",
                f"seed = {self.seed}",
                f"best_controls = {controls}",
            ]
        )


def _split(flat: np.ndarray, steps: int) -> list:
    return [c.copy() for c in flat.reshape(steps, -1)]


def _evaluate(problem: ControlProblem, flat: np.ndarray, steps: int, x0, seed: int,
              check: bool = True) -> float:
    traj = rollout(problem, _split(flat, steps), x0, seed=seed,
                   check_constraints=check)
    return traj.total_cost


def _project_flat(problem: ControlProblem, flat: np.ndarray, steps: int) -> np.ndarray:
    per_step = flat.reshape(steps, -1)
    out = np.empty_like(per_step)
    for t in range(steps):
        out[t] = np.atleast_1d(problem.constraint_at(t).project(per_step[t]))
    return out.ravel()


def grid_search(
    problem: ControlProblem,
    grids,
    x0=None,
    seed: int = 0,
    max_points: int = 10_000_000,
) -> SolverReport:
    """Exhaustive search over the Cartesian product of per-dimension grids.

    ``grids`` holds one 1-D value array per flattened control dimension
    (``T * m`` entries); grid points must already satisfy the constraint
    sets.  Ties go to the lexicographically first grid point.

    Raises:
        ValueError: more than ``max_points`` grid points, or a grid
            count that does not split evenly over the horizon.
    """
    grids = [np.atleast_1d(np.asarray(g, dtype=float)) for g in grids]
    steps = problem.horizon if problem.horizon is not None else 1
    if len(grids) % steps:
        raise ValueError(f"{len(grids)} grid dimensions do not split over {steps} steps")
    total = int(np.prod([g.size for g in grids]))
    if total > max_points:
        raise ValueError(f"grid has {total} points, exceeding the {max_points} guard")

    best_flat = None
    best_obj = INF
    evals = 0
    first = None
    for point in itertools.product(*grids):
        flat = np.asarray(point, dtype=float)
        if first is None:
            first = flat
        obj = _evaluate(problem, flat, steps, x0, seed)
        evals += 1
        if obj < best_obj:
            best_obj, best_flat = obj, flat
    if best_flat is None:  # every candidate infinite
        return SolverReport(_split(first, steps), INF, evals, "infeasible", seed)
    return SolverReport(_split(best_flat, steps), best_obj, evals, "optimal-on-grid", seed)


def projected_gradient(
    problem: ControlProblem,
    init_controls,
    x0=None,
    seed: int = 0,
    steps: int = _PG_MAX_STEPS,
    step_size: float = 0.1,
    fd_step: float = 1e-5,
    tol: float = 1e-8,
) -> SolverReport:
    """Projected gradient descent through the unrolled dynamics.

    The gradient comes from central finite differences of the rollout
    objective (2 * dim evaluations per iteration).  Iterates are
    projected onto the per-step constraint sets; the best iterate seen
    is returned.  Status is ``converged`` once the infinity norm of an
    update falls below ``tol``.

    Raises:
        ValueError: the problem declares nonsmooth costs, the initial
            objective is not finite, or ``step_size <= 0``.
    """
    if not problem.smooth:
        raise ValueError("projected_gradient refuses problems with nonsmooth costs; "
                         "use grid_search or cross_entropy")
    if step_size <= 0:
        raise ValueError("step size must be positive")
    if steps > _PG_MAX_STEPS:
        steps = _PG_MAX_STEPS
    horizon = problem.horizon if problem.horizon is not None else len(init_controls)
    flat = np.concatenate([np.atleast_1d(np.asarray(u, dtype=float)).ravel()
                           for u in init_controls])
    flat = _project_flat(problem, flat, horizon)
    n = flat.size

    evals = 0

    def J(z, check=False):
        nonlocal evals
        evals += 1
        return _evaluate(problem, z, horizon, x0, seed, check=check)

    best_obj = J(flat, check=True)
    if not math.isfinite(best_obj):
        raise ValueError("objective is not finite at the initial controls")
    best_flat = flat.copy()

    status = "iteration-capped"
    for _ in range(steps):
        grad = np.empty(n)
        for i in range(n):
            zp = flat.copy()
            zm = flat.copy()
            zp[i] += fd_step
            zm[i] -= fd_step
            grad[i] = (J(zp) - J(zm)) / (2.0 * fd_step)
        new_flat = _project_flat(problem, flat - step_size * grad, horizon)
        obj = J(new_flat)
        if math.isfinite(obj) and obj < best_obj:
            best_obj, best_flat = obj, new_flat.copy()
        update = np.max(np.abs(new_flat - flat))
        flat = new_flat
        if update < tol:
            status = "converged"
            break
    return SolverReport(_split(best_flat, horizon), best_obj, evals, status, seed)


def cross_entropy(
    problem: ControlProblem,
    init_controls,
    x0=None,
    seed: int = 0,
    population: int = 100,
    elite_frac: float = 0.2,
    iterations: int = 100,
    init_std: float = 1.0,
) -> SolverReport:
    """Cross-entropy method over control sequences.

    Samples Gaussian perturbations around a running mean, projects each
    sample into the constraint sets, and refits mean and standard
    deviation to the elite fraction.  Handles indicator (infinite)
    costs: infinite samples simply never make the elite set.  Fully
    deterministic given the seed; the best sample ever seen is returned.

    Raises:
        ValueError: population < 10, elite fraction outside (0, 0.5],
            or a non-positive initial standard deviation.
    """
    if population < 10:
        raise ValueError("population must be at least 10")
    if not 0.0 < elite_frac <= 0.5:
        raise ValueError("elite fraction must lie in (0, 0.5]")
    horizon = problem.horizon if problem.horizon is not None else len(init_controls)
    mean = np.concatenate([np.atleast_1d(np.asarray(u, dtype=float)).ravel()
                           for u in init_controls])
    n = mean.size
    std = np.full(n, float(init_std))
    if np.any(std <= 0.0):
        raise ValueError("initial standard deviation must be positive")

    rng = np.random.default_rng(seed)
    n_elite = max(1, int(round(elite_frac * population)))
    best_flat = None
    best_obj = INF
    evals = 0
    status = "iteration-capped"
    for _ in range(iterations):
        samples = mean + std * rng.standard_normal((population, n))
        objs = np.empty(population)
        for s in range(population):
            samples[s] = _project_flat(problem, samples[s], horizon)
            objs[s] = _evaluate(problem, samples[s], horizon, x0, seed, check=False)
            evals += 1
        order = np.argsort(objs, kind="stable")
        if objs[order[0]] < best_obj:
            best_obj = float(objs[order[0]])
            best_flat = samples[order[0]].copy()
        elite = samples[order[:n_elite]]
        elite_objs = objs[order[:n_elite]]
        if not np.all(np.isfinite(elite_objs)):
            continue  # not enough feasible samples to refit this round
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), _CEM_STD_FLOOR)
        if np.all(std <= _CEM_STD_FLOOR):
            status = "converged"
            break
    if best_flat is None or not math.isfinite(best_obj):
        fallback = best_flat if best_flat is not None else mean
        return SolverReport(_split(fallback, horizon), INF, evals, "infeasible", seed)
    return SolverReport(_split(best_flat, horizon), best_obj, evals, status, seed)

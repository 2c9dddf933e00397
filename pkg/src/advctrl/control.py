"""Discrete-time optimal control primitives.

A plant evolves as ``x_{t+1} = f(x_t, u_t)`` under control inputs drawn
from per-step constraint sets.  Control quality is the sum of running
costs ``g_t(x_t, u_t)`` plus a terminal cost ``g_T(x_T)``.  Hard
constraints are expressed as costs that are ``inf`` when violated; any
candidate with an infinite objective is treated as infeasible by the
solvers.

States and controls are arbitrary objects as far as :func:`rollout` is
concerned (the attack modules use weight vectors, labeled items and
bandit statistics).  Constraint sets, in contrast, act on dense real
vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

State = Any
Control = Any
Dynamics = Callable[[State, Control, int, np.random.Generator], State]
RunningCost = Callable[[State, Control, int], float]
TerminalCost = Callable[[State], float]

INF = float("inf")

__all__ = [
    "INF",
    "indicator",
    "Constraint",
    "Unconstrained",
    "Box",
    "FiniteSet",
    "HalfSpace",
    "NormBall",
    "Intersection",
    "ControlProblem",
    "Trajectory",
    "ConstraintViolation",
    "InfeasibleError",
    "rollout",
    "objective",
    "project_control",
]


def indicator(condition: bool, weight: float = INF) -> float:
    """Weighted indicator cost: ``weight`` if the condition holds, else 0.

    With the default infinite weight this encodes a hard constraint
    (e.g. "the trained model must land exactly on the target").
    """
    return weight if condition else 0.0


class ConstraintViolation(ValueError):
    """A control fell outside its constraint set."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class InfeasibleError(RuntimeError):
    """A hard-constraint goal cannot be met; carries the best candidate found."""

    def __init__(self, message: str, candidate=None):
        super().__init__(message)
        self.candidate = candidate


# ----------------------------------------------------------------------
# Constraint sets
# ----------------------------------------------------------------------


class Constraint:
    """A control constraint set with membership test and Euclidean projection."""

    def contains(self, u, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def project(self, u) -> np.ndarray:
        """Nearest feasible point in Euclidean distance."""
        raise NotImplementedError


@dataclass(frozen=True)
class Unconstrained(Constraint):
    def contains(self, u, tol: float = 1e-9) -> bool:
        return True

    def project(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float)


UNCONSTRAINED = Unconstrained()


@dataclass(frozen=True)
class Box(Constraint):
    """Componentwise bounds ``lower <= u <= upper``."""

    lower: Any
    upper: Any

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo > hi):
            raise ValueError("box constraint requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def project(self, u) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class FiniteSet(Constraint):
    """A finite candidate set; projection picks the nearest candidate,
    first-listed on ties."""

    candidates: tuple

    def __post_init__(self):
        cands = tuple(np.asarray(c, dtype=float) for c in self.candidates)
        if not cands:
            raise ValueError("finite candidate set must be non-empty")
        object.__setattr__(self, "candidates", cands)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return any(np.linalg.norm(u - c) <= tol for c in self.candidates)

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        dists = [float(np.linalg.norm(u - c)) for c in self.candidates]
        return self.candidates[int(np.argmin(dists))].copy()


@dataclass(frozen=True)
class HalfSpace(Constraint):
    """The set ``{u : normal . u <= offset}``."""

    normal: Any
    offset: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.normal, dtype=float))
        if not np.any(a != 0.0):
            raise ValueError("half-space normal must be non-zero")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(float(self.normal @ u) <= self.offset + tol)

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        excess = float(self.normal @ u) - self.offset
        if excess <= 0.0:
            return u.copy()
        return u - excess / float(self.normal @ self.normal) * self.normal


def _project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    # Duchi et al. simplex projection applied to |v|.
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    s = np.sort(a)[::-1]
    cumsum = np.cumsum(s)
    rho = np.nonzero(s * np.arange(1, len(s) + 1) > cumsum - radius)[0][-1]
    theta = (cumsum[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


@dataclass(frozen=True)
class NormBall(Constraint):
    """p-norm ball of given radius, optionally applied per block.

    With ``block`` set, the control is viewed as consecutive blocks of
    that length and each block must lie in the ball (used for per-item
    feature-edit budgets).
    """

    radius: float
    p: float = 2.0
    block: int | None = None

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.p not in (1.0, 2.0, INF, 1, 2):
            raise ValueError("only p in {1, 2, inf} supported")
        object.__setattr__(self, "p", float(self.p))

    def _blocks(self, u: np.ndarray) -> np.ndarray:
        if self.block is None:
            return u.reshape(1, -1)
        if u.size % self.block:
            raise ValueError("control length is not a multiple of the block size")
        return u.reshape(-1, self.block)

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        rows = self._blocks(u)
        if self.p == INF:
            norms = np.abs(rows).max(axis=1)
        else:
            norms = np.linalg.norm(rows, ord=self.p, axis=1)
        return bool(np.all(norms <= self.radius + tol))

    def project(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        rows = self._blocks(u).copy()
        if self.p == INF:
            rows = np.clip(rows, -self.radius, self.radius)
        elif self.p == 2.0:
            norms = np.linalg.norm(rows, axis=1)
            over = norms > self.radius
            rows[over] *= (self.radius / norms[over])[:, None]
        else:
            for i in range(rows.shape[0]):
                rows[i] = _project_l1_ball(rows[i], self.radius)
        return rows.reshape(u.shape)


@dataclass(frozen=True)
class Intersection(Constraint):
    """Intersection of convex constraint sets.

    Projection uses Dykstra's alternating algorithm, which converges to
    the exact Euclidean projection for convex parts.
    """

    parts: tuple
    max_iter: int = 5000
    tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("intersection needs at least one part")

    def contains(self, u, tol: float = 1e-9) -> bool:
        return all(p.contains(u, tol) for p in self.parts)

    def project(self, u) -> np.ndarray:
        x = np.asarray(u, dtype=float).copy()
        increments = [np.zeros_like(x) for _ in self.parts]
        for _ in range(self.max_iter):
            x_prev = x.copy()
            for i, part in enumerate(self.parts):
                y = part.project(x + increments[i])
                increments[i] = x + increments[i] - y
                x = y
            if np.max(np.abs(x - x_prev)) < self.tol:
                break
        return x


def project_control(constraint: Constraint | None, u) -> np.ndarray:
    """Project a control onto its constraint set (identity when unconstrained)."""
    if constraint is None:
        return np.asarray(u, dtype=float)
    return constraint.project(u)


# ----------------------------------------------------------------------
# Problems and trajectories
# ----------------------------------------------------------------------


@dataclass
class ControlProblem:
    """A discrete-time control problem.

    Attributes:
        dynamics: state transition ``f(x, u, t, rng) -> x_next``.  The
            generator argument drives any stochasticity; deterministic
            plants ignore it.
        running_cost: ``g_t(x, u, t) -> cost``, nonnegative or ``inf``.
        terminal_cost: ``g_T(x) -> cost``, nonnegative or ``inf``.
        constraint: one constraint for all steps, a per-step sequence,
            or ``None`` for unconstrained controls.
        horizon: number of steps T (``None`` = open-ended; a rollout
            then takes its length from the control sequence).
        smooth: ``False`` when the costs embed indicator terms; the
            gradient-based solver refuses such problems.
    """

    dynamics: Dynamics
    running_cost: RunningCost
    terminal_cost: TerminalCost
    constraint: Constraint | Sequence[Constraint] | None = None
    horizon: int | None = None
    smooth: bool = True

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("finite horizon must be >= 1")

    def constraint_at(self, t: int) -> Constraint:
        if self.constraint is None:
            return UNCONSTRAINED
        if isinstance(self.constraint, Constraint):
            return self.constraint
        return self.constraint[t]


@dataclass
class Trajectory:
    """A realized rollout: states x_0..x_T, controls u_0..u_{T-1}, costs."""

    states: list
    controls: list
    step_costs: np.ndarray
    terminal_cost: float

    @property
    def total_cost(self) -> float:
        return float(self.terminal_cost + self.step_costs.sum())

    def __len__(self) -> int:
        return len(self.controls)


def _check_cost(value: float, what: str, step: int | None = None) -> float:
    value = float(value)
    if not value >= 0.0:  # also catches NaN
        where = f" at step {step}" if step is not None else ""
        raise ValueError(f"{what}{where} must be nonnegative or inf, got {value}")
    return value


def rollout(
    problem: ControlProblem,
    controls: Sequence[Control],
    x0: State,
    seed: int = 0,
    check_constraints: bool = True,
) -> Trajectory:
    """Simulate the plant under an open-loop control sequence.

    Deterministic given ``(controls, x0, seed)``: stochastic dynamics
    draw exclusively from a generator seeded here.  Controls must
    already lie inside their constraint sets (project first);
    ``check_constraints=False`` skips the membership test, which
    solvers use for finite-difference probes near a boundary.

    Raises:
        ConstraintViolation: a control is outside its step's set.
        ValueError: control count does not match the horizon, or a cost
            evaluates negative/NaN.
    """
    T = problem.horizon if problem.horizon is not None else len(controls)
    if len(controls) != T:
        raise ValueError(f"expected {T} controls, got {len(controls)}")
    rng = np.random.default_rng(seed)
    states = [x0]
    step_costs = np.empty(T, dtype=float)
    x = x0
    for t, u in enumerate(controls):
        if check_constraints and not problem.constraint_at(t).contains(u):
            raise ConstraintViolation(
                f"control at step {t} violates its constraint set", step=t
            )
        step_costs[t] = _check_cost(problem.running_cost(x, u, t), "running cost", t)
        x = problem.dynamics(x, u, t, rng)
        states.append(x)
    g_T = _check_cost(problem.terminal_cost(x), "terminal cost")
    return Trajectory(states=states, controls=list(controls), step_costs=step_costs,
                      terminal_cost=g_T)


def objective(trajectory: Trajectory) -> float:
    """Total cost g_T(x_T) + sum_t g_t(x_t, u_t) of a completed rollout."""
    return float(trajectory.terminal_cost + trajectory.step_costs.sum())

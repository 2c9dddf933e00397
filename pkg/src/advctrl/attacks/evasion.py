"""Test-time attack: minimally perturb an item so its prediction flips.

For a linear model the minimal p-norm perturbation has a closed form
(hyperplane geometry); with a pixel-style box the problem is the
Euclidean projection onto halfspace-intersect-box (p = 2) or a small
linear program (p = 1, inf).  The one-step control formulation keeps
the flip requirement inside the control constraint set, which leaves
the costs smooth for the generic solvers.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from ..control import (
    Box,
    ControlProblem,
    HalfSpace,
    InfeasibleError,
    Intersection,
)
from ..learners import LinearModel

__all__ = [
    "minimal_flip_perturbation",
    "testtime_attack",
    "evasion_control_problem",
    "perturbation_norm",
]


def perturbation_norm(delta: np.ndarray, p: float = 2.0) -> float:
    return float(np.linalg.norm(np.atleast_1d(delta), ord=np.inf if p == float("inf") else p))


def _crossing_rhs(model: LinearModel, x: np.ndarray, tau: float) -> tuple[int, float]:
    """Sign of the current side and the required w . delta to land at -s*tau."""
    c = model.decision(x)
    s = 1 if c >= 0.0 else -1  # matches sign(0) = +1 prediction rule
    return s, -(c + s * tau)


def _closed_form_delta(w: np.ndarray, rhs: float, p: float) -> np.ndarray:
    """Minimal p-norm delta with w . delta = rhs."""
    if p == 2.0:
        return rhs / float(w @ w) * w
    if p == float("inf"):
        return rhs / float(np.abs(w).sum()) * np.sign(w)
    # p = 1: spend the whole budget on the most effective coordinate
    j = int(np.argmax(np.abs(w)))
    delta = np.zeros_like(w)
    delta[j] = rhs / w[j]
    return delta


def _boxed_lp_delta(w: np.ndarray, rhs: float, lo: np.ndarray, hi: np.ndarray,
                    p: float) -> np.ndarray:
    """Minimal p-norm delta with w . delta = rhs and lo <= delta <= hi."""
    d = w.shape[0]
    if p == float("inf"):
        # variables (delta, t): minimize t with |delta_i| <= t
        c = np.zeros(d + 1)
        c[-1] = 1.0
        A_ub = np.zeros((2 * d, d + 1))
        A_ub[:d, :d] = np.eye(d)
        A_ub[:d, -1] = -1.0
        A_ub[d:, :d] = -np.eye(d)
        A_ub[d:, -1] = -1.0
        b_ub = np.zeros(2 * d)
        A_eq = np.zeros((1, d + 1))
        A_eq[0, :d] = w
        bounds = [(lo[i], hi[i]) for i in range(d)] + [(0.0, None)]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[rhs],
                      bounds=bounds, method="highs")
        if not res.success:
            raise InfeasibleError("box renders the flip infeasible")
        return res.x[:d]
    # p = 1: split delta into positive/negative parts
    c = np.ones(2 * d)
    A_eq = np.hstack([w, -w]).reshape(1, -1)
    A_ub = np.vstack([
        np.hstack([np.eye(d), -np.eye(d)]),      # delta <= hi
        np.hstack([-np.eye(d), np.eye(d)]),      # -delta <= -lo
    ])
    b_ub = np.concatenate([hi, -lo])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[rhs],
                  bounds=[(0.0, None)] * (2 * d), method="highs")
    if not res.success:
        raise InfeasibleError("box renders the flip infeasible")
    return res.x[:d] - res.x[d:]


def minimal_flip_perturbation(
    model: LinearModel,
    x,
    p: float = 2.0,
    box: Box | None = None,
    tau: float = 1e-6,
) -> np.ndarray:
    """Smallest p-norm perturbation that pushes the decision value to the
    opposite side of the boundary by margin ``tau``.

    Raises:
        ValueError: zero weight vector (no boundary to cross) or tau <= 0.
        InfeasibleError: the box leaves no feasible flipped point.
    """
    if tau <= 0:
        raise ValueError("crossing margin tau must be positive")
    w = model.weights
    if not np.any(w != 0.0):
        raise ValueError("model has a zero weight vector: no decision boundary")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != model.dim:
        raise ValueError(f"item dimension {x.shape[0]} != model dimension {model.dim}")
    s, rhs = _crossing_rhs(model, x, tau)

    if box is None:
        return _closed_form_delta(w, rhs, float(p))

    lo = np.broadcast_to(box.lower, x.shape).astype(float)
    hi = np.broadcast_to(box.upper, x.shape).astype(float)
    if not box.contains(x):
        raise ValueError("the clean item must itself satisfy the box constraint")
    # feasibility: the most adversarial corner must cross by tau
    reachable = float(s * model.bias + np.minimum(s * w * lo, s * w * hi).sum())
    if reachable > -tau:
        raise InfeasibleError("box renders the flip infeasible")
    if p == 2.0:
        # project x onto {x' : s (w . x' + b) <= -tau} intersected with the box
        feasible = Intersection((HalfSpace(s * w, -tau - s * model.bias), Box(lo, hi)))
        x_adv = feasible.project(x)
        return x_adv - x
    return _boxed_lp_delta(w, rhs, lo - x, hi - x, float(p))


def testtime_attack(
    model: LinearModel,
    x,
    p: float = 2.0,
    box: Box | None = None,
    tau: float = 1e-2,
) -> np.ndarray:
    """Return x' with a flipped prediction at minimal p-norm distance.

    The returned point crosses the boundary by decision margin ``tau``
    and respects the box when one is given.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    delta = minimal_flip_perturbation(model, x, p=p, box=box, tau=tau)
    x_adv = x + delta
    if model.predict(x_adv) == model.predict(x):
        raise InfeasibleError("no flipped point found at the requested margin",
                              candidate=x_adv)
    return x_adv


def evasion_control_problem(
    model: LinearModel,
    x,
    tau: float = 1e-2,
    box: Box | None = None,
) -> ControlProblem:
    """The evasion attack as a one-step control problem over pixel changes.

    The state is the item, the dynamics are plain addition
    ``x_1 = x_0 + u``, the running cost is the squared Euclidean change,
    and the "must flip" requirement lives in the control constraint set
    (a halfspace, intersected with the box when present) so the costs
    stay smooth.  Minimizers coincide with the Euclidean closed form.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = model.weights
    if not np.any(w != 0.0):
        raise ValueError("model has a zero weight vector: no decision boundary")
    s, rhs = _crossing_rhs(model, x, tau)
    # flip requirement on u: s (w . (x + u) + b) <= -tau, i.e. (s w) . u <= s * rhs
    flip_set = HalfSpace(s * w, s * rhs)
    if box is not None:
        lo = np.broadcast_to(box.lower, x.shape).astype(float) - x
        hi = np.broadcast_to(box.upper, x.shape).astype(float) - x
        constraint = Intersection((flip_set, Box(lo, hi)))
    else:
        constraint = flip_set
    return ControlProblem(
        dynamics=lambda state, u, t, rng: state + u,
        running_cost=lambda state, u, t: float(u @ u),
        terminal_cost=lambda state: 0.0,
        constraint=constraint,
        horizon=1,
        smooth=True,
    )

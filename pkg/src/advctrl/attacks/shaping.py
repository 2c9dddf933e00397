"""Adversarial reward shaping against a UCB bandit learner.

The adversary intercepts each environmental reward r and delivers
r + u to the learner, paying u^2 per round plus a penalty whenever the
learner pulled the wrong arm.  The greedy feedback policy implemented
here shapes just enough, whenever a non-target arm was pulled, to push
that arm's next-round UCB index a gap delta below the target arm's --
a receding-horizon heuristic, not the optimum of the full stochastic
control problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..bandit import (
    BanditEnv,
    BanditState,
    UcbConfig,
    bandit_transition,
    pseudo_regret,
    simulate,
)
from ..control import ControlProblem, indicator
from ..csvio import write_csv
from .goals import AttackGoal

__all__ = [
    "shaping_step_cost",
    "greedy_shaping_step",
    "ShapingRun",
    "shape_rewards",
    "shaping_control_problem",
]


def shaping_step_cost(u: float, pulled: int, goal: AttackGoal) -> float:
    """Per-round cost u^2 + tradeoff * [pulled != target arm]."""
    return u * u + indicator(pulled != goal.target_arm, goal.tradeoff)


def greedy_shaping_step(
    state: BanditState,
    pulled: int,
    r: float,
    goal: AttackGoal,
    delta: float,
    config: UcbConfig,
) -> float:
    """Minimal-magnitude perturbation forcing the pulled arm's next UCB
    index at least ``delta`` below the target arm's.

    The mean update is linear in the delivered reward, so the bound
    solves in closed form.  Returns 0 when the target arm was pulled,
    when the condition already holds at u = 0, or while the target arm
    is still uninitialized (its index is undefined before its first
    pull).
    """
    if goal.kind != "target-arm":
        raise ValueError("reward shaping expects a target-arm goal")
    if delta <= 0:
        raise ValueError("index gap delta must be positive")
    if state.current_arm is not None and pulled != state.current_arm:
        raise ValueError("pulled arm does not match the state's current arm")
    target = goal.target_arm
    if pulled == target:
        return 0.0
    if state.counts[target] == 0:
        return 0.0
    log_next = config.alpha * math.log(state.t + 1)
    target_index = state.means[target] + float(
        config.width_inverse(log_next / state.counts[target])
    )
    count = int(state.counts[pulled])
    width_after = float(config.width_inverse(log_next / (count + 1)))
    # post-update mean must not exceed this value
    mean_cap = target_index - delta - width_after
    u_bound = mean_cap * (count + 1) - state.means[pulled] * count - r
    return 0.0 if u_bound >= 0.0 else float(u_bound)


@dataclass
class ShapingRun:
    """Per-round record of a shaped (or plain) bandit run."""

    arms: np.ndarray        # I_t (0-based)
    rewards: np.ndarray     # environmental reward r_t
    shaping: np.ndarray     # perturbation u_t
    step_costs: np.ndarray  # u_t^2 + tradeoff * [I_t != target]
    target_arm: int
    tradeoff: float
    pseudo_regret: float

    def __len__(self) -> int:
        return self.arms.shape[0]

    @property
    def total_cost(self) -> float:
        return float(self.step_costs.sum())

    @property
    def total_shaping_cost(self) -> float:
        return float((self.shaping ** 2).sum())

    @property
    def target_fraction(self) -> float:
        return float((self.arms == self.target_arm).mean()) if len(self) else 0.0

    def cumulative_costs(self) -> np.ndarray:
        return np.cumsum(self.step_costs)

    def target_fraction_so_far(self) -> np.ndarray:
        hits = np.cumsum(self.arms == self.target_arm)
        return hits / np.arange(1, len(self) + 1)

    def write_csv(self, path) -> None:
        """Columns: t, I_t, r_t, u_t, g_t, cumulative_cost, target_fraction_so_far."""
        cum = self.cumulative_costs()
        frac = self.target_fraction_so_far()
        rows = (
            (t + 1, int(self.arms[t]), self.rewards[t], self.shaping[t],
             self.step_costs[t], cum[t], frac[t])
            for t in range(len(self))
        )
        write_csv(path, ["t", "I_t", "r_t", "u_t", "g_t",
                         "cumulative_cost", "target_fraction_so_far"], rows)


def shape_rewards(
    env: BanditEnv,
    goal: AttackGoal,
    config: UcbConfig,
    T: int,
    delta: float = 0.01,
    seed: int = 0,
    enabled: bool = True,
) -> ShapingRun:
    """Simulate T rounds of UCB under the greedy shaping policy.

    With ``enabled=False`` the adversary stays idle (u = 0 every round),
    giving the plain-UCB baseline on the identical reward stream.
    Deterministic given the seed.
    """
    if goal.kind != "target-arm":
        raise ValueError("reward shaping expects a target-arm goal")
    if not 0 <= goal.target_arm < env.k:
        raise ValueError(f"target arm {goal.target_arm} out of range for k={env.k}")
    if T < env.k:
        raise ValueError("horizon must cover at least one pull per arm")

    shaper = None
    if enabled:
        def shaper(state, arm, r):
            return greedy_shaping_step(state, arm, r, goal, delta, config)

    run = simulate(env, config, T, seed, shaper=shaper)
    miss = (run.arms != goal.target_arm).astype(float)
    step_costs = run.shaping ** 2 + goal.tradeoff * miss
    return ShapingRun(
        arms=run.arms,
        rewards=run.rewards,
        shaping=run.shaping,
        step_costs=step_costs,
        target_arm=goal.target_arm,
        tradeoff=goal.tradeoff,
        pseudo_regret=pseudo_regret(run.arms, env),
    )


def shaping_control_problem(
    env: BanditEnv,
    goal: AttackGoal,
    config: UcbConfig,
    T: int | None = None,
) -> ControlProblem:
    """Reward shaping as a stochastic control problem.

    States are bandit sufficient-statistic tuples, controls are scalar
    reward perturbations, and each dynamics step samples the pulled
    arm's reward from the generator the rollout seeds.  Open-loop
    control sequences can be rolled out directly; the greedy policy
    above is the feedback alternative.
    """
    if goal.kind != "target-arm":
        raise ValueError("reward shaping expects a target-arm goal")
    return ControlProblem(
        dynamics=lambda s, u, t, rng: bandit_transition(s, float(np.ravel(u)[0]), rng, env, config),
        running_cost=lambda s, u, t: shaping_step_cost(float(np.ravel(u)[0]), s.current_arm, goal),
        terminal_cost=lambda s: 0.0,
        horizon=T,
        smooth=False,
    )

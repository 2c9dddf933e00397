"""Stochastic multi-armed bandit plant.

The learner keeps per-arm pull counts and empirical means, selects arms
by an upper-confidence-bound rule (empirical mean plus a confidence
width), and folds each observed reward into the pulled arm's running
mean.  The sufficient-statistic tuple (counts, means, current arm) is
the control state; an adversary that perturbs rewards steers it.

Arm indices are 0-based everywhere (code, configs, CSV output).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Bernoulli",
    "Gaussian",
    "BanditEnv",
    "BanditState",
    "UcbConfig",
    "arm_from_spec",
    "ucb_select_arm",
    "ucb_indices",
    "mean_update",
    "pseudo_regret",
    "bandit_transition",
    "initial_state",
    "simulate",
    "BanditRun",
]


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("Bernoulli parameter must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return self.p

    def sample(self, rng: np.random.Generator) -> float:
        return 1.0 if rng.random() < self.p else 0.0


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("standard deviation must be nonnegative")

    @property
    def mean(self) -> float:
        return self.mu

    def sample(self, rng: np.random.Generator) -> float:
        return self.mu + self.sigma * rng.standard_normal()


def arm_from_spec(spec: str):
    """Parse ``bernoulli:p`` or ``gaussian:mu,sigma``."""
    kind, _, args = spec.strip().partition(":")
    try:
        if kind == "bernoulli":
            return Bernoulli(float(args))
        if kind == "gaussian":
            mu, sigma = (float(v) for v in args.split(","))
            return Gaussian(mu, sigma)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"malformed arm spec {spec!r}") from exc
    raise ValueError(f"unknown arm kind {kind!r} (want bernoulli or gaussian)")


@dataclass
class BanditEnv:
    """k reward distributions; rewards are sampled on each pull."""

    arms: list

    def __post_init__(self):
        self.arms = list(self.arms)
        if not self.arms:
            raise ValueError("environment needs at least one arm")

    @property
    def k(self) -> int:
        return len(self.arms)

    def means(self) -> np.ndarray:
        return np.array([a.mean for a in self.arms], dtype=float)

    def sample(self, arm: int, rng: np.random.Generator) -> float:
        return self.arms[arm].sample(rng)


@dataclass
class BanditState:
    """Sufficient statistics after t-1 completed rounds plus the arm
    chosen for round t."""

    counts: np.ndarray
    means: np.ndarray
    current_arm: int | None
    t: int  # 1-based round counter

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int).copy()
        self.means = np.asarray(self.means, dtype=float).copy()

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    def copy(self) -> "BanditState":
        return BanditState(self.counts, self.means, self.current_arm, self.t)


def _default_width_inverse(y):
    # inverse conjugate of psi(l) = l^2 / 8, the bounded-reward case
    return np.sqrt(y / 2.0)


@dataclass
class UcbConfig:
    """UCB exploration parameters: scale alpha and confidence-width map."""

    alpha: float = 2.0
    width_inverse: Callable = _default_width_inverse

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def ucb_indices(state: BanditState, config: UcbConfig) -> np.ndarray:
    """Per-arm index: empirical mean + width_inverse(alpha log t / count).

    Only defined once every arm has been pulled at least once.
    """
    widths = config.width_inverse(config.alpha * math.log(state.t) / state.counts)
    return state.means + widths


def ucb_select_arm(state: BanditState, config: UcbConfig) -> int:
    """Arm choice: first unpulled arm if any, else argmax of the UCB
    index with ties to the lowest arm."""
    if state.k == 0:
        raise ValueError("no arms to select from")
    unpulled = np.flatnonzero(state.counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    return int(np.argmax(ucb_indices(state, config)))


def mean_update(mean: float, count: int, r: float) -> tuple[float, int]:
    """Fold one reward into a running mean: ((mean*count + r)/(count+1), count+1)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return (mean * count + r) / (count + 1), count + 1


def pseudo_regret(pull_history, env: BanditEnv) -> float:
    """T * mu_max - sum_t mu_{I_t}, evaluated on the realized pulls."""
    mu = env.means()
    pulls = np.asarray(pull_history, dtype=int)
    if pulls.size and (pulls.min() < 0 or pulls.max() >= env.k):
        raise ValueError("pull history contains an out-of-range arm index")
    return float(pulls.size * mu.max() - mu[pulls].sum())


# ----------------------------------------------------------------------
# Dynamics and simulation
# ----------------------------------------------------------------------


def initial_state(k: int, config: UcbConfig) -> BanditState:
    """State at round 1: empty statistics, first arm already chosen."""
    state = BanditState(np.zeros(k, dtype=int), np.zeros(k), None, 1)
    state.current_arm = ucb_select_arm(state, config)
    return state


def bandit_transition(
    state: BanditState,
    u: float,
    rng: np.random.Generator,
    env: BanditEnv,
    config: UcbConfig,
) -> BanditState:
    """One round: sample the chosen arm's reward, add the perturbation u,
    update statistics, advance the clock, select the next arm.

    Usable directly as control-problem dynamics via a closure over
    (env, config).
    """
    arm = state.current_arm
    r = env.sample(arm, rng)
    new = state.copy()
    m, c = mean_update(state.means[arm], int(state.counts[arm]), r + float(u))
    new.means[arm] = m
    new.counts[arm] = c
    new.t = state.t + 1
    new.current_arm = ucb_select_arm(new, config)
    return new


@dataclass
class BanditRun:
    """Per-round log of a simulated bandit."""

    arms: np.ndarray      # I_t, 0-based
    rewards: np.ndarray   # environmental reward r_t (before shaping)
    shaping: np.ndarray   # adversarial perturbation u_t

    def pull_counts(self, k: int) -> np.ndarray:
        return np.bincount(self.arms, minlength=k)


def simulate(
    env: BanditEnv,
    config: UcbConfig,
    T: int,
    seed: int,
    shaper: Callable | None = None,
) -> BanditRun:
    """Run T rounds of the UCB learner, optionally with an adversary.

    ``shaper(state, arm, reward) -> u`` intercepts each reward before
    the learner sees ``reward + u``.  Reproducible bit-for-bit given the
    seed: the only randomness is the environment's reward stream.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    rng = np.random.default_rng(seed)
    state = initial_state(env.k, config)
    arms = np.empty(T, dtype=int)
    rewards = np.empty(T)
    shaping = np.zeros(T)
    for i in range(T):
        arm = state.current_arm
        r = env.sample(arm, rng)
        u = float(shaper(state, arm, r)) if shaper is not None else 0.0
        arms[i] = arm
        rewards[i] = r
        shaping[i] = u
        m, c = mean_update(state.means[arm], int(state.counts[arm]), r + u)
        state.means[arm] = m
        state.counts[arm] = c
        state.t += 1
        state.current_arm = ucb_select_arm(state, config)
    return BanditRun(arms=arms, rewards=rewards, shaping=shaping)

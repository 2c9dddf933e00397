"""Acceptance suite: oracle- and property-based checks with runtime budgets.

Each criterion re-derives its expected values through an independent
route (exhaustive enumeration, grid search, finite differences, direct
index evaluation) and compares against the library's primary path at a
fixed tolerance.  ``run_acceptance`` prints one pass/fail line per
criterion; the pytest wrapper asserts on the same results.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import bandit as bd
from .attacks import (
    AttackGoal,
    CleanReference,
    FeaturePerturbSurface,
    LabelFlipSurface,
    batch_poison,
    batch_poison_problem,
    evasion_control_problem,
    greedy_shaping_step,
    sequential_poison,
    shape_rewards,
    testtime_attack,
)
from .control import rollout
from .defense import DefenseConfig, adversarial_training, margin_violation_rate
from .learners import (
    Dataset,
    LabeledExample,
    LinearModel,
    LearnerConfig,
    batch_svm_train,
    erm_objective,
    hinge_gradient,
    hinge_loss,
    logistic_gradient,
    logistic_loss,
    sgd_step,
    two_cluster_dataset,
)
from .solvers import grid_search, projected_gradient

__all__ = ["CriterionResult", "CRITERIA", "run_acceptance"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] criterion {self.number}: {self.name} -- {self.detail} "
                f"(runtime {self.runtime:.2f}s, budget {self.budget:.0f}s)")


# ----------------------------------------------------------------------
# 1. Oracle equivalence, evasion
# ----------------------------------------------------------------------


def _criterion_evasion_oracles() -> tuple[bool, str]:
    tau = 0.01
    worst_pg = 0.0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        w = rng.normal(size=5)
        while np.linalg.norm(w) < 0.3:
            w = rng.normal(size=5)
        model = LinearModel(w, 0.5 * rng.normal())
        x = rng.normal(size=5)
        x_adv = testtime_attack(model, x, p=2.0, tau=tau)
        closed = float(np.linalg.norm(x_adv - x))

        problem = evasion_control_problem(model, x, tau=tau)
        report = projected_gradient(problem, [np.zeros(5)], x0=x, steps=400,
                                    step_size=0.25, tol=1e-12)
        pg = float(np.linalg.norm(report.best_controls[0]))
        worst_pg = max(worst_pg, abs(closed - pg))
    if worst_pg > 1e-4:
        return False, f"closed form vs projected gradient differ by {worst_pg:.2e} > 1e-4"

    worst_grid = 0.0
    for i in range(20):
        rng = np.random.default_rng(2000 + i)
        w = np.array([rng.normal()])
        while abs(w[0]) < 0.3:
            w = np.array([rng.normal()])
        model = LinearModel(w, 0.3 * rng.normal())
        x = np.array([rng.normal()])
        x_adv = testtime_attack(model, x, p=2.0, tau=tau)
        closed = float(np.linalg.norm(x_adv - x))

        problem = evasion_control_problem(model, x, tau=tau)
        # grid marches from the crossing point into the feasible halfspace
        c = model.decision(x)
        s = 1.0 if c >= 0 else -1.0
        u_star = -(c + s * tau) / w[0]
        direction = -np.sign(s * w[0])
        grid = u_star + direction * np.arange(0.0, 2.0, 1e-3)
        report = grid_search(problem, [grid], x0=x)
        grid_dist = float(abs(report.best_controls[0][0]))
        worst_grid = max(worst_grid, abs(closed - grid_dist))
    if worst_grid > 1e-3:
        return False, f"closed form vs 1-D grid differ by {worst_grid:.2e} > 1e-3"
    return True, (f"max |closed-pg| = {worst_pg:.1e} <= 1e-4, "
                  f"max |closed-grid| = {worst_grid:.1e} <= 1e-3")


# ----------------------------------------------------------------------
# 2. Oracle equivalence, poisoning
# ----------------------------------------------------------------------


def _flip_instance(i: int):
    rng = np.random.default_rng(3000 + i)
    X = rng.uniform(-2.0, 2.0, size=(3, 1))
    y = rng.choice((-1, 1), size=3)
    data = Dataset.from_arrays(X, y)
    lam = float(rng.uniform(0.05, 0.5))
    goal = AttackGoal.near_model([float(rng.uniform(-1.5, 1.5))])
    clean = CleanReference(data, distance="edit-count", effort_weight=0.25)
    return clean, goal, LearnerConfig(lam=lam)


def _criterion_poison_oracles() -> tuple[bool, str]:
    worst_flip = 0.0
    for i in range(20):
        clean, goal, learner = _flip_instance(i)
        result = batch_poison(clean, goal, learner, LabelFlipSurface())

        # independent oracle: enumerate every flip pattern and retrain
        labels = clean.reference.labels()
        X = clean.reference.features()
        best = math.inf
        for pattern in itertools.product((0, 1), repeat=len(labels)):
            flipped = np.where(np.array(pattern) == 1, -labels, labels)
            w1 = batch_svm_train(Dataset.from_arrays(X, flipped), learner.lam).weights
            obj = goal.terminal_cost(w1) + clean.effort_weight * sum(pattern)
            best = min(best, obj)
        worst_flip = max(worst_flip, abs(result.report.best_objective - best))
    if worst_flip > 1e-9:
        return False, f"label-flip objective differs from enumeration by {worst_flip:.2e}"

    worst_feature = 0.0
    for i in range(20):
        rng = np.random.default_rng(4000 + i)
        X = rng.uniform(-2.0, 2.0, size=(3, 1))
        y = rng.choice((-1, 1), size=3)
        data = Dataset.from_arrays(X, y)
        learner = LearnerConfig(lam=float(rng.uniform(0.15, 0.5)))
        goal = AttackGoal.near_model([float(rng.uniform(-1.5, 1.5))])
        clean = CleanReference(data, distance="summed-euclidean", effort_weight=0.3)
        surface = FeaturePerturbSurface(budget=1.0, p=np.inf, items=(0,))

        # the bilevel objective is nonconvex in the edit, so the gradient
        # route multi-starts across the budget box and anneals the step
        pg_obj = math.inf
        for start in (-1.0, -0.5, 0.0, 0.5, 1.0):
            result = None
            for steps, step_size in ((150, 0.2), (100, 0.02), (100, 2e-3), (100, 2e-4)):
                init = result.report.best_controls if result is not None else [np.array([start])]
                result = batch_poison(clean, goal, learner, surface,
                                      solver="projected-gradient",
                                      solver_options={"steps": steps,
                                                      "step_size": step_size,
                                                      "init": init})
            pg_obj = min(pg_obj, result.report.best_objective)

        grid = batch_poison(clean, goal, learner, surface, solver="grid",
                            solver_options={"grids": [np.linspace(-1.0, 1.0, 2001)]})
        worst_feature = max(worst_feature, abs(pg_obj - grid.report.best_objective))
    if worst_feature > 1e-3:
        return False, (f"feature-edit projected gradient vs grid differ by "
                       f"{worst_feature:.2e} > 1e-3")
    return True, (f"flip enumeration matched exactly (max diff {worst_flip:.1e}), "
                  f"max |pg-grid| = {worst_feature:.1e} <= 1e-3")


# ----------------------------------------------------------------------
# 3. Sequential poisoning success
# ----------------------------------------------------------------------


def _criterion_sequential_poison() -> tuple[bool, str]:
    T = 50
    w0 = LinearModel([0.0, 0.0])
    goal = AttackGoal.near_model([1.0, -1.0])
    learner = LearnerConfig(lam=0.0, eta=0.1, schedule="constant")
    clean = CleanReference(
        [LabeledExample(np.zeros(2), 1) for _ in range(T)],
        distance="summed-euclidean",
        effort_weight=0.0,
    )
    result = sequential_poison(clean, goal, learner, w0, T,
                               solver="projected-gradient",
                               solver_options={"steps": 80, "step_size": 0.3})
    result2 = sequential_poison(
        CleanReference([LabeledExample(c.features, 1) for c in result.controls],
                       distance="summed-euclidean", effort_weight=0.0),
        goal, learner, w0, T,
        solver="projected-gradient",
        solver_options={"steps": 60, "step_size": 0.03},
    )
    final = result2 if result2.report.best_objective < result.report.best_objective else result

    w_T = np.atleast_1d(final.trajectory.states[-1])
    miss = float(np.linalg.norm(w_T - np.array([1.0, -1.0])))
    recheck = abs(final.trajectory.total_cost - final.report.best_objective)
    if miss > 0.05:
        return False, f"final ||w_T - w*|| = {miss:.4f} > 0.05"
    if recheck > 1e-9:
        return False, f"re-rollout objective differs by {recheck:.2e} > 1e-9"
    return True, f"||w_T - w*|| = {miss:.4f} <= 0.05, re-rollout diff {recheck:.1e}"


# ----------------------------------------------------------------------
# 4. Reward shaping effectiveness
# ----------------------------------------------------------------------


def _oracle_min_shaping(state, r, target, delta, config) -> float:
    """Brute-force search for the minimal |u| meeting the index condition."""
    pulled = state.current_arm
    us = np.arange(-10.0, 10.0 + 1e-12, 1e-4)
    log_next = config.alpha * math.log(state.t + 1)
    count = int(state.counts[pulled])
    post_mean = (state.means[pulled] * count + r + us) / (count + 1)
    idx_pulled = post_mean + config.width_inverse(log_next / (count + 1))
    idx_target = state.means[target] + config.width_inverse(
        log_next / state.counts[target])
    ok = idx_pulled <= idx_target - delta
    if not np.any(ok):
        return math.nan
    feasible = us[ok]
    return float(feasible[np.argmin(np.abs(feasible))])


def _criterion_reward_shaping() -> tuple[bool, str]:
    env = bd.BanditEnv([bd.Bernoulli(0.8), bd.Bernoulli(0.2)])
    config = bd.UcbConfig(alpha=2.0)
    goal = AttackGoal.pull_arm(1, tradeoff=1.0)
    T, delta = 10000, 0.01

    plain_fracs, shaped_fracs = [], []
    for seed in range(5):
        plain = shape_rewards(env, goal, config, T, delta, seed, enabled=False)
        shaped = shape_rewards(env, goal, config, T, delta, seed, enabled=True)
        plain_fracs.append(plain.target_fraction)
        shaped_fracs.append(shaped.target_fraction)
    if max(plain_fracs) >= 0.2:
        return False, f"unattacked target fraction {max(plain_fracs):.3f} >= 0.2"
    if min(shaped_fracs) < 0.9:
        return False, f"shaped target fraction {min(shaped_fracs):.3f} < 0.9"

    worst = 0.0
    checked = 0
    rng = np.random.default_rng(99)
    while checked < 100:
        counts = rng.integers(1, 5, size=2)
        means = rng.uniform(0.2, 0.9, size=2)
        state = bd.BanditState(counts, means, current_arm=0,
                               t=int(counts.sum()) + 1)
        r = float(rng.uniform(0.0, 1.0))
        oracle = _oracle_min_shaping(state, r, target=1, delta=delta, config=config)
        if math.isnan(oracle):
            continue
        u = greedy_shaping_step(state, 0, r, goal, delta, config)
        worst = max(worst, abs(u - oracle))
        checked += 1
    if worst > 2e-4:
        return False, f"greedy shaping vs brute force differ by {worst:.2e} > 2e-4"
    return True, (f"plain fraction <= {max(plain_fracs):.3f}, shaped fraction >= "
                  f"{min(shaped_fracs):.3f}, max |u - oracle| = {worst:.1e}")


# ----------------------------------------------------------------------
# 5. Defense improvement
# ----------------------------------------------------------------------


def _criterion_defense() -> tuple[bool, str]:
    data = two_cluster_dataset(n_per_class=4, center=0.6, spread=0.35, seed=0)
    config = DefenseConfig(epsilon=0.5, p=2.0, iterations=10, eta=0.1)
    h0 = LinearModel([1.0, 0.0])
    rate0 = margin_violation_rate(h0, data, config.epsilon, config.p)
    h_k, trail = adversarial_training(h0, data, config)
    rate1 = margin_violation_rate(h_k, data, config.epsilon, config.p)
    if not rate1 < rate0:
        return False, f"violation rate did not decrease ({rate0:.3f} -> {rate1:.3f})"

    m = 1000
    bound = 3.0 * math.sqrt(0.25 / m)
    worst = 0.0
    for i in range(50):
        rng = np.random.default_rng(5000 + i)
        w = rng.normal(size=2)
        while np.linalg.norm(w) < 0.3:
            w = rng.normal(size=2)
        model = LinearModel(w, 0.3 * rng.normal())
        X = 1.5 * rng.standard_normal((200, 2))
        y = rng.choice((-1, 1), size=200)
        sample = Dataset.from_arrays(X, y)
        exact = margin_violation_rate(model, sample, 0.5, 2.0)
        mc = margin_violation_rate(model, sample, 0.5, 2.0, method="montecarlo",
                                   mc_samples=m, seed=6000 + i)
        worst = max(worst, abs(exact - mc))
    if worst > bound:
        return False, f"Monte-Carlo vs exact rate differ by {worst:.4f} > {bound:.4f}"
    return True, (f"violation rate {rate0:.3f} -> {rate1:.3f} over {len(trail)} steps, "
                  f"max |mc-exact| = {worst:.4f} <= {bound:.4f}")


# ----------------------------------------------------------------------
# 6. Numerical hygiene
# ----------------------------------------------------------------------


def _fd_gradient(f, w: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.empty_like(w)
    for i in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        g[i] = (f(wp) - f(wm)) / (2.0 * h)
    return g


def _criterion_numerics() -> tuple[bool, str]:
    worst_rel = 0.0
    # family 1: hinge loss away from the kink; family 2: logistic loss
    for fam, (loss, grad) in enumerate((
        (hinge_loss, hinge_gradient), (logistic_loss, logistic_gradient),
    )):
        produced = 0
        trial = 0
        while produced < 20:
            rng = np.random.default_rng(7000 + 101 * fam + trial)
            trial += 1
            w = rng.normal(size=4)
            x = rng.normal(size=4)
            y = int(rng.choice((-1, 1)))
            if fam == 0 and abs(y * float(w @ x) - 1.0) <= 1e-3:
                continue
            produced += 1
            analytic = grad(w, x, y)
            fd = _fd_gradient(lambda v: loss(v, x, y), w)
            rel = float(np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-8))
            worst_rel = max(worst_rel, rel)
    # family 3: the sgd_step update direction vs FD of hinge + lam ||w||^2
    produced, trial = 0, 0
    while produced < 20:
        rng = np.random.default_rng(7300 + trial)
        trial += 1
        w = rng.normal(size=3)
        x = rng.normal(size=3)
        y = int(rng.choice((-1, 1)))
        lam = float(rng.uniform(0.1, 1.0))
        if abs(y * float(w @ x) - 1.0) <= 1e-3:
            continue
        produced += 1
        eta = 0.37
        stepped = sgd_step(LinearModel(w), LabeledExample(x, y), eta, lam=lam)
        analytic = (w - stepped.weights) / eta
        fd = _fd_gradient(lambda v: hinge_loss(v, x, y) + lam * float(v @ v), w)
        rel = float(np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-8))
        worst_rel = max(worst_rel, rel)
    if worst_rel > 1e-4:
        return False, f"finite-difference vs analytic gradient rel. error {worst_rel:.2e} > 1e-4"

    # bit-reproducible stochastic rollouts
    from .attacks.shaping import shaping_control_problem

    env = bd.BanditEnv([bd.Bernoulli(0.7), bd.Gaussian(0.4, 0.2)])
    config = bd.UcbConfig()
    problem = shaping_control_problem(env, AttackGoal.pull_arm(1, 0.5), config, T=50)
    x0 = bd.initial_state(env.k, config)
    controls = [np.array([0.1 * ((i % 5) - 2)]) for i in range(50)]
    t1 = rollout(problem, controls, x0, seed=7)
    t2 = rollout(problem, controls, x0, seed=7)
    same = (
        np.array_equal(t1.step_costs, t2.step_costs)
        and t1.terminal_cost == t2.terminal_cost
        and all(np.array_equal(a.means, b.means) and np.array_equal(a.counts, b.counts)
                for a, b in zip(t1.states, t2.states))
    )
    if not same:
        return False, "identical (controls, x0, seed) produced different trajectories"

    # telescoping mean updates are exact for integer rewards
    for trial in range(50):
        rng = np.random.default_rng(7600 + trial)
        rewards = rng.integers(0, 11, size=int(rng.integers(1, 13))).astype(float)
        mean, count = 0.0, 0
        for r in rewards:
            mean, count = bd.mean_update(mean, count, float(r))
        if mean != float(rewards.sum() / len(rewards)) or count != len(rewards):
            return False, f"telescoped mean {mean!r} != batch mean on {rewards}"
    return True, (f"max gradient rel. error {worst_rel:.1e} <= 1e-4, rollouts "
                  "bit-identical, telescoping exact")


# ----------------------------------------------------------------------
# 7. Regret sanity
# ----------------------------------------------------------------------


def _criterion_regret() -> tuple[bool, str]:
    env = bd.BanditEnv([bd.Bernoulli(0.8), bd.Bernoulli(0.2)])
    config = bd.UcbConfig(alpha=2.0)
    T = 10000
    worst = 0.0
    for seed in range(5):
        run = bd.simulate(env, config, T, seed)
        regret = bd.pseudo_regret(run.arms, env)
        worst = max(worst, regret)
    if worst >= 0.1 * T:
        return False, f"pseudo-regret {worst:.1f} >= {0.1 * T:.0f}"
    return True, f"max pseudo-regret over 5 seeds = {worst:.1f} < {0.1 * T:.0f}"


CRITERIA = [
    (1, "evasion oracle equivalence", _criterion_evasion_oracles, 5.0),
    (2, "poisoning oracle equivalence", _criterion_poison_oracles, 60.0),
    (3, "sequential poisoning success", _criterion_sequential_poison, 30.0),
    (4, "reward shaping effectiveness", _criterion_reward_shaping, 30.0),
    (5, "defense improvement", _criterion_defense, 10.0),
    (6, "numerical hygiene", _criterion_numerics, 60.0),
    (7, "regret sanity", _criterion_regret, 60.0),
]


def run_acceptance(only: int | None = None, quiet: bool = False) -> list:
    """Run the acceptance criteria (all, or a single one by number)."""
    results = []
    for number, name, check, budget in CRITERIA:
        if only is not None and number != only:
            continue
        start = time.perf_counter()
        try:
            passed, detail = check()
        except Exception as exc:  # a crash is a failure, not an abort
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        runtime = time.perf_counter() - start
        if passed and runtime > budget:
            passed, detail = False, f"{detail}; runtime {runtime:.1f}s over budget"
        result = CriterionResult(number, name, passed, detail, runtime, budget)
        results.append(result)
        if not quiet:
            print(result.line())
    return results


if __name__ == "__main__":
    raise SystemExit(0 if all(r.passed for r in run_acceptance()) else 1)

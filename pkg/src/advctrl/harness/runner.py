"""Experiment execution: seed fan-out, metric computation, CSV emission.

Outputs are bit-identical for identical (config, seed): nothing here
reads the clock or any unseeded randomness, and reals are written with
17 significant digits.  Each seed gets its own record CSV; the summary
CSV holds one row per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import bandit as bd
from ..attacks import (
    AttackGoal,
    CleanReference,
    FeaturePerturbSurface,
    LabelFlipSurface,
    batch_poison,
    batch_poison_problem,
    sequential_poison,
    sequential_poison_problem,
    shape_rewards,
    testtime_attack,
)
from ..attacks.evasion import perturbation_norm
from ..control import Box, InfeasibleError, rollout
from ..csvio import write_csv
from ..defense import (
    DefenseConfig,
    adversarial_training,
    margin_violation_rate,
    write_trail_csv,
)
from ..learners import (
    Dataset,
    LabeledExample,
    LearnerConfig,
    LinearModel,
    batch_svm_train,
    load_dataset,
    two_cluster_dataset,
)
from .config import ConfigError, ExperimentConfig

__all__ = ["ExperimentOutcome", "run_experiment"]

_REVERIFY_TOL = 1e-9


@dataclass
class ExperimentOutcome:
    """Paths written by a run plus per-seed statuses."""

    kind: str
    out_dir: Path
    summary_path: Path
    record_paths: list = field(default_factory=list)
    statuses: list = field(default_factory=list)

    @property
    def any_infeasible(self) -> bool:
        return any(s == "infeasible" for s in self.statuses)


def _dataset_from_config(config: ExperimentConfig) -> Dataset:
    if config.has("data.path"):
        return load_dataset(config.raw("data.path"))
    if config.has("data.inline"):
        rows = [r for r in config.raw("data.inline").split(";") if r.strip()]
        items = []
        for row in rows:
            parts = [float(v) for v in row.split(",")]
            items.append(LabeledExample(np.array(parts[1:]), int(parts[0])))
        return Dataset(items)
    generator = config.get_str("data.synthetic", choices=("two-cluster",))
    if generator is None:
        raise ConfigError("missing required field: one of data.path, data.inline, "
                          "data.synthetic", key="data.path")
    return two_cluster_dataset(
        n_per_class=config.get_int("data.n_per_class", 4),
        center=config.get_float("data.center", 0.6),
        spread=config.get_float("data.spread", 0.35),
        seed=config.get_int("data.seed", 0),
    )


def _goal_from_config(config: ExperimentConfig) -> AttackGoal:
    kind = config.get_str("goal.kind", required=True,
                          choices=("exact-model", "near-model", "target-set"))
    if kind == "target-set":
        return AttackGoal.target_set(
            config.get_vector("goal.item", required=True),
            config.get_float("goal.confidence", required=True),
        )
    target = config.get_vector("goal.target", required=True)
    if kind == "exact-model":
        return AttackGoal.exact_model(target, atol=config.get_float("goal.atol", 0.0))
    return AttackGoal.near_model(target, norm=config.get_norm("goal.norm"))


def _learner_from_config(config: ExperimentConfig) -> LearnerConfig:
    return LearnerConfig(
        lam=config.get_float("learner.lambda", 0.0),
        eta=config.get_float("learner.eta", 0.1),
        schedule=config.get_str("learner.schedule", "constant",
                                choices=("constant", "inverse")),
        loss=config.get_str("learner.loss", "hinge", choices=("hinge", "logistic")),
    )


def _solver_options(config: ExperimentConfig) -> tuple[str, dict]:
    method = config.get_str("solver.method", "auto",
                            choices=("auto", "projected-gradient", "cross-entropy", "grid"))
    options: dict = {}
    for key, getter in (
        ("steps", config.get_int), ("population", config.get_int),
        ("iterations", config.get_int),
        ("step_size", config.get_float), ("fd_step", config.get_float),
        ("elite_frac", config.get_float), ("init_std", config.get_float),
    ):
        value = getter(f"solver.{key}")
        if value is not None:
            options[key] = value
    return method, options


def _clean_reference(config: ExperimentConfig, reference, default_distance) -> CleanReference:
    return CleanReference(
        reference,
        distance=config.get_str("clean.distance", default_distance),
        effort_weight=config.get_float("clean.weight", 1.0),
    )


# ----------------------------------------------------------------------
# Per-kind runners: each returns (record_header, record_rows, summary, status)
# ----------------------------------------------------------------------


def _run_poison_batch(config: ExperimentConfig, seed: int):
    data = _dataset_from_config(config)
    goal = _goal_from_config(config)
    learner = _learner_from_config(config)
    surface_kind = config.get_str("surface.kind", required=True,
                                  choices=("label-flip", "feature-perturb"))
    if surface_kind == "label-flip":
        surface = LabelFlipSurface(max_flips=config.get_int("surface.max_flips"))
        clean = _clean_reference(config, data, "edit-count")
    else:
        items = config.get_ints("surface.items")
        surface = FeaturePerturbSurface(
            budget=config.get_float("surface.budget", required=True),
            p=config.get_norm("surface.p", np.inf),
            items=tuple(items) if items is not None else None,
        )
        clean = _clean_reference(config, data, "summed-euclidean")
    method, options = _solver_options(config)
    options["seed"] = seed
    result = batch_poison(clean, goal, learner, surface, solver=method,
                          solver_options=options)

    check = rollout(batch_poison_problem(clean, goal, learner), [result.dataset], None)
    reported = result.report.best_objective
    if math.isfinite(reported) and abs(check.total_cost - reported) > _REVERIFY_TOL:
        raise RuntimeError("reported objective failed the re-rollout check")

    d = data.dim
    header = (["item", "y_clean", "y_poisoned"]
              + [f"x_{j}_clean" for j in range(d)] + [f"x_{j}_poisoned" for j in range(d)])
    rows = [
        [i, data[i].label, result.dataset[i].label, *data[i].features,
         *result.dataset[i].features]
        for i in range(len(data))
    ]
    traj = result.trajectory
    summary = {
        "status": result.report.status,
        "objective": traj.total_cost,
        "running_cost": float(traj.step_costs.sum()),
        "terminal_cost": traj.terminal_cost,
        "success": int(result.feasible),
        "evaluations": result.report.evaluations,
    }
    return header, rows, summary, result.report.status


def _clean_sequence(config: ExperimentConfig, T: int, dim: int) -> list:
    source = config.get_str("clean.source", "zeros", choices=("zeros", "path"))
    if source == "path":
        data = load_dataset(config.raw("clean.path", required=True))
        if len(data) != T:
            raise ConfigError(f"clean.path: need exactly {T} rows, got {len(data)}",
                              key="clean.path")
        return list(data)
    label = config.get_int("clean.label", 1)
    return [LabeledExample(np.zeros(dim), label) for _ in range(T)]


def _run_poison_seq(config: ExperimentConfig, seed: int):
    w0 = LinearModel(config.get_vector("init.weights", required=True))
    T = config.get_int("run.horizon", required=True)
    goal = _goal_from_config(config)
    learner = _learner_from_config(config)
    clean = _clean_reference(config, _clean_sequence(config, T, w0.dim),
                             "summed-euclidean")
    method, options = _solver_options(config)
    if method == "auto":
        method = "projected-gradient"
    options["seed"] = seed
    result = sequential_poison(clean, goal, learner, w0, T, solver=method,
                               solver_options=options)

    labels = [it.label for it in result.controls]
    problem = sequential_poison_problem(clean, goal, learner, labels, T)
    check = rollout(problem, [it.features for it in result.controls], w0.weights)
    reported = result.report.best_objective
    if math.isfinite(reported) and abs(check.total_cost - reported) > _REVERIFY_TOL:
        raise RuntimeError("reported objective failed the re-rollout check")

    d = w0.dim
    header = (["t", "y"] + [f"x_{j}" for j in range(d)] + ["g_t"]
              + [f"w_{j}_after" for j in range(d)])
    traj = result.trajectory
    rows = [
        [t, result.controls[t].label, *result.controls[t].features,
         traj.step_costs[t], *np.atleast_1d(traj.states[t + 1])]
        for t in range(T)
    ]
    final_w = np.atleast_1d(traj.states[-1])
    summary = {
        "status": result.report.status,
        "objective": traj.total_cost,
        "running_cost": float(traj.step_costs.sum()),
        "terminal_cost": traj.terminal_cost,
        "success": int(result.feasible),
        "final_distance": (float(np.linalg.norm(final_w - goal.target_model))
                           if goal.target_model is not None else float("nan")),
    }
    return header, rows, summary, result.report.status


def _run_evade(config: ExperimentConfig, seed: int):
    model = LinearModel(config.get_vector("model.weights", required=True),
                        config.get_float("model.bias", 0.0))
    x = config.get_vector("item.features", required=True)
    p = config.get_norm("attack.p")
    tau = config.get_float("attack.tau", 0.01)
    box = None
    if config.has("box.lower") or config.has("box.upper"):
        box = Box(config.get_vector("box.lower", required=True),
                  config.get_vector("box.upper", required=True))
    status = "converged"
    try:
        x_adv = testtime_attack(model, x, p=p, box=box, tau=tau)
    except InfeasibleError:
        status = "infeasible"
        x_adv = x.copy()
    distance = perturbation_norm(x_adv - x, p)
    header = (["status", "distance", "decision_before", "decision_after"]
              + [f"x_{j}" for j in range(x.size)] + [f"xadv_{j}" for j in range(x.size)])
    rows = [[status, distance, model.decision(x), model.decision(x_adv), *x, *x_adv]]
    summary = {
        "status": status,
        "objective": distance,
        "success": int(status != "infeasible"
                       and model.predict(x_adv) != model.predict(x)),
    }
    return header, rows, summary, status


def _run_defend(config: ExperimentConfig, seed: int):
    data = _dataset_from_config(config)
    defense = DefenseConfig(
        epsilon=config.get_float("defense.epsilon", required=True),
        p=config.get_norm("defense.p"),
        iterations=config.get_int("defense.iterations", 10),
        eta=config.get_float("defense.eta", 0.1),
        mc_samples=config.get_int("defense.mc_samples", 1000),
        seed=seed,
    )
    init = config.get_str("init.source", "train", choices=("train", "weights"))
    if init == "train":
        h0 = batch_svm_train(data, config.get_float("init.lambda", 0.1))
    else:
        h0 = LinearModel(config.get_vector("init.weights", required=True))
    rate0 = margin_violation_rate(h0, data, defense.epsilon, defense.p)
    model, trail = adversarial_training(h0, data, defense)
    rate1 = margin_violation_rate(model, data, defense.epsilon, defense.p)
    rate1_mc = margin_violation_rate(model, data, defense.epsilon, defense.p,
                                     method="montecarlo",
                                     mc_samples=defense.mc_samples, seed=seed)

    d = data.dim
    header = ["iteration"] + [f"x_{j}" for j in range(d)] + ["y", "violation_rate_after"]
    rows = [[e.iteration, *e.features, e.label, e.violation_rate_after] for e in trail]
    summary = {
        "status": "converged" if len(trail) < defense.iterations else "iteration-capped",
        "violation_rate_initial": rate0,
        "violation_rate_final": rate1,
        "violation_rate_final_mc": rate1_mc,
        "steps_executed": len(trail),
        "running_cost_total": float(len(trail)),
    }
    return header, rows, summary, summary["status"]


def _run_shape_rewards(config: ExperimentConfig, seed: int):
    specs = [s for s in config.raw("bandit.arms", required=True).split(";") if s.strip()]
    try:
        env = bd.BanditEnv([bd.arm_from_spec(s) for s in specs])
    except ValueError as exc:
        raise ConfigError(f"bandit.arms: {exc}", key="bandit.arms") from exc
    ucb = bd.UcbConfig(alpha=config.get_float("bandit.alpha", 2.0))
    target = config.get_int("attack.target_arm", required=True)
    if not 0 <= target < env.k:
        raise ConfigError(f"attack.target_arm: arm {target} out of range for "
                          f"k={env.k} (0-based)", key="attack.target_arm")
    goal = AttackGoal.pull_arm(target, tradeoff=config.get_float("attack.lambda",
                                                                 required=True))
    run = shape_rewards(
        env, goal, ucb,
        T=config.get_int("run.horizon", required=True),
        delta=config.get_float("attack.delta", 0.01),
        seed=seed,
        enabled=config.get_bool("attack.enabled", True),
    )
    cum = run.cumulative_costs()
    frac = run.target_fraction_so_far()
    header = ["t", "I_t", "r_t", "u_t", "g_t", "cumulative_cost",
              "target_fraction_so_far"]
    rows = [
        [t + 1, int(run.arms[t]), run.rewards[t], run.shaping[t], run.step_costs[t],
         cum[t], frac[t]]
        for t in range(len(run))
    ]
    summary = {
        "status": "converged",
        "objective": run.total_cost,
        "target_fraction": run.target_fraction,
        "shaping_cost": run.total_shaping_cost,
        "pseudo_regret": run.pseudo_regret,
    }
    return header, rows, summary, "converged"


_RUNNERS = {
    "poison-batch": _run_poison_batch,
    "poison-seq": _run_poison_seq,
    "evade": _run_evade,
    "defend": _run_defend,
    "shape-rewards": _run_shape_rewards,
}


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    seed_override: int | None = None,
) -> ExperimentOutcome:
    """Execute the configured experiment for every seed and write CSVs.

    ``out_dir`` falls back to the config's ``run.out``; a seed override
    replaces the config's seed list with a single seed.
    """
    if config.kind not in _RUNNERS:
        raise ConfigError(
            f"experiment.kind: unknown kind {config.kind!r}; valid kinds are "
            + ", ".join(_RUNNERS), key="experiment.kind",
        )
    target_dir = Path(out_dir or config.out_dir or ".")
    target_dir.mkdir(parents=True, exist_ok=True)
    seeds = [seed_override] if seed_override is not None else list(config.seeds)

    runner = _RUNNERS[config.kind]
    outcome = ExperimentOutcome(kind=config.kind, out_dir=target_dir,
                                summary_path=target_dir / "summary.csv")
    summary_rows = []
    summary_header: list | None = None
    for seed in seeds:
        header, rows, summary, status = runner(config, seed)
        record_path = target_dir / f"{config.kind}_seed{seed}.csv"
        write_csv(record_path, header, rows)
        outcome.record_paths.append(record_path)
        outcome.statuses.append(status)
        if summary_header is None:
            summary_header = ["seed"] + list(summary)
        summary_rows.append([seed] + [summary[k] for k in summary_header[1:]])
    write_csv(outcome.summary_path, summary_header or ["seed"], summary_rows)
    return outcome

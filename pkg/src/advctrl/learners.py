"""Victim learners used as plants.

Two update rules are modeled:

* a batch learner that maps a whole training set to the minimizer of
  regularized hinge-loss empirical risk (one-step dynamics), and
* a sequential learner that applies one (sub)gradient step per incoming
  training item.

Both are deterministic functions of their inputs, as the control view
requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LinearModel",
    "LabeledExample",
    "Dataset",
    "LearnerConfig",
    "hinge_loss",
    "hinge_gradient",
    "logistic_loss",
    "logistic_gradient",
    "item_loss",
    "item_gradient",
    "erm_objective",
    "batch_svm_train",
    "svm_train_weights",
    "sgd_step",
    "load_dataset",
    "save_dataset",
    "two_cluster_dataset",
]


@dataclass
class LinearModel:
    """Linear classifier state: weight vector plus optional fixed offset.

    Prediction is ``sign(w . x + bias)`` with ``sign(0) = +1``.  The
    bias defaults to 0 to match the weight-only learner dynamics; train
    a bias by appending a constant-1 feature instead.
    """

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not np.all(np.isfinite(w)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")
        self.weights = w
        self.bias = float(self.bias)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def decision(self, x) -> float:
        return float(self.weights @ np.asarray(x, dtype=float) + self.bias)

    def predict(self, x) -> int:
        return 1 if self.decision(x) >= 0.0 else -1

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.bias)


@dataclass
class LabeledExample:
    """A training item: feature vector and label in {-1, +1}."""

    features: np.ndarray
    label: int

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.features, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        self.features = x
        self.label = int(self.label)


@dataclass
class Dataset:
    """An ordered training set with uniform feature dimension (may be empty)."""

    items: list = field(default_factory=list)

    def __post_init__(self):
        self.items = list(self.items)
        dims = {it.features.shape[0] for it in self.items}
        if len(dims) > 1:
            raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")

    @classmethod
    def from_arrays(cls, X, y) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise ValueError("feature/label row counts differ")
        return cls([LabeledExample(X[i], int(y[i])) for i in range(X.shape[0])])

    def features(self) -> np.ndarray:
        if not self.items:
            return np.zeros((0, 0))
        return np.stack([it.features for it in self.items])

    def labels(self) -> np.ndarray:
        return np.array([it.label for it in self.items], dtype=int)

    @property
    def dim(self) -> int:
        return self.items[0].features.shape[0] if self.items else 0

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


@dataclass
class LearnerConfig:
    """Learner hyperparameters: regularizer, step-size schedule, loss."""

    lam: float = 0.0
    eta: float = 0.1
    schedule: str = "constant"  # "constant" or "inverse" (eta / (t+1))
    loss: str = "hinge"  # "hinge" or "logistic"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("regularizer must be nonnegative")
        if self.eta < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.schedule not in ("constant", "inverse"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.loss not in ("hinge", "logistic"):
            raise ValueError(f"unknown loss {self.loss!r}")

    def eta_at(self, t: int) -> float:
        if self.schedule == "constant":
            return self.eta
        return self.eta / (t + 1)


# ----------------------------------------------------------------------
# Losses
# ----------------------------------------------------------------------


def hinge_loss(w: np.ndarray, x: np.ndarray, y: int) -> float:
    return max(0.0, 1.0 - y * float(w @ x))


def hinge_gradient(w: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
    """Hinge subgradient; the kink y(w.x) = 1 takes the zero branch."""
    if y * float(w @ x) < 1.0:
        return -y * np.asarray(x, dtype=float)
    return np.zeros_like(np.asarray(x, dtype=float))


def logistic_loss(w: np.ndarray, x: np.ndarray, y: int) -> float:
    m = y * float(w @ x)
    # log(1 + exp(-m)) computed stably
    return float(np.logaddexp(0.0, -m))


def logistic_gradient(w: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
    m = y * float(w @ x)
    sigma = 1.0 / (1.0 + math.exp(m)) if m > -700 else 1.0
    return -y * sigma * np.asarray(x, dtype=float)


_LOSSES = {"hinge": (hinge_loss, hinge_gradient),
           "logistic": (logistic_loss, logistic_gradient)}


def item_loss(w: np.ndarray, x: np.ndarray, y: int, loss: str = "hinge") -> float:
    return _LOSSES[loss][0](w, x, y)


def item_gradient(w: np.ndarray, x: np.ndarray, y: int, loss: str = "hinge") -> np.ndarray:
    return _LOSSES[loss][1](w, x, y)


def erm_objective(w: np.ndarray, data: Dataset, lam: float, loss: str = "hinge") -> float:
    """sum_i loss(w, x_i, y_i) + lam * ||w||^2."""
    w = np.asarray(w, dtype=float)
    total = sum(item_loss(w, it.features, it.label, loss) for it in data)
    return float(total + lam * float(w @ w))


# ----------------------------------------------------------------------
# Batch training (one-step dynamics of the batch learner)
# ----------------------------------------------------------------------


def batch_svm_train(
    data: Dataset,
    lam: float,
    fit_bias: bool = False,
    max_sweeps: int = 10000,
    gap_tol: float = 1e-14,
) -> LinearModel:
    """Minimize ``sum_i hinge(w, x_i, y_i) + lam ||w||^2`` deterministically.

    For ``lam > 0`` the solver is cyclic coordinate ascent on the dual
    box-constrained quadratic (alpha initialized to zero, equivalent to
    starting from w = 0), swept in dataset order until the duality gap
    falls below ``gap_tol`` times the problem scale or nothing moves.
    The minimizer is unique, so the output is a well-defined function of
    the data -- precise enough to finite-difference through.

    For ``lam == 0`` (non-degenerate data only) a deterministic
    subgradient method with a 1/sqrt(k) schedule is used and the best
    iterate is returned.

    Raises:
        ValueError: zero-dimensional features, or lam < 0.
    """
    n = len(data)
    if n == 0:
        return LinearModel(np.zeros(max(data.dim, 1)))
    if data.dim == 0:
        raise ValueError("zero-dimensional training data")

    X = data.features()
    y = data.labels().astype(float)
    if fit_bias:
        X = np.hstack([X, np.ones((n, 1))])
    w = svm_train_weights(X, y, lam, max_sweeps=max_sweeps, gap_tol=gap_tol)
    if fit_bias:
        return LinearModel(w[:-1], float(w[-1]))
    return LinearModel(w)


def svm_train_weights(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_sweeps: int = 10000,
    gap_tol: float = 1e-14,
) -> np.ndarray:
    """Array-level trainer behind :func:`batch_svm_train`.

    Takes an (n, d) feature matrix and (n,) label vector directly; the
    poisoning dynamics call this in their inner loop to avoid per-eval
    dataset construction.
    """
    if lam < 0:
        raise ValueError("regularizer must be nonnegative")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(max(X.shape[1] if X.ndim == 2 else 1, 1))
    if lam == 0.0:
        return _train_subgradient(X, y, max_iters=max_sweeps)
    return _train_dual_cd(X, y, lam, max_sweeps, gap_tol)


def _train_dual_cd(X: np.ndarray, y: np.ndarray, lam: float,
                   max_sweeps: int, gap_tol: float) -> np.ndarray:
    n, d = X.shape
    yx = X * y[:, None]
    sq = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    v = np.zeros(d)  # v = sum_i alpha_i y_i x_i ; w = v / (2 lam)
    inv2lam = 1.0 / (2.0 * lam)
    scale = max(1.0, float(n))
    best_gap = math.inf
    stalled = 0
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            if sq[i] == 0.0:
                continue  # hinge is constant in w for a zero feature vector
            slack = 1.0 - (yx[i] @ v) * inv2lam
            a_new = alpha[i] + 2.0 * lam * slack / sq[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > 1.0:
                a_new = 1.0
            move = a_new - alpha[i]
            if move != 0.0:
                v += move * yx[i]
                alpha[i] = a_new
                moved = True
        if not moved:
            break
        margins = (yx @ v) * inv2lam
        primal = np.maximum(0.0, 1.0 - margins).sum() + (v @ v) * inv2lam / 2.0
        dual = alpha.sum() - (v @ v) * inv2lam / 2.0
        gap = primal - dual
        if gap <= gap_tol * scale:
            break
        # the dual Hessian has rank <= d, so alpha can cycle along a flat
        # at the rounding floor; stop once the gap stops improving meaningfully
        if gap < best_gap - 1e-14 * scale:
            best_gap = gap
            stalled = 0
        else:
            stalled += 1
            if stalled >= 30:
                break
    return v * inv2lam


def _train_subgradient(X: np.ndarray, y: np.ndarray, max_iters: int) -> np.ndarray:
    n, d = X.shape
    w = np.zeros(d)
    best_w = w.copy()
    grad_bound = max(1.0, float(np.linalg.norm(X, axis=1).sum()))
    yx = X * y[:, None]

    def f(w):
        return float(np.maximum(0.0, 1.0 - yx @ w).sum())

    best_f = f(w)
    for k in range(max_iters):
        active = (yx @ w) < 1.0
        g = -yx[active].sum(axis=0)
        w = w - (1.0 / (grad_bound * math.sqrt(k + 1.0))) * g
        fw = f(w)
        if fw < best_f - 1e-12:
            best_f, best_w = fw, w.copy()
    return best_w


# ----------------------------------------------------------------------
# Sequential learner (per-item gradient step)
# ----------------------------------------------------------------------


def sgd_step(
    model: LinearModel,
    item: LabeledExample,
    eta: float,
    lam: float = 0.0,
    loss: str = "hinge",
) -> LinearModel:
    """One gradient step on a single item: ``w - eta (grad_loss + 2 lam w)``.

    The bias is carried through untouched (it is a fixed offset, not a
    trained parameter).

    Raises:
        ValueError: dimension mismatch or non-positive eta.
    """
    if eta < 0:
        raise ValueError("step size must be nonnegative")
    if item.features.shape[0] != model.dim:
        raise ValueError(
            f"item dimension {item.features.shape[0]} != model dimension {model.dim}"
        )
    g = item_gradient(model.weights, item.features, item.label, loss)
    if lam > 0:
        g = g + 2.0 * lam * model.weights
    return LinearModel(model.weights - eta * g, model.bias)


# ----------------------------------------------------------------------
# Dataset file format and synthetic data
# ----------------------------------------------------------------------


def load_dataset(path) -> Dataset:
    """Read rows ``y,x_1,...,x_d``; lines starting with '#' are comments."""
    items = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            label = int(float(parts[0]))
            feats = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from exc
        items.append(LabeledExample(np.array(feats), label))
    return Dataset(items)


def save_dataset(data: Dataset, path) -> None:
    lines = ["# y,x_1,...,x_d"]
    for it in data:
        lines.append(",".join([str(it.label)] + [repr(float(v)) for v in it.features]))
    Path(path).write_text("\n".join(lines) + "\n")


def two_cluster_dataset(
    n_per_class: int = 4,
    center: float = 0.6,
    spread: float = 0.35,
    seed: int = 0,
) -> Dataset:
    """2-D Gaussian clusters at +-(center, center) labeled +1 / -1."""
    rng = np.random.default_rng(seed)
    c = np.array([center, center])
    pos = c + spread * rng.standard_normal((n_per_class, 2))
    neg = -c + spread * rng.standard_normal((n_per_class, 2))
    X = np.vstack([pos, neg])
    y = np.array([1] * n_per_class + [-1] * n_per_class)
    return Dataset.from_arrays(X, y)

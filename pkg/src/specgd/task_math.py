"""Loss, gradient, and regularizer math for linear classifiers.

The objective being minimized is a sum of per-example loss terms plus a
single regularization penalty.  Two loss families are supported (SVM
hinge and logistic) together with none/L1/L2 penalties.

Scalar functions (`example_loss`, `example_gradient`) operate on one
example at a time.  The ``*_block`` helpers evaluate several models
against a whole feature matrix in one shot; they are the compute kernels
of the training engine and must stay bit-for-bit consistent with each
other, so all of them derive losses and gradient coefficients from the
same signed-margin arrays through the same expressions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError


class Family(enum.Enum):
    SVM_HINGE = "svm"
    LOGISTIC = "lr"


class Reg(enum.Enum):
    NONE = "none"
    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class TaskSpec:
    family: Family
    reg: Reg = Reg.NONE
    mu: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigError(f"regularization coefficient must be >= 0, got {self.mu}")


@dataclass
class Model:
    """Dense parameter vector plus the iteration that produced it."""

    weights: np.ndarray
    iter: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1:
            raise ConfigError("model weights must be a 1-D vector")

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "Model":
        return Model(self.weights.copy(), self.iter)


@dataclass
class Example:
    features: np.ndarray
    label: float

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)


def _check_dims(model_dim: int, feature_dim: int):
    if model_dim != feature_dim:
        raise ConfigError(
            f"dimension mismatch: model has d={model_dim}, example has d={feature_dim}"
        )


# ---------------------------------------------------------------------------
# Margin-based loss values and gradient coefficients.
#
# With t = y * (w . x), every supported loss is a function of t alone and its
# gradient is coef(t, y) * x.  These four helpers accept scalars or arrays.
# ---------------------------------------------------------------------------


def hinge_loss_from_t(t):
    return np.maximum(0.0, 1.0 - t)


def hinge_coef_from_t(t, y):
    # Subgradient at the kink (1 - t == 0) is chosen as 0: the active-set
    # predicate is strictly 1 - t > 0.
    return np.where(1.0 - t > 0.0, -y, 0.0)


def logistic_loss_from_t(t):
    # ln(1 + e^-t) = max(0, -t) + log1p(e^-|t|), stable for large |t|.
    return np.maximum(0.0, -t) + np.log1p(np.exp(-np.abs(t)))


def sigmoid_neg(t):
    """sigma(-t) = 1 / (1 + e^t), computed without overflow."""
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0.0, e / (1.0 + e), 1.0 / (1.0 + e))


def logistic_coef_from_t(t, y):
    return -y * sigmoid_neg(t)


def loss_from_t(task: TaskSpec, t):
    if task.family is Family.SVM_HINGE:
        return hinge_loss_from_t(t)
    return logistic_loss_from_t(t)


def coef_from_t(task: TaskSpec, t, y):
    if task.family is Family.SVM_HINGE:
        return hinge_coef_from_t(t, y)
    return logistic_coef_from_t(t, y)


# ---------------------------------------------------------------------------
# Scalar (single-example) API.
# ---------------------------------------------------------------------------


def example_loss(task: TaskSpec, model: Model, ex: Example) -> float:
    """Per-example loss term; the regularizer is NOT included here."""
    _check_dims(model.dim, ex.features.shape[0])
    t = ex.label * float(np.dot(model.weights, ex.features))
    return float(loss_from_t(task, t))


def example_gradient(task: TaskSpec, model: Model, ex: Example) -> np.ndarray:
    """Gradient (or chosen subgradient) of the per-example loss term."""
    _check_dims(model.dim, ex.features.shape[0])
    t = ex.label * float(np.dot(model.weights, ex.features))
    c = float(coef_from_t(task, t, ex.label))
    return c * ex.features


def regularizer_value(task: TaskSpec, model: Model) -> float:
    w = model.weights
    if task.reg is Reg.NONE:
        return 0.0
    if task.reg is Reg.L1:
        return float(task.mu * np.sum(np.abs(w)))
    return float(task.mu * np.sum(w * w))


def regularizer_subgradient(task: TaskSpec, model: Model) -> np.ndarray:
    w = model.weights
    if task.reg is Reg.NONE:
        return np.zeros_like(w)
    if task.reg is Reg.L1:
        # sign(0) := 0 is the chosen subgradient.
        return task.mu * np.sign(w)
    return 2.0 * task.mu * w


# ---------------------------------------------------------------------------
# Block kernels used by the engine.  W is always 2-D (k models x d) so the
# BLAS call shapes, and therefore the float summation order, do not depend
# on which engine path invoked them.
# ---------------------------------------------------------------------------


def block_margins_t(X: np.ndarray, y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Signed margins t[j, i] = y_j * (x_j . w_i) for a block of examples."""
    if W.ndim != 2 or X.shape[1] != W.shape[1]:
        raise ConfigError(
            f"dimension mismatch: X has d={X.shape[1]}, W has d={W.shape[-1]}"
        )
    M = X @ W.T
    np.multiply(M, y[:, None], out=M)
    return M


def block_losses(task: TaskSpec, X, y, W) -> np.ndarray:
    """Per-example loss values, shape (block, k)."""
    return loss_from_t(task, block_margins_t(X, y, W))


def block_loss_and_coef(task: TaskSpec, X, y, W):
    """Loss values and gradient coefficients in one margin evaluation."""
    T = block_margins_t(X, y, W)
    return loss_from_t(task, T), coef_from_t(task, T, y[:, None])


def grad_partial(C: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Gradient partial sums, shape (k, d): row i is sum_j C[j, i] * x_j."""
    return C.T @ X


@dataclass
class ObjectiveValue:
    loss_sum: float
    reg: float

    @property
    def total(self) -> float:
        return self.loss_sum + self.reg


def check_finite_vector(v: np.ndarray, what: str):
    """Raise a numeric error naming the first offending dimension."""
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise NumericError(f"{what} has a non-finite component at dimension {bad[0]}")

"""Supervised losses on sparse codes and their first derivatives.

Every loss returns a :class:`LossEval` holding the value and the gradients
with respect to the model parameters ``W`` and the code ``alpha``. All losses
are twice continuously differentiable; the hinge loss is deliberately absent.
No intercept is modelled: append a constant feature to the signals if one is
needed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logsumexp, softmax

__all__ = [
    "LossEval",
    "TaskLoss",
    "square_loss",
    "logistic_loss",
    "bilinear_logistic_loss",
    "softmax_loss",
    "LOSS_KINDS",
]

LOSS_KINDS = ("square", "logistic", "bilinear_logistic", "softmax")


@dataclass(frozen=True)
class LossEval:
    value: float
    grad_w: np.ndarray
    grad_alpha: np.ndarray


def _check_pm1(y):
    if y not in (-1, 1):
        raise ValueError(f"binary label must be -1 or +1, got {y!r}")
    return float(y)


def square_loss(y, W, alpha):
    """``0.5 * ||y - W alpha||^2`` for a target ``y`` of length q and ``W`` of shape (q, p)."""
    W = np.asarray(W, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if W.ndim != 2 or W.shape != (y.shape[0], alpha.shape[0]):
        raise ValueError(
            f"shape mismatch: y {y.shape}, W {W.shape}, alpha {alpha.shape}"
        )
    r = y - W @ alpha
    return LossEval(
        value=0.5 * float(r @ r),
        grad_w=-np.outer(r, alpha),
        grad_alpha=-(W.T @ r),
    )


def logistic_loss(y, w, alpha):
    """``log(1 + exp(-y w^T alpha))`` with ``y`` in {-1, +1} and ``w`` of length p."""
    y = _check_pm1(y)
    w = np.asarray(w, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if w.shape != alpha.shape or w.ndim != 1:
        raise ValueError(f"shape mismatch: w {w.shape}, alpha {alpha.shape}")
    margin = y * float(w @ alpha)
    weight = -y * expit(-margin)
    return LossEval(
        value=-float(log_expit(margin)),
        grad_w=weight * alpha,
        grad_alpha=weight * w,
    )


def bilinear_logistic_loss(y, x, W, alpha):
    """``log(1 + exp(-y x^T W alpha))`` with ``W`` of shape (m, p)."""
    y = _check_pm1(y)
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if W.shape != (x.shape[0], alpha.shape[0]):
        raise ValueError(
            f"shape mismatch: x {x.shape}, W {W.shape}, alpha {alpha.shape}"
        )
    xW = x @ W
    margin = y * float(xW @ alpha)
    weight = -y * expit(-margin)
    return LossEval(
        value=-float(log_expit(margin)),
        grad_w=weight * np.outer(x, alpha),
        grad_alpha=weight * xW,
    )


def softmax_loss(y, W, alpha):
    """Multinomial cross-entropy; ``y`` is a class label in ``1..q``, ``W`` is (q, p)."""
    W = np.asarray(W, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != alpha.shape[0]:
        raise ValueError(f"shape mismatch: W {W.shape}, alpha {alpha.shape}")
    q = W.shape[0]
    if int(y) != y or not 1 <= y <= q:
        raise ValueError(f"class label must be in 1..{q}, got {y!r}")
    k = int(y) - 1
    scores = W @ alpha
    prob = softmax(scores)
    prob[k] -= 1.0
    return LossEval(
        value=float(logsumexp(scores) - scores[k]),
        grad_w=np.outer(prob, alpha),
        grad_alpha=W.T @ prob,
    )


@dataclass(frozen=True)
class TaskLoss:
    """A loss kind bound to a uniform call signature ``loss(y, W, alpha, x)``.

    ``x`` is only read by the bilinear loss.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; choose from {LOSS_KINDS}")

    def __call__(self, y, W, alpha, x=None):
        if self.kind == "square":
            return square_loss(y, W, alpha)
        if self.kind == "logistic":
            return logistic_loss(y, W, alpha)
        if self.kind == "bilinear_logistic":
            if x is None:
                raise ValueError("bilinear loss needs the input signal x")
            return bilinear_logistic_loss(y, x, W, alpha)
        return softmax_loss(y, W, alpha)

"""Per-sample gradients of the task-driven objective.

For a sample ``(y, x)`` with code ``alpha = alpha*(x_enc, D)`` on active set
``A`` (``x_enc = Z x`` when a transform is present, else ``x``), the auxiliary
vector ``beta`` is zero off ``A`` and solves
``(D_A^T D_A + lambda2 I) beta_A = grad_alpha loss`` on ``A``. Then

    grad_W = grad_W loss
    grad_D = -D beta alpha^T + (x_enc - D alpha) beta^T
    grad_Z = D beta x^T

The linear system is solved with the Cholesky factor that the homotopy
solver returns, so no new factorization is needed. Where the active set is
about to change the objective is not differentiable; the value returned there
is the one for the active set the solver reports.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "StaleFactorError",
    "SampleGradients",
    "compute_beta",
    "grad_sample",
    "unsup_grad_d",
    "grad_batch",
]


class StaleFactorError(ValueError):
    """The Cholesky factor does not belong to the code's active set."""


@dataclass(frozen=True)
class SampleGradients:
    value: float
    grad_w: np.ndarray
    grad_d: np.ndarray
    grad_z: np.ndarray | None
    beta: np.ndarray


def compute_beta(code, grad_alpha):
    """Solve for ``beta`` on the active set of ``code`` using its Cholesky factor."""
    grad_alpha = np.asarray(grad_alpha, dtype=np.float64)
    p = code.alpha.shape[0]
    if grad_alpha.shape != (p,):
        raise ValueError(f"grad_alpha has shape {grad_alpha.shape}, expected ({p},)")
    k = code.active.shape[0]
    if code.chol.shape != (k, k):
        raise StaleFactorError(
            f"factor of shape {code.chol.shape} for an active set of size {k}"
        )
    beta = np.zeros(p)
    if k:
        g = grad_alpha[code.active]
        t = solve_triangular(code.chol, g, lower=True, check_finite=False)
        beta[code.active] = solve_triangular(
            code.chol, t, lower=True, trans="T", check_finite=False
        )
    return beta


def grad_sample(y, x, model, code=None):
    """Loss value and gradients with respect to ``W``, ``D`` and ``Z`` for one sample.

    ``y`` is the raw label or target; it goes through ``model.task.target``.
    ``code`` may be passed when already computed for ``model.encoder_input(x)``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_enc = model.encoder_input(x)
    if code is None:
        code = model.encode(x)
    D = model.dictionary
    alpha = code.alpha
    target = model.task.target(y, x)
    ev = model.task.loss(target, model.w, alpha, x)
    beta = compute_beta(code, ev.grad_alpha)

    Dbeta = D @ beta
    resid = x_enc - D @ alpha
    grad_d = np.outer(resid, beta) - np.outer(Dbeta, alpha)
    grad_z = np.outer(Dbeta, x) if model.z is not None else None
    return SampleGradients(
        value=ev.value, grad_w=ev.grad_w, grad_d=grad_d, grad_z=grad_z, beta=beta
    )


def unsup_grad_d(x, D, code):
    """Gradient of the reconstruction loss in ``D``: ``-(x - D alpha) alpha^T``.

    ``x`` is the signal the code was computed for (the encoder input).
    """
    x = np.asarray(x, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if x.shape != (D.shape[0],) or code.alpha.shape != (D.shape[1],):
        raise ValueError(
            f"shape mismatch: x {x.shape}, D {D.shape}, alpha {code.alpha.shape}"
        )
    return -np.outer(x - D @ code.alpha, code.alpha)


def grad_batch(model, X, labels, codes=None):
    """Average of :func:`grad_sample` over the columns of ``X``.

    ``labels`` is indexed along its last axis (None for compressed sensing,
    whose target is the signal itself). Returns a :class:`SampleGradients`
    whose ``value`` is the mean loss and ``beta`` the ``(p, n)`` matrix of
    per-sample vectors.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    if codes is None:
        codes = model.encode_batch(X)
    task, loss, W = model.task, model.task.loss, model.w
    p = model.dictionary.shape[1]
    A = np.empty((p, n))
    B = np.empty((p, n))
    gw = np.zeros_like(W)
    total = 0.0
    for i, code in enumerate(codes):
        x = X[:, i]
        y = None if labels is None else labels[..., i]
        ev = loss(task.target(y, x), W, code.alpha, x)
        A[:, i] = code.alpha
        B[:, i] = compute_beta(code, ev.grad_alpha)
        gw += ev.grad_w
        total += ev.value
    D = model.dictionary
    Xe = model.z @ X if model.z is not None else X
    DB = D @ B
    grad_d = ((Xe - D @ A) @ B.T - DB @ A.T) / n
    grad_z = DB @ X.T / n if model.z is not None else None
    return SampleGradients(
        value=total / n, grad_w=gw / n, grad_d=grad_d, grad_z=grad_z, beta=B
    )

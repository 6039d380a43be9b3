"""Projected stochastic gradient training of task-driven dictionaries.

Every iteration codes a mini-batch, forms the averaged gradients of the task
loss with respect to ``W``, ``D`` (and ``Z``), and takes one projected step
with learning rate ``min(rho, rho * t0 / t)``. Dictionary columns are kept in
the unit ball. With ``mu > 0`` the dictionary step mixes in the gradient of
the reconstruction loss on unlabeled signals.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp, softmax

from .data import SampleStream
from .elastic_net import ElasticNetParams, batch_solve
from .gradients import grad_batch
from .model import OneVsAll, TrainedModel
from .tasks import TaskSpec

__all__ = [
    "DivergenceError",
    "TrainConfig",
    "project_dictionary",
    "project_frobenius",
    "learning_rate",
    "init_unsupervised",
    "warm_start_w",
    "task_objective",
    "train",
    "continuation_schedule",
    "fit",
    "fit_one_vs_all",
    "select_rho",
    "RHO_GRID",
    "LAMBDA1_GRID",
]

log = logging.getLogger(__name__)

RHO_GRID = (1e-3, 1e-2, 1e-1, 1e0, 1e1)
LAMBDA1_GRID = tuple(round(0.15 + 0.025 * k, 6) for k in range(-3, 4))

# columns within roundoff of the unit sphere count as feasible
_NORM_SLACK = 1e-14
_DIVERGENCE_FACTOR = 1e3


class DivergenceError(RuntimeError):
    """Training objective blew up; the learning rate is usually too large."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the stochastic training loop.

    ``t0=None`` means ``T // 10`` (at least 1) and ``nu2=None`` reuses ``nu``
    for the transform. ``w_radius`` constrains ``||W||_F``; the default leaves
    ``W`` unconstrained. ``init_passes`` and ``init_batch`` configure the
    unsupervised initialization used by :func:`fit`.
    """

    lambda1: float = 0.15
    lambda2: float = 0.01
    nu: float = 1e-9
    nu2: float | None = None
    rho: float = 0.1
    t0: int | None = None
    T: int = 1000
    eta: int = 200
    mu: float = 0.0
    seed: int = 0
    w_radius: float | None = None
    window: int = 1000
    log_every: int | None = None
    init_passes: int = 5
    init_batch: int | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError("rho must be nonnegative")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.eta < 1:
            raise ValueError("mini-batch size eta must be at least 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.t0 is not None and self.t0 < 1:
            raise ValueError("t0 must be at least 1")
        if self.nu < 0 or (self.nu2 is not None and self.nu2 < 0):
            raise ValueError("nu and nu2 must be nonnegative")
        if self.w_radius is not None and self.w_radius <= 0:
            raise ValueError("w_radius must be positive")
        ElasticNetParams(self.lambda1, self.lambda2)

    @property
    def knee(self):
        return self.t0 if self.t0 is not None else max(1, self.T // 10)

    @property
    def z_nu(self):
        return self.nu if self.nu2 is None else self.nu2

    @property
    def elastic_net(self):
        return ElasticNetParams(self.lambda1, self.lambda2)


def project_dictionary(D):
    """Rescale columns with norm above one back onto the unit sphere."""
    D = np.array(D, dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    over = norms > 1.0 + _NORM_SLACK
    D[:, over] /= norms[over]
    return D


def project_frobenius(W, radius=None):
    W = np.array(W, dtype=np.float64)
    if radius is None:
        return W
    n = np.linalg.norm(W)
    return W * (radius / n) if n > radius else W


def learning_rate(t, rho, t0):
    """Constant ``rho`` up to iteration ``t0``, then ``rho * t0 / t``."""
    if t < 1:
        raise ValueError("iterations are counted from 1")
    return min(rho, rho * t0 / t)


def _codes_matrix(codes):
    return np.column_stack([c.alpha for c in codes])


def _seed_atoms(stream, p):
    X = stream.X
    n = X.shape[1]
    if n < p:
        raise ValueError(f"need at least p={p} signals to seed the dictionary, got {n}")
    picked, seen = [], set()
    for _ in range(2 * n):
        i = stream.next_index()
        if i in seen:
            continue
        seen.add(i)
        if np.linalg.norm(X[:, i]) > 1e-10:
            picked.append(i)
            if len(picked) == p:
                break
    if len(picked) < p:
        raise ValueError(f"fewer than p={p} nonzero signals available")
    D = X[:, picked].copy()
    return D / np.linalg.norm(D, axis=0)


def _update_atoms(D, A, B, Xb, rng):
    """One sweep of exact column updates on the surrogate built from (A, B)."""
    for j in range(D.shape[1]):
        if A[j, j] < 1e-12:
            # unused atom: restart it on a random nonzero signal of the batch
            norms = np.linalg.norm(Xb, axis=0)
            live = np.flatnonzero(norms > 1e-10)
            if live.size:
                i = live[rng.integers(live.size)]
                D[:, j] = Xb[:, i] / norms[i]
            continue
        u = D[:, j] + (B[:, j] - D @ A[:, j]) / A[j, j]
        D[:, j] = u / max(1.0, np.linalg.norm(u))
    return D


def init_unsupervised(stream, p, lambda1, lambda2, passes=1, batch_size=None, n_jobs=1):
    """Dictionary learned for reconstruction only, used to start supervised training.

    Atoms are seeded with ``p`` distinct normalized signals drawn from
    ``stream``. Each pass then sweeps one epoch of the stream in mini-batches
    of ``batch_size`` (default: the whole epoch at once): the batch is coded,
    the statistics ``sum alpha alpha^T`` and ``sum x alpha^T`` of the current
    pass are updated, and every atom takes a projected gradient step with
    step size ``1 / A_jj`` (block-coordinate minimization of the quadratic
    surrogate). With full batches the reconstruction objective cannot increase.
    """
    D = _seed_atoms(stream, p)
    params = ElasticNetParams(lambda1, lambda2)
    X = stream.X
    m, n = X.shape
    size = n if batch_size is None else max(1, min(batch_size, n))
    for _ in range(passes):
        A = np.zeros((p, p))
        B = np.zeros((m, p))
        left = n
        while left > 0:
            b = min(size, left)
            left -= b
            Xb = X[:, stream.next_batch(b)]
            alphas = _codes_matrix(batch_solve(Xb, D, params, n_jobs=n_jobs))
            A += alphas @ alphas.T
            B += Xb @ alphas.T
            D = _update_atoms(D, A, B, Xb, stream.rng)
    return project_dictionary(D)


def _square_targets(task, X, labels):
    n = X.shape[1]
    if task.kind == "compressed_sensing" and labels is None:
        return X
    if task.kind == "multiclass_regression":
        return np.column_stack([task.target(labels[i]) for i in range(n)])
    T = np.asarray(labels, dtype=np.float64)
    return T.reshape(task.q, n)


def _smooth_objective(task, A, X, labels, nu):
    """Mean task loss over coded samples (columns of ``A``) and its W-gradient."""
    n = A.shape[1]
    kind = task.loss.kind
    shape = task.w_shape

    if kind == "softmax":
        lab = np.asarray(labels).astype(int) - 1
        if lab.min() < 0 or lab.max() >= task.q:
            raise ValueError(f"class labels must be in 1..{task.q}")
        cols = np.arange(n)

        def fun(wf):
            W = wf.reshape(shape)
            S = W @ A
            val = np.mean(logsumexp(S, axis=0) - S[lab, cols])
            P = softmax(S, axis=0)
            P[lab, cols] -= 1.0
            g = P @ A.T / n + nu * W
            return val + 0.5 * nu * wf @ wf, g.ravel()

        return fun

    y = np.asarray(labels, dtype=np.float64)
    if not np.all(np.abs(y) == 1):
        raise ValueError("binary labels must be -1 or +1")

    if kind == "logistic":

        def fun(wf):
            mar = y * (wf @ A)
            val = -np.mean(log_expit(mar))
            wt = -y * expit(-mar)
            g = A @ wt / n + nu * wf
            return val + 0.5 * nu * wf @ wf, g

        return fun

    def fun(wf):
        W = wf.reshape(shape)
        mar = y * np.einsum("in,in->n", X, W @ A)
        val = -np.mean(log_expit(mar))
        wt = -y * expit(-mar)
        g = (X * wt) @ A.T / n + nu * W
        return val + 0.5 * nu * wf @ wf, g.ravel()

    return fun


def warm_start_w(model, X, labels, nu, max_iter=1000, tol=1e-6, codes=None):
    """Task parameters minimizing the mean loss plus ``nu/2 ||W||_F^2`` for fixed D.

    Square losses are solved through the normal equations. Logistic and
    softmax losses are minimized with L-BFGS from ``W = 0`` until the gradient
    norm drops below ``tol`` or ``max_iter`` iterations pass.
    """
    X = np.asarray(X, dtype=np.float64)
    task = model.task
    if codes is None:
        codes = model.encode_batch(X)
    A = _codes_matrix(codes)
    n = A.shape[1]
    if task.loss.kind == "square":
        T = _square_targets(task, X, labels)
        G = A @ A.T / n + nu * np.eye(A.shape[0])
        try:
            c, low = linalg.cho_factor(G, lower=True)
        except linalg.LinAlgError:
            c = None
        d = np.diag(c) if c is not None else np.zeros(1)
        if c is None or d.min() ** 2 <= 1e-12 * max(d.max() ** 2, 1e-300):
            raise np.linalg.LinAlgError(
                "normal equations for W are singular (unused atoms?); use nu > 0"
            )
        W = linalg.cho_solve((c, low), (T @ A.T / n).T).T
        return W.reshape(task.w_shape)

    fun = _smooth_objective(task, A, X, labels, nu)
    res = minimize(
        fun,
        np.zeros(int(np.prod(task.w_shape))),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": tol},
    )
    return res.x.reshape(task.w_shape)


def task_objective(model, X, labels, nu=0.0, codes=None):
    """Mean task loss over a dataset plus ``nu/2 ||W||_F^2``."""
    X = np.asarray(X, dtype=np.float64)
    if codes is None:
        codes = model.encode_batch(X)
    total = 0.0
    task = model.task
    for i, code in enumerate(codes):
        x = X[:, i]
        y = None if labels is None else np.asarray(labels)[..., i]
        total += task.loss(task.target(y, x), model.w, code.alpha, x).value
    return total / X.shape[1] + 0.5 * nu * float(np.sum(model.w**2))


def _batch(stream, eta):
    idx = stream.next_batch(eta)
    Y = None if stream.Y is None else stream.Y[..., idx]
    return stream.X[:, idx], Y


def train(model, labeled, config, unlabeled=None, callback=None):
    """Run ``config.T`` projected stochastic gradient iterations from ``model``.

    Parameters
    ----------
    model : TrainedModel
        Starting point; it is copied, not modified.
    labeled : SampleStream
        Labeled samples (labels may be None for compressed sensing).
    config : TrainConfig
    unlabeled : SampleStream, optional
        Required when ``config.mu > 0``.
    callback : callable, optional
        Called as ``callback(t, model)`` after every iteration.

    Returns
    -------
    TrainedModel
    """
    if config.mu > 0 and unlabeled is None:
        raise ValueError("mu > 0 needs a stream of unlabeled signals")
    model = model.copy(config=config, telemetry=[])
    model.params = config.elastic_net
    mu, eta, rho, t0 = config.mu, config.eta, config.rho, config.knee
    nu, nu2 = config.nu, config.z_nu
    log_every = config.log_every or max(1, config.T // 100)
    recent = deque(maxlen=max(1, math.ceil(config.window / eta)))
    initial = None

    D = np.array(model.dictionary)
    W = model.w
    Z = model.z
    for t in range(1, config.T + 1):
        Xb, Yb = _batch(labeled, eta)
        g = grad_batch(model, Xb, Yb)
        grad_d = g.grad_d
        if mu > 0:
            Xu = unlabeled.X[:, unlabeled.next_batch(eta)]
            Au = _codes_matrix(model.encode_batch(Xu))
            Xue = Z @ Xu if Z is not None else Xu
            grad_u = -(Xue - D @ Au) @ Au.T / eta
            grad_d = (1.0 - mu) * grad_d + mu * grad_u

        step = learning_rate(t, rho, t0)
        W = project_frobenius(W - step * (g.grad_w + nu * W), config.w_radius)
        D = project_dictionary(D - step * grad_d)
        if Z is not None:
            Z = Z - step * (g.grad_z + nu2 * Z)

        model.w, model.z = W, Z
        model.dictionary = D
        recent.append(g.value)
        est = float(np.mean(recent)) + 0.5 * nu * float(np.sum(W**2))
        if Z is not None:
            est += 0.5 * nu2 * float(np.sum(Z**2))
        if initial is None:
            initial = est
        if not np.isfinite(est) or est > _DIVERGENCE_FACTOR * max(initial, 1e-12):
            raise DivergenceError(
                f"objective estimate rose from {initial:.4g} to {est:.4g} at "
                f"iteration {t}; decrease the learning rate rho={rho}"
            )
        if t % log_every == 0 or t == config.T:
            model.telemetry.append((t, est, step))
            log.debug("iter %d objective %.6g rate %.3g", t, est, step)
        if callback is not None:
            callback(t, model)
        D = np.array(D)
    model.dictionary = np.asarray(model.dictionary)
    return model


def continuation_schedule(model, labeled, unlabeled, config, mu_values):
    """Train once per value of ``mu`` (descending), each stage starting where the last ended.

    Every stage gets ``config.T`` iterations and a fresh learning-rate
    schedule. Returns the list of stage models.
    """
    mu_values = list(mu_values)
    if not mu_values:
        raise ValueError("need at least one value of mu")
    if any(b > a for a, b in zip(mu_values, mu_values[1:])):
        raise ValueError("mu values must be sorted in descending order")
    stages = []
    for mu in mu_values:
        model = train(model, labeled, replace(config, mu=float(mu)), unlabeled)
        stages.append(model)
    return stages


def fit(task, X, labels, config, unlabeled=None, z0=None, warm_start=True):
    """Unsupervised initialization, convex warm start of W, then :func:`train`.

    ``X`` holds labeled signals as columns and ``unlabeled`` (optional) extra
    signals used for the initialization and for ``mu > 0``. ``z0`` is the
    initial transform for tasks with one.
    """
    X = np.asarray(X, dtype=np.float64)
    pool = X if unlabeled is None else np.concatenate([X, unlabeled], axis=1)
    enc = pool if z0 is None else np.asarray(z0) @ pool
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    D0 = init_unsupervised(
        SampleStream(enc, seed=seeds[0]),
        task.p,
        config.lambda1,
        config.lambda2,
        passes=config.init_passes,
        batch_size=config.init_batch,
        n_jobs=config.n_jobs,
    )
    model = TrainedModel(
        task, D0, np.zeros(task.w_shape), config.elastic_net, z=z0, config=config
    )
    if warm_start:
        model.w = warm_start_w(model, X, labels, config.nu)
    stream = SampleStream(X, labels, seed=seeds[1])
    ustream = None if unlabeled is None else SampleStream(unlabeled, seed=seeds[2])
    return train(model, stream, config, ustream)


def fit_one_vs_all(X, labels, q, p, config, warm_start=True):
    """Independent binary (dictionary, weight) pairs, one per class ``1..q``."""
    labels = np.asarray(labels)
    task = TaskSpec("binary_linear", m=X.shape[0], p=p)
    members = []
    for k in range(1, q + 1):
        y = np.where(labels == k, 1.0, -1.0)
        members.append(fit(task, X, y, replace(config, seed=config.seed + k), warm_start=warm_start))
    return OneVsAll(members)


def select_rho(model, X, labels, X_val, labels_val, config, candidates=RHO_GRID, iterations=500):
    """Short runs for each learning rate; keep the lowest validation objective.

    Diverging runs score ``inf``. Ties go to the smaller rate. Returns
    ``(best_rho, {rho: score})``.
    """
    scores = {}
    for rho in sorted(candidates):
        cfg = replace(config, rho=rho, T=iterations, t0=max(1, iterations // 10))
        try:
            m = train(model, SampleStream(X, labels, seed=config.seed), cfg)
            scores[rho] = task_objective(m, X_val, labels_val)
        except DivergenceError:
            scores[rho] = math.inf
        if not np.isfinite(scores[rho]):
            scores[rho] = math.inf
    best = min(scores, key=lambda r: (scores[r], r))
    return best, scores

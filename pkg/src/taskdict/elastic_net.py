"""Elastic-net sparse coding.

The primary solver is a homotopy (LARS-style) method that follows the
piecewise-linear solution path of

    min_a 0.5 * ||x - D a||^2 + lambda1 * ||a||_1 + 0.5 * lambda2 * ||a||^2

from ``lambda = ||D^T x||_inf`` down to ``lambda1``, keeping a Cholesky factor
of ``D_A^T D_A + lambda2 I`` for the current active set ``A``. The factor is
returned with the code so that downstream gradient computations can reuse it.

A cyclic coordinate-descent solver is provided as an independent reference.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from numba import njit

__all__ = [
    "ElasticNetParams",
    "SparseCode",
    "KKTReport",
    "SingularGramError",
    "ActiveSetLimitError",
    "as_dictionary",
    "objective",
    "solve",
    "batch_solve",
    "check_kkt",
    "active_closed_form",
    "solve_cd",
]


class SingularGramError(np.linalg.LinAlgError):
    """The regularized Gram matrix of the active set is not positive definite."""


class ActiveSetLimitError(RuntimeError):
    """The homotopy path needed more active atoms than allowed."""


@dataclass(frozen=True)
class ElasticNetParams:
    """Regularization weights and solver limits.

    Parameters
    ----------
    lambda1 : float
        Weight of the l1 penalty.
    lambda2 : float
        Weight of the squared l2 penalty (times 1/2).
    tol : float
        Tolerance used when certifying a solution with :func:`check_kkt`.
    max_active : int or None
        Cap on the active-set size. ``None`` means ``min(4p, 10m)``.
    allow_unregularized : bool
        Permit ``lambda1 == lambda2 == 0`` (plain least squares).
    """

    lambda1: float = 0.15
    lambda2: float = 0.0
    tol: float = 1e-6
    max_active: int | None = None
    allow_unregularized: bool = False

    def __post_init__(self):
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not (np.isfinite(l1) and np.isfinite(l2)) or l1 < 0 or l2 < 0:
            raise ValueError("lambda1 and lambda2 must be finite and nonnegative")
        if l1 == 0 and l2 == 0 and not self.allow_unregularized:
            raise ValueError(
                "lambda1 = lambda2 = 0 is unregularized least squares; "
                "pass allow_unregularized=True to request it"
            )
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_active is not None and self.max_active < 1:
            raise ValueError("max_active must be a positive integer")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    def active_cap(self, m, p):
        if self.max_active is not None:
            return int(self.max_active)
        return min(4 * p, 10 * m)


@dataclass(frozen=True)
class SparseCode:
    """Solution of one elastic-net problem.

    ``chol`` is the lower-triangular factor ``L`` with
    ``L @ L.T == D[:, active].T @ D[:, active] + lambda2 * I``.
    """

    alpha: np.ndarray
    active: np.ndarray
    signs: np.ndarray
    chol: np.ndarray
    objective: float = field(default=0.0)

    def __post_init__(self):
        for name in ("alpha", "active", "signs", "chol"):
            getattr(self, name).flags.writeable = False


@dataclass(frozen=True)
class KKTReport:
    """Optimality certificate of a candidate code.

    ``equality`` is the worst violation among nonzero coefficients,
    ``inequality`` among zero coefficients.
    """

    equality: float
    inequality: float
    tol: float

    @property
    def max_violation(self):
        return max(self.equality, self.inequality)

    @property
    def passed(self):
        return self.equality <= self.tol and self.inequality <= self.tol

    def __bool__(self):
        return self.passed


def as_dictionary(D, atol=1e-12):
    """Validate a dictionary and return it as a read-only float64 array.

    Columns are atoms and must have l2 norm at most ``1 + atol``.
    """
    D = np.array(D, dtype=np.float64, order="F")
    if D.ndim != 2 or D.shape[0] < 1 or D.shape[1] < 1:
        raise ValueError(f"dictionary must be a non-empty 2-D array, got {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("dictionary has non-finite entries")
    norms = np.sqrt(np.einsum("ij,ij->j", D, D))
    if np.any(norms > 1 + atol):
        j = int(np.argmax(norms))
        raise ValueError(f"atom {j} has norm {norms[j]:.6g} > 1")
    D.flags.writeable = False
    return D


def objective(x, D, alpha, lambda1, lambda2):
    r = x - D @ alpha
    return 0.5 * r @ r + lambda1 * np.abs(alpha).sum() + 0.5 * lambda2 * alpha @ alpha


def _check_signal(x, m):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m,):
        raise ValueError(f"signal has shape {x.shape}, expected ({m},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal has non-finite entries")
    return x


_OK, _SINGULAR, _CAP, _STUCK = 0, 1, 2, 3


@njit(cache=True)
def _chol_append(L, k, gram, active, j, lam2):
    """Grow the factor in ``L[:k, :k]`` by atom ``j``; False if singular."""
    g = gram[j, j] + lam2
    d2 = g
    for i in range(k):
        s = gram[active[i], j]
        for t in range(i):
            s -= L[i, t] * L[k, t]
        v = s / L[i, i]
        L[k, i] = v
        d2 -= v * v
    if not d2 > 1e-12 * max(g, 1.0):
        return False
    L[k, k] = np.sqrt(d2)
    return True


@njit(cache=True)
def _chol_delete(L, k, pos):
    """Remove row/column ``pos`` from the factor in ``L[:k, :k]`` in place."""
    for i in range(pos, k - 1):
        for t in range(i + 2):
            L[i, t] = L[i + 1, t]
    # rows pos..k-2 now carry one superdiagonal entry at column i+1
    for i in range(pos, k - 1):
        a = L[i, i]
        b = L[i, i + 1]
        r = np.hypot(a, b)
        c = a / r
        s = b / r
        for t in range(i, k - 1):
            u = L[t, i]
            w = L[t, i + 1] if i + 1 <= t + 1 else 0.0
            L[t, i] = c * u + s * w
            L[t, i + 1] = -s * u + c * w
        L[i, i + 1] = 0.0


@njit(cache=True)
def _chol_solve(L, k, b, out):
    for i in range(k):
        s = b[i]
        for t in range(i):
            s -= L[i, t] * out[t]
        out[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = out[i]
        for t in range(i + 1, k):
            s -= L[t, i] * out[t]
        out[i] = s / L[i, i]


@njit(cache=True)
def _path(gram, corr0, lam1, lam2, cap):
    """Homotopy from the top of the path down to ``lam1``.

    Returns ``(status, alpha, active, signs, L, k)``; the first ``k`` entries of
    ``active``/``signs`` and ``L[:k, :k]`` describe the final active set.
    """
    p = corr0.shape[0]
    kmax = min(cap, p)
    alpha = np.zeros(p)
    active = np.zeros(kmax + 1, np.int64)
    signs = np.zeros(kmax + 1)
    L = np.zeros((kmax + 1, kmax + 1))
    inactive = np.ones(p, np.bool_)
    corr = corr0.copy()
    u = np.zeros(kmax + 1)
    a = np.zeros(p)
    k = 0

    lam = 0.0
    for j in range(p):
        lam = max(lam, abs(corr[j]))
    if lam <= lam1:
        return _OK, alpha, active, signs, L, 0

    j0 = 0
    for j in range(p):
        if abs(corr[j]) >= lam - 1e-12:
            j0 = j
            break
    if kmax < 1:
        return _CAP, alpha, active, signs, L, 0
    if not _chol_append(L, 0, gram, active, j0, lam2):
        return _SINGULAR, alpha, active, signs, L, 0
    active[0] = j0
    signs[0] = 1.0 if corr[j0] > 0 else -1.0
    inactive[j0] = False
    k = 1
    banned = -1
    banned_sign = 0.0

    for _ in range(20 * kmax + 10 * p + 10):
        _chol_solve(L, k, signs, u)
        for j in range(p):
            s = 0.0
            for i in range(k):
                s += gram[j, active[i]] * u[i]
            a[j] = s

        step = lam - lam1
        event = 0  # 0 end, 1 add, 2 drop
        who = -1
        for j in range(p):
            if not inactive[j]:
                continue
            g = np.inf
            # a just-dropped atom sits on the bound it left; only the other one counts
            if a[j] < 1.0 and not (j == banned and banned_sign > 0):
                g = max(lam - corr[j], 0.0) / (1.0 - a[j])
            if a[j] > -1.0 and not (j == banned and banned_sign < 0):
                g2 = max(lam + corr[j], 0.0) / (1.0 + a[j])
                if g2 < g:
                    g = g2
            # strict improvement beyond the tie window keeps the lowest index
            if g < step and (event != 1 or g < step - 1e-12):
                step = g
                event = 1
                who = j
        for i in range(k):
            ai = alpha[active[i]]
            if ai * u[i] < 0:
                g = -ai / u[i]
                if g < step:
                    step = g
                    event = 2
                    who = i

        for i in range(k):
            alpha[active[i]] += step * u[i]
        lam -= step
        banned = -1

        if event == 0:
            return _OK, alpha, active, signs, L, k
        if event == 2:
            j = active[who]
            banned_sign = signs[who]
            alpha[j] = 0.0
            _chol_delete(L, k, who)
            for i in range(who, k - 1):
                active[i] = active[i + 1]
                signs[i] = signs[i + 1]
            k -= 1
            inactive[j] = True
            banned = j
        for j in range(p):
            s = corr0[j] - lam2 * alpha[j]
            for i in range(k):
                s -= gram[j, active[i]] * alpha[active[i]]
            corr[j] = s
        if event == 2 and k == 0:
            # only reachable through roundoff: restart from the largest correlation
            lam = 0.0
            for j in range(p):
                lam = max(lam, abs(corr[j]))
            if lam <= lam1:
                return _OK, alpha, active, signs, L, 0
            for j in range(p):
                if abs(corr[j]) >= lam - 1e-12:
                    who = j
                    break
            event = 1
            banned = -1
        if event == 1:
            if k + 1 > kmax:
                return _CAP, alpha, active, signs, L, k
            if not _chol_append(L, k, gram, active, who, lam2):
                return _SINGULAR, alpha, active, signs, L, k
            active[k] = who
            signs[k] = 1.0 if corr[who] > 0 else -1.0
            inactive[who] = False
            k += 1
    return _STUCK, alpha, active, signs, L, k


@njit(cache=True)
def _polish(corr0, lam1, alpha, active, signs, L, k):
    """Re-solve the final active set in closed form; drop roundoff sign flips."""
    p = alpha.shape[0]
    rhs = np.zeros(k)
    vals = np.zeros(k)
    while True:
        for i in range(k):
            rhs[i] = corr0[active[i]] - lam1 * signs[i]
        _chol_solve(L, k, rhs, vals)
        bad = -1
        for i in range(k):
            if vals[i] * signs[i] <= 0:
                bad = i
                break
        if bad < 0:
            break
        _chol_delete(L, k, bad)
        for i in range(bad, k - 1):
            active[i] = active[i + 1]
            signs[i] = signs[i + 1]
        k -= 1
    for j in range(p):
        alpha[j] = 0.0
    for i in range(k):
        alpha[active[i]] = vals[i]
    return k


def _run_path(x, D, gram, corr0, params):
    m, p = D.shape
    cap = params.active_cap(m, p)
    status, alpha, active, signs, L, k = _path(
        gram, corr0, params.lambda1, params.lambda2, cap
    )
    if status == _SINGULAR:
        raise SingularGramError(
            "regularized Gram matrix of the active set is singular; use lambda2 > 0"
        )
    if status == _CAP:
        raise ActiveSetLimitError(
            f"active set would exceed max_active={cap}; raise the cap or lambda1"
        )
    if status == _STUCK:
        raise RuntimeError("homotopy did not terminate")
    k = _polish(corr0, params.lambda1, alpha, active, signs, L, k)
    obj = objective(x, D, alpha, params.lambda1, params.lambda2)
    return SparseCode(
        alpha=alpha,
        active=active[:k].astype(np.intp),
        signs=signs[:k].copy(),
        chol=np.tril(L[:k, :k]),
        objective=float(obj),
    )


def solve(x, D, params, gram=None):
    """Elastic-net code of one signal.

    Parameters
    ----------
    x : array, shape (m,)
    D : array, shape (m, p)
        Dictionary with atoms as columns, each of norm at most one.
    params : ElasticNetParams
    gram : array, shape (p, p), optional
        Precomputed ``D.T @ D``.

    Returns
    -------
    SparseCode
    """
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2:
        raise ValueError("dictionary must be 2-D")
    x = _check_signal(x, D.shape[0])
    if not np.all(np.isfinite(D)):
        raise ValueError("dictionary has non-finite entries")
    if gram is None:
        gram = D.T @ D
    return _run_path(x, D, gram, D.T @ x, params)


def batch_solve(X, D, params, n_jobs=1):
    """Codes for every column of ``X`` (shape ``(m, n)``), sharing one Gram matrix.

    Results do not depend on ``n_jobs``.
    """
    D = np.asarray(D, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != D.shape[0]:
        raise ValueError(f"signals have shape {X.shape}, expected ({D.shape[0]}, n)")
    if X.shape[1] < 1:
        raise ValueError("need at least one signal")
    gram = D.T @ D

    def one(i):
        return solve(X[:, i], D, params, gram=gram)

    if n_jobs is None or n_jobs <= 1:
        return [one(i) for i in range(X.shape[1])]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(one, range(X.shape[1])))


def check_kkt(x, D, alpha, params, tol=None):
    """Check the elastic-net optimality conditions for ``alpha``.

    For nonzero coefficients the residual correlation
    ``d_j^T (x - D alpha) - lambda2 * alpha_j`` must equal
    ``lambda1 * sign(alpha_j)``; for zero ones its magnitude must not
    exceed ``lambda1``.
    """
    D = np.asarray(D, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    m, p = D.shape
    if x.shape != (m,) or alpha.shape != (p,):
        raise ValueError(
            f"shape mismatch: x {x.shape}, D {D.shape}, alpha {alpha.shape}"
        )
    c = D.T @ (x - D @ alpha) - params.lambda2 * alpha
    nz = alpha != 0
    eq = np.abs(c[nz] - params.lambda1 * np.sign(alpha[nz]))
    ineq = np.maximum(np.abs(c[~nz]) - params.lambda1, 0.0)
    return KKTReport(
        equality=float(eq.max()) if eq.size else 0.0,
        inequality=float(ineq.max()) if ineq.size else 0.0,
        tol=params.tol if tol is None else tol,
    )


def active_closed_form(x, D, active, signs, params):
    """Coefficients on ``active`` given their signs.

    Returns ``(D_A^T D_A + lambda2 I)^{-1} (D_A^T x - lambda1 * signs)``.
    """
    D = np.asarray(D, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    active = np.asarray(active, dtype=np.intp)
    signs = np.asarray(signs, dtype=np.float64)
    if active.size == 0:
        raise ValueError("active set is empty")
    if signs.shape != active.shape:
        raise ValueError("signs and active set differ in length")
    DA = D[:, active]
    H = DA.T @ DA + params.lambda2 * np.eye(active.size)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SingularGramError(
            "regularized Gram matrix of the active set is singular; use lambda2 > 0"
        ) from None
    if np.min(np.diag(L)) ** 2 <= 1e-12 * max(np.max(np.diag(H)), 1.0):
        raise SingularGramError(
            "regularized Gram matrix of the active set is singular; use lambda2 > 0"
        )
    rhs = DA.T @ x - params.lambda1 * signs
    y = solve_triangular(L, rhs, lower=True)
    return solve_triangular(L, y, lower=True, trans="T")


@njit(cache=True)
def _cd_sweeps(G, c0, lam1, lam2, tol, max_sweeps):
    p = G.shape[0]
    a = np.zeros(p)
    Ga = np.zeros(p)
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(p):
            h = G[j, j] + lam2
            if h == 0:
                continue
            z = c0[j] - Ga[j] + G[j, j] * a[j]
            if z > lam1:
                new = (z - lam1) / h
            elif z < -lam1:
                new = (z + lam1) / h
            else:
                new = 0.0
            d = new - a[j]
            if d != 0.0:
                for i in range(p):
                    Ga[i] += d * G[i, j]
                a[j] = new
                delta = max(delta, abs(d))
        if delta <= tol:
            break
    return a


def solve_cd(x, D, lambda1, lambda2, tol=1e-14, max_sweeps=100000):
    """Cyclic coordinate descent for the same problem; slow, used as a reference.

    Stops when a full sweep changes no coefficient by more than ``tol``.
    """
    D = np.asarray(D, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    G = np.ascontiguousarray(D.T @ D)
    return _cd_sweeps(G, D.T @ x, float(lambda1), float(lambda2), float(tol), int(max_sweeps))

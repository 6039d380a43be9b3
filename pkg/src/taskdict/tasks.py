"""Task heads: which loss, which encoder input and which prediction rule.

Class labels for multi-class heads are 1-based (``1..q``). Binary labels are
-1/+1 and a zero score is classified as +1. Ties between class scores go to
the lowest class index.
"""

from dataclasses import dataclass

import numpy as np

from .losses import TaskLoss

__all__ = [
    "TASK_KINDS",
    "TaskSpec",
    "predict_regression",
    "classify_binary",
    "classify_bilinear",
    "classify_multiclass",
    "cs_reconstruct",
    "predict",
    "make_baseline_z",
    "overcomplete_dct",
]

TASK_KINDS = (
    "regression",
    "binary_linear",
    "binary_bilinear",
    "multiclass_ova",
    "multiclass_softmax",
    "multiclass_regression",
    "compressed_sensing",
)

_LOSS_OF = {
    "regression": "square",
    "binary_linear": "logistic",
    "binary_bilinear": "bilinear_logistic",
    "multiclass_ova": "logistic",
    "multiclass_softmax": "softmax",
    "multiclass_regression": "square",
    "compressed_sensing": "square",
}


@dataclass(frozen=True)
class TaskSpec:
    """Shape bookkeeping for one task.

    Parameters
    ----------
    kind : str
        One of :data:`TASK_KINDS`.
    m : int
        Signal dimension.
    p : int
        Number of atoms.
    q : int, optional
        Target dimension (regression) or number of classes. Compressed sensing
        reconstructs the signal itself, so ``q`` is forced to ``m``.
    r : int, optional
        Rows of the linear transform ``Z``; the dictionary then has ``r`` rows.
        Required for compressed sensing, optional for the other kinds.
    """

    kind: str
    m: int
    p: int
    q: int = 1
    r: int | None = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task {self.kind!r}; choose from {TASK_KINDS}")
        if self.m < 1 or self.p < 1 or self.q < 1:
            raise ValueError("m, p and q must be positive")
        if self.kind == "compressed_sensing":
            if self.r is None:
                raise ValueError("compressed sensing needs the number of measurements r")
            object.__setattr__(self, "q", self.m)
        if self.r is not None and self.r < 1:
            raise ValueError("r must be positive")
        if self.kind in ("binary_linear", "binary_bilinear"):
            object.__setattr__(self, "q", 1)

    @property
    def has_transform(self):
        return self.r is not None

    @property
    def code_dim(self):
        """Dimension of the signal seen by the sparse coder."""
        return self.r if self.has_transform else self.m

    @property
    def loss(self):
        return TaskLoss(_LOSS_OF[self.kind])

    @property
    def w_shape(self):
        if self.kind in ("binary_linear", "multiclass_ova"):
            return (self.p,)
        if self.kind == "binary_bilinear":
            return (self.m, self.p)
        return (self.q, self.p)

    def target(self, y, x=None):
        """Loss-ready target for a raw label ``y``.

        Multi-class regression turns a label into a one-hot vector; compressed
        sensing uses the signal itself when ``y`` is None.
        """
        if self.kind == "multiclass_regression":
            k = int(y)
            if k != y or not 1 <= k <= self.q:
                raise ValueError(f"class label must be in 1..{self.q}, got {y!r}")
            t = np.zeros(self.q)
            t[k - 1] = 1.0
            return t
        if self.kind == "compressed_sensing" and y is None:
            return np.asarray(x, dtype=np.float64)
        return y


def _code(model, x):
    return model.encode(x).alpha


def predict_regression(model, x):
    """``W alpha*(x, D)``."""
    return np.asarray(model.w) @ _code(model, x)


def classify_binary(model, x):
    """Return ``(label, score)`` with ``score = w^T alpha*(x, D)``."""
    score = float(np.asarray(model.w) @ _code(model, x))
    return (1 if score >= 0 else -1), score


def classify_bilinear(model, x):
    """Return ``(label, score)`` with ``score = x^T W alpha*(x, D)``."""
    x = np.asarray(x, dtype=np.float64)
    score = float(x @ np.asarray(model.w) @ _code(model, x))
    return (1 if score >= 0 else -1), score


def _argmax_label(scores):
    return int(np.argmax(scores)) + 1


def classify_multiclass(model, x):
    """Return ``(label, scores)`` with a 1-based label.

    ``model`` is either a :class:`~taskdict.model.OneVsAll` (one dictionary and
    weight vector per class) or a single model of kind ``multiclass_softmax``
    or ``multiclass_regression``.
    """
    members = getattr(model, "members", None)
    if members is not None:
        if not members:
            raise ValueError("one-vs-all model has no classes")
        scores = np.array([classify_binary(mk, x)[1] for mk in members])
    else:
        if model.task.kind not in ("multiclass_softmax", "multiclass_regression"):
            raise ValueError(f"{model.task.kind} is not a multi-class head")
        scores = np.asarray(model.w) @ _code(model, x)
    return _argmax_label(scores), scores


def cs_reconstruct(model, x):
    """``W alpha*(Z x, D)``: signal estimate from its ``r`` linear measurements."""
    if model.z is None:
        raise ValueError("compressed sensing model has no sensing matrix Z")
    return np.asarray(model.w) @ _code(model, x)


def predict(model, x):
    """Dispatch to the prediction rule of the model's task.

    Returns a vector for regression-type heads and ``(label, score)`` for
    classifiers.
    """
    members = getattr(model, "members", None)
    if members is not None:
        return classify_multiclass(model, x)
    kind = model.task.kind
    if kind == "regression":
        return predict_regression(model, x)
    if kind == "compressed_sensing":
        return cs_reconstruct(model, x)
    if kind == "binary_linear":
        return classify_binary(model, x)
    if kind == "binary_bilinear":
        return classify_bilinear(model, x)
    return classify_multiclass(model, x)


def make_baseline_z(kind, r, m, data=None, rng=None):
    """Fixed sensing matrices used as baselines or initializations.

    ``random_gaussian`` draws i.i.d. entries with standard deviation
    ``1/sqrt(m)``; ``pca`` returns the top-``r`` principal directions of the
    centered ``data`` (shape ``(m, n)``, signals as columns) as rows;
    ``identity`` needs ``r == m``.
    """
    if kind == "identity":
        if r != m:
            raise ValueError("identity sensing matrix needs r == m")
        return np.eye(m)
    if kind == "random_gaussian":
        rng = np.random.default_rng(rng)
        return rng.normal(0.0, 1.0 / np.sqrt(m), size=(r, m))
    if kind == "pca":
        if data is None:
            raise ValueError("pca sensing matrix needs data")
        if r > m:
            raise ValueError(f"pca gives at most m={m} directions, asked for r={r}")
        X = np.asarray(data, dtype=np.float64)
        if X.shape[0] != m:
            raise ValueError(f"data must have shape ({m}, n), got {X.shape}")
        Xc = X - X.mean(axis=1, keepdims=True)
        U, _, _ = np.linalg.svd(Xc, full_matrices=False)
        Z = U[:, :r].T
        # deterministic orientation: largest-magnitude entry of each row positive
        flip = np.sign(Z[np.arange(r), np.argmax(np.abs(Z), axis=1)])
        return Z * flip[:, None]
    raise ValueError(f"unknown sensing matrix kind {kind!r}")


def overcomplete_dct(side, p):
    """Overcomplete separable 2-D DCT for ``side x side`` patches.

    Built from a 1-D dictionary with ``k = ceil(sqrt(p))`` evenly spaced
    frequencies, mean-removed on the non-constant atoms, normalized, then
    combined by a Kronecker product; the first ``p`` of the ``k^2`` atoms are
    kept. Shape ``(side**2, p)``.
    """
    k = int(np.ceil(np.sqrt(p)))
    t = np.arange(side)[:, None]
    base = np.cos(t * np.arange(k)[None, :] * np.pi / k)
    base[:, 1:] -= base[:, 1:].mean(axis=0)
    base /= np.linalg.norm(base, axis=0)
    return np.kron(base, base)[:, :p]

"""Model containers shared by the trainer, the task heads and model I/O."""

from dataclasses import dataclass, field, replace

import numpy as np

from .elastic_net import ElasticNetParams, as_dictionary, batch_solve, solve
from .tasks import TaskSpec

__all__ = ["TrainedModel", "OneVsAll"]


@dataclass
class TrainedModel:
    """Dictionary ``D``, task parameters ``W`` and optional transform ``Z``.

    Signals are encoded as ``alpha*(Z x, D)`` (or ``alpha*(x, D)`` without a
    transform). ``telemetry`` holds ``(iteration, objective, learning_rate)``
    rows written by the trainer.
    """

    task: TaskSpec
    dictionary: np.ndarray
    w: np.ndarray
    params: ElasticNetParams
    z: np.ndarray | None = None
    config: object = None
    telemetry: list = field(default_factory=list)

    def __post_init__(self):
        self.dictionary = as_dictionary(self.dictionary)
        self.w = np.array(self.w, dtype=np.float64)
        t = self.task
        if self.dictionary.shape != (t.code_dim, t.p):
            raise ValueError(
                f"dictionary shape {self.dictionary.shape} does not match "
                f"task ({t.code_dim}, {t.p})"
            )
        if self.w.shape != t.w_shape:
            raise ValueError(f"W shape {self.w.shape} does not match task {t.w_shape}")
        if t.has_transform:
            if self.z is None:
                raise ValueError(f"task {t.kind} with r={t.r} needs a transform Z")
            self.z = np.array(self.z, dtype=np.float64)
            if self.z.shape != (t.r, t.m):
                raise ValueError(f"Z shape {self.z.shape} does not match ({t.r}, {t.m})")
        elif self.z is not None:
            raise ValueError("task has no transform but Z was given")

    def encoder_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.z @ x if self.z is not None else x

    def encode(self, x):
        return solve(self.encoder_input(x), self.dictionary, self.params)

    def encode_batch(self, X, n_jobs=1):
        """Codes of the columns of ``X`` (shape ``(m, n)``)."""
        X = np.asarray(X, dtype=np.float64)
        Xt = self.z @ X if self.z is not None else X
        return batch_solve(Xt, self.dictionary, self.params, n_jobs=n_jobs)

    def copy(self, **changes):
        """Deep copy of the parameter arrays, with optional field replacements."""
        base = dict(
            dictionary=self.dictionary.copy(),
            w=self.w.copy(),
            z=None if self.z is None else self.z.copy(),
            telemetry=list(self.telemetry),
        )
        base.update(changes)
        return replace(self, **base)


@dataclass
class OneVsAll:
    """One binary (dictionary, weight vector) pair per class; labels are ``1..q``."""

    members: list

    @property
    def q(self):
        return len(self.members)

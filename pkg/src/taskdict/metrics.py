"""Evaluation metrics and batch prediction."""

import math

import numpy as np

from .tasks import predict

__all__ = ["error_rate", "mse", "psnr", "predict_all", "evaluate"]

_LINEAR_HEADS = ("regression", "compressed_sensing")


def error_rate(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.size == 0:
        raise ValueError("empty evaluation set")
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return float(np.mean(pred != truth))


def mse(estimate, truth):
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.size == 0:
        raise ValueError("empty evaluation set")
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch {estimate.shape} vs {truth.shape}")
    return float(np.mean((estimate - truth) ** 2))


def psnr(estimate, truth, peak=255.0):
    """``10 log10(peak^2 / MSE)`` in dB; ``inf`` for a perfect estimate.

    Images in [0, 1] should pass ``peak=1``.
    """
    e = mse(estimate, truth)
    return math.inf if e == 0 else 10.0 * math.log10(peak**2 / e)


def predict_all(model, X):
    """Predictions for the columns of ``X``.

    Returns ``(outputs, scores)``: labels and scores for classifiers, an
    ``(q, n)`` array and None for regression and reconstruction heads.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] == 0:
        raise ValueError("empty evaluation set")
    task = getattr(model, "task", None)
    if task is not None and task.kind in _LINEAR_HEADS:
        codes = model.encode_batch(X)
        return model.w @ np.column_stack([c.alpha for c in codes]), None
    res = [predict(model, X[:, i]) for i in range(X.shape[1])]
    if res and isinstance(res[0], tuple):
        labels = np.array([r[0] for r in res])
        scores = np.array([r[1] for r in res])
        return labels, scores
    return np.column_stack(res), None


def evaluate(model, X, targets):
    """Metric report for a labeled set: error rate for classifiers, MSE otherwise."""
    out, scores = predict_all(model, X)
    if scores is not None:
        return {"n": X.shape[1], "error_rate": error_rate(out, np.asarray(targets))}
    T = np.asarray(targets, dtype=np.float64).reshape(out.shape)
    e = mse(out, T)
    return {"n": X.shape[1], "mse": e, "mse_x100": 100.0 * e}

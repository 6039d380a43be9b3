"""Synthetic two-class data drawn from planted dictionaries.

Each class has its own dictionary: a block of atoms shared by both classes
plus a few private atoms. A signal is a random sparse combination of shared
atoms (which carry most of the energy), one weaker private atom of its class
added with a positive coefficient, and white noise. Reconstruction alone
favours the shared atoms, so a dictionary learned without labels tends to
blur the private ones that separate the classes.
"""

import numpy as np

__all__ = ["planted_dictionaries", "planted_two_class"]


def planted_dictionaries(m=30, shared=20, private=5, seed=1000):
    """``(S, [P1, P2])``: shared atoms and the private atoms of each class."""
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((m, shared))
    S /= np.linalg.norm(S, axis=0)
    P = []
    for _ in range(2):
        B = rng.standard_normal((m, private))
        P.append(B / np.linalg.norm(B, axis=0))
    return S, P


def planted_two_class(
    n,
    seed,
    m=30,
    shared=20,
    private=5,
    k_shared=3,
    private_amp=0.35,
    noise=0.1,
    dict_seed=1000,
):
    """``n`` unit-norm signals (columns of ``X``) and labels ``y`` in {-1, +1}.

    The dictionaries depend only on ``dict_seed``, so training and test sets
    drawn with different ``seed`` values share them. Label +1 uses the first
    class dictionary.
    """
    S, P = planted_dictionaries(m, shared, private, dict_seed)
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    X = np.empty((m, n))
    for i in range(n):
        idx = rng.choice(shared, k_shared, replace=False)
        x = S[:, idx] @ rng.standard_normal(k_shared)
        own = P[0] if y[i] > 0 else P[1]
        x += own[:, rng.integers(private)] * private_amp * (1 + 0.3 * rng.random())
        x += noise * rng.standard_normal(m) / np.sqrt(m)
        X[:, i] = x / np.linalg.norm(x)
    return X, y

"""Sample streams, patch handling, halftoning and small image utilities.

Signals are stored as columns of an ``(m, n)`` array throughout the package.
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SampleStream",
    "PatchConfig",
    "normalize",
    "normalize_columns",
    "extract_patches",
    "reconstruct_image",
    "shift_augment",
    "floyd_steinberg",
    "halftone_pairs",
]


class SampleStream:
    """Cycle over a finite dataset in a fresh random order every epoch.

    Parameters
    ----------
    X : array, shape (m, n)
        Signals as columns.
    Y : array, optional
        Labels of shape ``(n,)`` or targets of shape ``(q, n)``.
    seed : int or numpy Generator
    """

    def __init__(self, X, Y=None, seed=0):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"signals must be a 2-D (m, n) array, got {X.shape}")
        n = X.shape[1]
        if n == 0:
            raise ValueError("dataset is empty")
        if Y is not None:
            Y = np.asarray(Y)
            if Y.shape[-1] != n:
                raise ValueError(f"{n} signals but labels of shape {Y.shape}")
        self.X = X
        self.Y = Y
        self.rng = np.random.default_rng(seed)
        self.epoch = 0
        self._order = self.rng.permutation(n)
        self._pos = 0

    def __len__(self):
        return self.X.shape[1]

    @property
    def labeled(self):
        return self.Y is not None

    def next_index(self):
        if self._pos == len(self._order):
            self.epoch += 1
            self._order = self.rng.permutation(len(self))
            self._pos = 0
        i = int(self._order[self._pos])
        self._pos += 1
        return i

    def next_batch(self, size):
        return np.array([self.next_index() for _ in range(size)], dtype=np.intp)

    def label(self, i):
        return self.Y[..., i]

    def __iter__(self):
        return self

    def __next__(self):
        """``(y, x)`` for labeled data, ``x`` otherwise; never exhausts."""
        i = self.next_index()
        if self.Y is None:
            return self.X[:, i]
        return self.label(i), self.X[:, i]


@dataclass(frozen=True)
class PatchConfig:
    side: int = 8
    stride: int = 1
    zero_mean: bool = True
    unit_norm: bool = True

    def __post_init__(self):
        if self.side < 1 or self.stride < 1:
            raise ValueError("patch side and stride must be at least 1")

    @property
    def m(self):
        return self.side * self.side


def _zero_cutoff(raw_norms):
    # centering large constant vectors leaves roundoff well above 1e-10
    return 1e-10 * np.maximum(1.0, raw_norms)


def normalize(x, zero_mean=True, unit_norm=True):
    """Center and scale to unit l2 norm; near-zero vectors become exactly zero.

    "Near zero" means a centered norm below ``1e-10 * max(1, ||x||)``.
    """
    x = np.asarray(x, dtype=np.float64)
    cut = _zero_cutoff(np.linalg.norm(x))
    if zero_mean:
        x = x - x.mean()
        x -= x.mean()  # second pass removes the roundoff of the first
    if unit_norm:
        n = np.linalg.norm(x)
        if n > cut:
            return x / n
        return np.zeros_like(x)
    return x


def normalize_columns(X, zero_mean=True, unit_norm=True):
    X = np.asarray(X, dtype=np.float64)
    cut = _zero_cutoff(np.linalg.norm(X, axis=0))
    if zero_mean:
        X = X - X.mean(axis=0, keepdims=True)
        X -= X.mean(axis=0, keepdims=True)
    if unit_norm:
        n = np.linalg.norm(X, axis=0)
        ok = n > cut
        X = np.where(ok, X / np.where(ok, n, 1.0), 0.0)
    return X


def extract_patches(image, cfg):
    """All ``side x side`` patches at the given stride, row-major order.

    Returns
    -------
    patches : array, shape (side**2, n)
        Flattened (row-major) patches as columns, normalized per ``cfg``.
    positions : array, shape (n, 2)
        Top-left ``(row, col)`` of each patch.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    h, w = image.shape
    l, s = cfg.side, cfg.stride
    if h < l or w < l:
        raise ValueError(f"image {h}x{w} is smaller than the {l}x{l} patch")
    win = np.lib.stride_tricks.sliding_window_view(image, (l, l))[::s, ::s]
    nr, nc = win.shape[:2]
    patches = win.reshape(nr * nc, l * l).T
    rows, cols = np.meshgrid(np.arange(nr) * s, np.arange(nc) * s, indexing="ij")
    positions = np.stack([rows.ravel(), cols.ravel()], axis=1)
    patches = normalize_columns(patches, cfg.zero_mean, cfg.unit_norm)
    return patches, positions


def reconstruct_image(patches, positions, shape):
    """Average overlapping patch estimates back into an image of ``shape``."""
    patches = np.asarray(patches, dtype=np.float64)
    h, w = shape
    l = int(round(np.sqrt(patches.shape[0])))
    if l * l != patches.shape[0]:
        raise ValueError("patch length is not a perfect square")
    acc = np.zeros((h, w))
    cnt = np.zeros((h, w))
    for k, (r, c) in enumerate(np.asarray(positions)):
        acc[r : r + l, c : c + l] += patches[:, k].reshape(l, l)
        cnt[r : r + l, c : c + l] += 1
    if np.any(cnt == 0):
        r, c = np.argwhere(cnt == 0)[0]
        raise ValueError(f"pixel ({r}, {c}) is not covered by any patch")
    return acc / cnt


def shift_augment(image):
    """The image and its four one-pixel shifts, zero padded.

    Order: original, up, down, left, right.
    """
    image = np.asarray(image)
    if image.ndim != 2 or min(image.shape) < 3:
        raise ValueError("expected a 2-D image of at least 3x3 pixels")
    up = np.zeros_like(image)
    up[:-1] = image[1:]
    down = np.zeros_like(image)
    down[1:] = image[:-1]
    left = np.zeros_like(image)
    left[:, :-1] = image[:, 1:]
    right = np.zeros_like(image)
    right[:, 1:] = image[:, :-1]
    return [image.copy(), up, down, left, right]


def floyd_steinberg(image):
    """Binary halftone by Floyd-Steinberg error diffusion (raster scan, threshold 0.5)."""
    img = np.array(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    if img.min(initial=0.0) < 0 or img.max(initial=0.0) > 1:
        warnings.warn("intensities outside [0, 1] were clamped", stacklevel=2)
        np.clip(img, 0.0, 1.0, out=img)
    h, w = img.shape
    out = np.zeros((h, w))
    # padded buffer avoids boundary tests inside the loop
    buf = np.zeros((h + 1, w + 2))
    buf[:h, 1 : w + 1] = img
    rows = buf.tolist()
    for i in range(h):
        cur, nxt = rows[i], rows[i + 1]
        orow = out[i]
        for j in range(1, w + 1):
            v = cur[j]
            b = 1.0 if v >= 0.5 else 0.0
            orow[j - 1] = b
            e = v - b
            cur[j + 1] += e * 0.4375
            nxt[j - 1] += e * 0.1875
            nxt[j] += e * 0.3125
            nxt[j + 1] += e * 0.0625
    return out


def halftone_pairs(images, cfg, n=None, rng=None):
    """Patch pairs ``(halftone, original)`` drawn from a list of images in [0, 1].

    Returns ``(X, Y)`` with halftone patches ``X`` and grayscale patches ``Y``
    as columns, unnormalized. When ``n`` is given, that many pairs are drawn
    uniformly without replacement from the pooled patches.
    """
    xs, ys = [], []
    raw = PatchConfig(cfg.side, cfg.stride, zero_mean=False, unit_norm=False)
    for im in images:
        ht = floyd_steinberg(im)
        xs.append(extract_patches(ht, raw)[0])
        ys.append(extract_patches(im, raw)[0])
    X = np.concatenate(xs, axis=1)
    Y = np.concatenate(ys, axis=1)
    if n is not None and n < X.shape[1]:
        idx = np.sort(np.random.default_rng(rng).choice(X.shape[1], n, replace=False))
        X, Y = X[:, idx], Y[:, idx]
    return X, Y

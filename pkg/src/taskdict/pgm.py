"""Binary 8-bit PGM (P5) images and plain-text dataset manifests."""

import os
import re

import numpy as np

__all__ = ["PGMError", "read_pgm", "write_pgm", "read_manifest"]


class PGMError(ValueError):
    """Malformed or unsupported image file."""


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path):
    """Read a binary P5 file with maxval 255 as floats in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise PGMError(f"{path}: truncated header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise PGMError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise PGMError(f"{path}: non-integer header field") from None
    if maxval != 255:
        raise PGMError(f"{path}: only maxval 255 is supported, got {maxval}")
    if w < 1 or h < 1:
        raise PGMError(f"{path}: empty image {w}x{h}")
    # exactly one whitespace byte separates header and pixels
    pos += 1
    data = raw[pos : pos + w * h]
    if len(data) != w * h:
        raise PGMError(f"{path}: expected {w * h} pixel bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w) / 255.0


def write_pgm(path, image):
    """Write an image in [0, 1] (or uint8) as binary P5, rounding to 8 bits."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise PGMError("expected a 2-D grayscale image")
    if image.dtype != np.uint8:
        image = np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255)
        image = image.astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(image.tobytes())


def read_manifest(path):
    """Entries ``(path, label)`` of a manifest, one per non-blank line.

    Relative paths resolve against the manifest's directory; the label is the
    optional second whitespace-separated field (None when absent). Lines
    starting with ``#`` are comments.
    """
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) > 2:
                raise ValueError(f"{path}:{lineno}: expected 'path [label]'")
            p = parts[0] if os.path.isabs(parts[0]) else os.path.join(base, parts[0])
            out.append((p, parts[1] if len(parts) == 2 else None))
    return out

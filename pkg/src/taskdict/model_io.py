"""Model files.

Layout::

    uint64 (little endian)   length N of the header in bytes
    N bytes                  UTF-8 text header, one ``key = value`` per line
    payload                  float64 little endian, column-major matrices

The payload holds, per member model, ``D`` then ``W`` then ``Z`` (when the
task has a transform). Plain models have one member; one-vs-all files have
``members = q``. Floats in the header are written with ``repr`` so that they
read back exactly; saving a loaded model therefore reproduces the file byte
for byte.
"""

import hashlib
import struct

import numpy as np

from .elastic_net import ElasticNetParams
from .model import OneVsAll, TrainedModel
from .tasks import TaskSpec

__all__ = ["FORMAT", "ModelFormatError", "dumps", "loads", "save", "load", "file_hash"]

FORMAT = "taskdict-model 1"
_LEN = struct.Struct("<Q")
_F64 = np.dtype("<f8")


class ModelFormatError(ValueError):
    """Corrupt or inconsistent model file."""


def _header(model, members):
    t, par = model.task, model.params
    rows = [
        ("format", FORMAT),
        ("task", t.kind),
        ("m", t.m),
        ("p", t.p),
        ("q", t.q),
        ("r", "none" if t.r is None else t.r),
        ("loss", t.loss.kind),
        ("lambda1", repr(par.lambda1)),
        ("lambda2", repr(par.lambda2)),
        ("tol", repr(par.tol)),
        ("max_active", "none" if par.max_active is None else par.max_active),
        ("allow_unregularized", int(par.allow_unregularized)),
        ("members", members),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows).encode("utf-8")


def _payload(arr):
    return np.asarray(arr, dtype=_F64).tobytes(order="F")


def dumps(model):
    """Serialize a :class:`TrainedModel` or :class:`OneVsAll` to bytes."""
    if isinstance(model, OneVsAll):
        members = list(model.members)
        if not members:
            raise ValueError("one-vs-all model without members")
        ref = members[0]
        for mm in members[1:]:
            if mm.task != ref.task or mm.params != ref.params:
                raise ValueError("one-vs-all members must share task and parameters")
        head = _header(ref, len(members)).replace(
            b"task = binary_linear", b"task = multiclass_ova"
        )
    else:
        members = [model]
        head = _header(model, 0)
    parts = [_LEN.pack(len(head)), head]
    for mm in members:
        parts += [_payload(mm.dictionary), _payload(mm.w)]
        if mm.z is not None:
            parts.append(_payload(mm.z))
    return b"".join(parts)


def _parse_header(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        key, sep, val = line.partition(" = ")
        if not sep or not key:
            raise ModelFormatError(f"header line {lineno} is not 'key = value': {line!r}")
        out[key] = val
    need = {"format", "task", "m", "p", "q", "r", "lambda1", "lambda2", "tol",
            "max_active", "allow_unregularized", "members"}
    missing = need - out.keys()
    if missing:
        raise ModelFormatError(f"header lacks {sorted(missing)}")
    if out["format"] != FORMAT:
        raise ModelFormatError(f"unsupported format {out['format']!r}")
    return out


def loads(buf):
    """Inverse of :func:`dumps`."""
    buf = memoryview(buf)
    if len(buf) < _LEN.size:
        raise ModelFormatError("file too short for a header length")
    (n,) = _LEN.unpack_from(buf, 0)
    if _LEN.size + n > len(buf):
        raise ModelFormatError("header length runs past the end of the file")
    try:
        h = _parse_header(bytes(buf[_LEN.size : _LEN.size + n]).decode("utf-8"))
        none_or_int = lambda v: None if v == "none" else int(v)
        kind = h["task"]
        members = int(h["members"])
        m, p, q, r = int(h["m"]), int(h["p"]), int(h["q"]), none_or_int(h["r"])
        params = ElasticNetParams(
            float(h["lambda1"]),
            float(h["lambda2"]),
            tol=float(h["tol"]),
            max_active=none_or_int(h["max_active"]),
            allow_unregularized=bool(int(h["allow_unregularized"])),
        )
        if kind == "multiclass_ova":
            if members < 1:
                raise ModelFormatError("one-vs-all file needs members >= 1")
            task = TaskSpec("binary_linear", m=m, p=p, r=r)
        else:
            task = TaskSpec(kind, m=m, p=p, q=q, r=r)
    except ModelFormatError:
        raise
    except (ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"bad header: {exc}") from None
    if task.loss.kind != h.get("loss", task.loss.kind):
        raise ModelFormatError(f"loss {h['loss']!r} does not match task {kind!r}")

    shapes = [(task.code_dim, p), task.w_shape] + ([(r, m)] if r is not None else [])
    per = sum(int(np.prod(s)) for s in shapes)
    count = max(members, 1)
    body = buf[_LEN.size + n :]
    if len(body) != per * count * 8:
        raise ModelFormatError(
            f"payload holds {len(body)} bytes, header implies {per * count * 8}"
        )
    vals = np.frombuffer(body, dtype=_F64)
    out, off = [], 0
    for _ in range(count):
        mats = []
        for s in shapes:
            k = int(np.prod(s))
            mats.append(vals[off : off + k].reshape(s, order="F").astype(np.float64))
            off += k
        z = mats[2] if r is not None else None
        try:
            out.append(TrainedModel(task, mats[0], mats[1], params, z=z))
        except ValueError as exc:
            raise ModelFormatError(str(exc)) from None
    return OneVsAll(out) if kind == "multiclass_ova" else out[0]


def save(model, path):
    data = dumps(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def file_hash(path):
    """SHA-256 hex digest of a file."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

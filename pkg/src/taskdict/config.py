"""Run configuration files.

INI-style: ``[section]`` headers and ``key = value`` lines, ``#`` or ``;``
comments. Relative paths resolve against the directory of the file. Errors
name the offending line. Example::

    [task]
    kind = regression
    p = 20
    q = 2

    [data]
    signals = train_x.txt      # one signal per row
    labels = train_y.txt       # one label or target vector per row
    validation_fraction = 0.2

    [train]
    lambda1 = 0.15
    rho = 0.5
    T = 200

    [output]
    model = model.bin
"""

import configparser
import os
import re
from dataclasses import dataclass, field, fields

from .trainer import LAMBDA1_GRID, RHO_GRID, TrainConfig
from .tasks import TASK_KINDS

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message carries the file and line."""


# keys are case-insensitive; "T" is spelled "t" after parsing
_TRAIN_FIELDS = {f.name.lower(): f for f in fields(TrainConfig)}
_SECTIONS = {
    "task": {"kind", "p", "q", "r", "z_init"},
    "data": {
        "signals", "labels", "unlabeled", "manifest", "patch_side", "patch_stride",
        "normalize", "validation_fraction",
    },
    "train": set(_TRAIN_FIELDS),
    "search": {"lambda1", "rho", "iterations"},
    "output": {"model", "telemetry"},
}
_Z_INITS = ("random_gaussian", "pca", "identity")


@dataclass
class RunConfig:
    """Everything a CLI run needs, with paths made absolute."""

    kind: str
    p: int
    q: int = 1
    r: int | None = None
    z_init: str = "random_gaussian"
    signals: str | None = None
    labels: str | None = None
    unlabeled: str | None = None
    manifest: str | None = None
    patch_side: int | None = None
    patch_stride: int = 1
    normalize: bool = True
    validation_fraction: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)
    lambda1_grid: tuple = LAMBDA1_GRID
    rho_grid: tuple = RHO_GRID
    search_iterations: int = 500
    model_path: str | None = None
    telemetry_path: str | None = None
    source: str | None = None


def _line_index(text):
    """Map ``(section, key)`` to its 1-based line number."""
    where, sec = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            sec = m.group(1).strip().lower()
            where[(sec, None)] = i
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and sec is not None:
            where[(sec, m.group(1).strip().lower())] = i
    return where


def _strip_comment(v):
    return re.split(r"\s[#;]", v, maxsplit=1)[0].strip()


def parse_config(text, source="<config>", base_dir="."):
    """Parse configuration text into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line, bad = exc.errors[0]
            msg = f"expected 'key = value', got {bad.strip()!r}"
        else:
            msg = exc.message if hasattr(exc, "message") else str(exc)
        loc = f"{source}:{line}" if line else source
        raise ConfigError(f"{loc}: {msg}") from None
    lines = _line_index(text)

    def fail(sec, key, msg):
        line = lines.get((sec, key)) or lines.get((sec, None))
        loc = f"{source}:{line}" if line else source
        raise ConfigError(f"{loc}: {msg}")

    for sec in cp.sections():
        if sec not in _SECTIONS:
            fail(sec, None, f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _SECTIONS[sec]:
                fail(sec, key, f"unknown key {key!r} in [{sec}]")
    if "task" not in cp:
        raise ConfigError(f"{source}: missing [task] section")

    def get(sec, key, conv=str, default=None):
        if sec not in cp or key not in cp[sec]:
            return default
        raw = _strip_comment(cp[sec][key])
        try:
            return conv(raw)
        except ValueError as exc:
            fail(sec, key, f"bad value for {key}: {raw!r} ({exc})")

    def path(v):
        if not v:
            raise ValueError("empty path")
        return v if os.path.isabs(v) else os.path.normpath(os.path.join(base_dir, v))

    def boolean(v):
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected true or false")

    def optional_int(v):
        return None if v.lower() == "none" else int(v)

    def optional_float(v):
        return None if v.lower() == "none" else float(v)

    def floats(v):
        vals = tuple(float(s) for s in v.replace(",", " ").split())
        if not vals:
            raise ValueError("empty grid")
        return vals

    kind = get("task", "kind")
    if kind not in TASK_KINDS:
        fail("task", "kind", f"task kind must be one of {TASK_KINDS}, got {kind!r}")
    p = get("task", "p", int)
    if p is None:
        fail("task", None, "missing p (number of atoms)")
    z_init = get("task", "z_init", default="random_gaussian")
    if z_init not in _Z_INITS:
        fail("task", "z_init", f"z_init must be one of {_Z_INITS}")

    tvals = {}
    if "train" in cp:
        for key in cp["train"]:
            fld = _TRAIN_FIELDS[key]
            ann = fld.type
            if key in ("nu2", "w_radius"):
                conv = optional_float
            elif key in ("t0", "init_batch", "log_every"):
                conv = optional_int
            elif ann in (int, "int"):
                conv = int
            else:
                conv = float
            tvals[fld.name] = get("train", key, conv)
    try:
        train = TrainConfig(**tvals)
    except ValueError as exc:
        # point at the first key the message names, else at the section
        named = [k for k in cp["train"] if _TRAIN_FIELDS[k].name in str(exc)] if "train" in cp else []
        fail("train", named[0] if named else None, str(exc))

    cfg = RunConfig(
        kind=kind,
        p=p,
        q=get("task", "q", int, 1),
        r=get("task", "r", optional_int),
        z_init=z_init,
        signals=get("data", "signals", path),
        labels=get("data", "labels", path),
        unlabeled=get("data", "unlabeled", path),
        manifest=get("data", "manifest", path),
        patch_side=get("data", "patch_side", optional_int),
        patch_stride=get("data", "patch_stride", int, 1),
        normalize=get("data", "normalize", boolean, True),
        validation_fraction=get("data", "validation_fraction", float, 0.0),
        train=train,
        lambda1_grid=get("search", "lambda1", floats, LAMBDA1_GRID),
        rho_grid=get("search", "rho", floats, RHO_GRID),
        search_iterations=get("search", "iterations", int, 500),
        model_path=get("output", "model", path),
        telemetry_path=get("output", "telemetry", path),
        source=source,
    )
    if cfg.signals is None and cfg.manifest is None:
        fail("data", None, "give either signals or manifest in [data]")
    if cfg.signals is not None and cfg.manifest is not None:
        fail("data", "manifest", "signals and manifest are mutually exclusive")
    if not 0.0 <= cfg.validation_fraction < 1.0:
        fail("data", "validation_fraction", "validation_fraction must lie in [0, 1)")
    if cfg.search_iterations < 1:
        fail("search", "iterations", "iterations must be at least 1")
    if cfg.kind == "compressed_sensing" and cfg.r is None:
        fail("task", None, "compressed_sensing needs r")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_config(text, source=path, base_dir=os.path.dirname(os.path.abspath(path)))

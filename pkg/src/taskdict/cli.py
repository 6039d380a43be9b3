"""Command line entry point: ``taskdict {train,encode,predict,evaluate,search}``.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 data error, 4 training divergence, 5 model file I/O error.
"""

import argparse
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from . import model_io
from .config import ConfigError, load_config
from .data import PatchConfig, extract_patches, normalize_columns
from .elastic_net import check_kkt
from .metrics import error_rate, mse, predict_all, psnr
from .model import OneVsAll
from .pgm import PGMError, read_manifest, read_pgm
from .tasks import TaskSpec, make_baseline_z
from .trainer import DivergenceError, fit, fit_one_vs_all, task_objective

__all__ = ["main", "DataError", "EXIT_CODES"]

log = logging.getLogger("taskdict")

EXIT_CODES = {"ok": 0, "error": 1, "config": 2, "data": 3, "divergence": 4, "io": 5}


class DataError(ValueError):
    """Missing, unreadable or inconsistent input data."""


class ModelIOError(OSError):
    pass


def _loadtxt(path, ndmin):
    try:
        return np.loadtxt(path, ndmin=ndmin)
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc})") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def read_signals(path):
    """Signals stored one per row of a whitespace-separated text file, as columns."""
    X = _loadtxt(path, 2).T
    if X.size == 0:
        raise DataError(f"{path}: no signals")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite values")
    return np.ascontiguousarray(X)


def read_labels(path, n, q, kind):
    """Labels (one per row) shaped for ``kind``: ``(n,)`` or ``(q, n)``."""
    Y = _loadtxt(path, 2)
    if Y.shape[0] != n:
        raise DataError(f"{path}: {Y.shape[0]} label rows for {n} signals")
    if kind in ("regression", "compressed_sensing"):
        if Y.shape[1] != q:
            raise DataError(f"{path}: targets have {Y.shape[1]} columns, expected q={q}")
        return Y.T.copy()
    if Y.shape[1] != 1:
        raise DataError(f"{path}: expected one label per row")
    y = Y[:, 0]
    if kind in ("binary_linear", "binary_bilinear"):
        if not np.all(np.abs(y) == 1):
            raise DataError(f"{path}: binary labels must be -1 or +1")
    elif np.any(y != np.rint(y)) or y.min() < 1 or y.max() > q:
        raise DataError(f"{path}: class labels must be integers in 1..{q}")
    return y


def _image_signals(cfg):
    try:
        entries = read_manifest(cfg.manifest)
    except OSError as exc:
        raise DataError(f"{cfg.manifest}: cannot read ({exc.strerror})") from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if not entries:
        raise DataError(f"{cfg.manifest}: empty manifest")
    cols, labels = [], []
    for path, label in entries:
        try:
            im = read_pgm(path)
        except (OSError, PGMError) as exc:
            raise DataError(f"{path}: {exc}") from None
        if cfg.patch_side:
            pc = PatchConfig(cfg.patch_side, cfg.patch_stride, cfg.normalize, cfg.normalize)
            P = extract_patches(im, pc)[0]
        else:
            P = im.reshape(-1, 1)
            if cfg.normalize:
                P = normalize_columns(P)
        if cols and P.shape[0] != cols[0].shape[0]:
            raise DataError(f"{path}: signal length {P.shape[0]} differs from earlier images")
        cols.append(P)
        labels += [label] * P.shape[1]
    X = np.concatenate(cols, axis=1)
    if any(lab is None for lab in labels):
        return X, None
    try:
        return X, np.array([float(v) for v in labels])
    except ValueError:
        raise DataError(f"{cfg.manifest}: labels must be numeric") from None


def load_training_data(cfg):
    """``(X, labels, unlabeled)`` for a run configuration."""
    if cfg.manifest is not None:
        X, y = _image_signals(cfg)
        if y is not None and cfg.kind in ("regression",):
            y = y.reshape(1, -1)
    else:
        X = read_signals(cfg.signals)
        y = None
        if cfg.labels is not None:
            q = X.shape[0] if cfg.kind == "compressed_sensing" else cfg.q
            y = read_labels(cfg.labels, X.shape[1], q, cfg.kind)
    if y is None and cfg.kind != "compressed_sensing":
        raise DataError(f"task {cfg.kind} needs labels")
    XU = read_signals(cfg.unlabeled) if cfg.unlabeled else None
    if XU is not None and XU.shape[0] != X.shape[0]:
        raise DataError("unlabeled signals differ in length from labeled ones")
    return X, y, XU


def _split(X, y, frac, seed):
    n = X.shape[1]
    nv = int(round(frac * n))
    if nv == 0:
        return X, y, None, None
    if nv >= n:
        raise DataError("validation split leaves no training data")
    perm = np.random.default_rng(seed).permutation(n)
    tr, va = np.sort(perm[nv:]), np.sort(perm[:nv])
    pick = lambda Y, idx: None if Y is None else Y[..., idx]
    return X[:, tr], pick(y, tr), X[:, va], pick(y, va)


def _fit(cfg, tc, X, y, XU):
    m = X.shape[0]
    if cfg.kind == "multiclass_ova":
        return fit_one_vs_all(X, y, cfg.q, cfg.p, tc)
    task = TaskSpec(cfg.kind, m=m, p=cfg.p, q=cfg.q, r=cfg.r)
    z0 = None
    if task.has_transform:
        z0 = make_baseline_z(cfg.z_init, cfg.r, m, data=X, rng=tc.seed)
    return fit(task, X, y, tc, unlabeled=XU, z0=z0)


def _score(model, X, y):
    if isinstance(model, OneVsAll):
        q = len(model.members)
        return float(np.mean([
            task_objective(mm, X, np.where(y == k, 1.0, -1.0))
            for k, mm in enumerate(model.members, 1)
        ])) if q else math.inf
    return task_objective(model, X, y)


def _train_config(cfg, args):
    tc = cfg.train
    if args.seed is not None:
        tc = replace(tc, seed=args.seed)
    if args.threads is not None:
        tc = replace(tc, n_jobs=max(1, args.threads))
    return tc


def _save_model(model, path):
    try:
        model_io.save(model, path)
    except OSError as exc:
        raise ModelIOError(f"{path}: cannot write model ({exc.strerror})") from None


def _load_model(path):
    if path is None:
        raise ConfigError("--model is required")
    try:
        return model_io.load(path)
    except OSError as exc:
        raise ModelIOError(f"{path}: cannot read model ({exc.strerror})") from None
    except model_io.ModelFormatError as exc:
        raise ModelIOError(f"{path}: {exc}") from None


def _telemetry_rows(model):
    if isinstance(model, OneVsAll):
        for k, mm in enumerate(model.members, 1):
            for t, obj, lr in mm.telemetry:
                yield k, t, obj, lr
    else:
        for t, obj, lr in model.telemetry:
            yield 1, t, obj, lr


def cmd_train(args):
    cfg = load_config(args.config)
    tc = _train_config(cfg, args)
    out = args.out or cfg.model_path
    if out is None:
        raise ConfigError(f"{cfg.source}: no model path ([output] model or --out)")
    X, y, XU = load_training_data(cfg)
    Xtr, ytr, Xva, yva = _split(X, y, cfg.validation_fraction, tc.seed)
    try:
        model = _fit(cfg, tc, Xtr, ytr, XU)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise DataError(str(exc)) from None
    _save_model(model, out)
    tel = cfg.telemetry_path or out + ".telemetry.tsv"
    try:
        with open(tel, "w", encoding="utf-8") as fh:
            fh.write("member\titeration\tobjective\tlearning_rate\n")
            for k, t, obj, lr in _telemetry_rows(model):
                fh.write(f"{k}\t{t}\t{obj!r}\t{lr!r}\n")
    except OSError as exc:
        raise ModelIOError(f"{tel}: cannot write telemetry ({exc.strerror})") from None
    print(f"model\t{out}")
    print(f"telemetry\t{tel}")
    if Xva is not None:
        print(f"validation_objective\t{_score(model, Xva, yva)!r}")
    return 0


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", encoding="utf-8"), True
    except OSError as exc:
        raise DataError(f"{path}: cannot write ({exc.strerror})") from None


def _check_dims(model, X):
    ref = model.members[0] if isinstance(model, OneVsAll) else model
    if X.shape[0] != ref.task.m:
        raise DataError(f"signals have length {X.shape[0]}, the model expects {ref.task.m}")


def cmd_encode(args):
    model = _load_model(args.model)
    if isinstance(model, OneVsAll):
        raise DataError("encode needs a single-dictionary model")
    X = read_signals(args.signals)
    _check_dims(model, X)
    Xe = model.z @ X if model.z is not None else X
    codes = model.encode_batch(X, n_jobs=args.threads or 1)
    fh, close = _open_out(args.out)
    try:
        fh.write(f"# codes model_sha256={model_io.file_hash(args.model)}\n")
        fh.write("# kkt_violation<TAB>index:value ...\n")
        for i, c in enumerate(codes):
            rep = check_kkt(Xe[:, i], model.dictionary, c.alpha, model.params)
            sup = " ".join(f"{j}:{float(c.alpha[j])!r}" for j in sorted(c.active))
            fh.write(f"{rep.max_violation!r}\t{sup}\n")
    finally:
        if close:
            fh.close()
    return 0


def cmd_predict(args):
    model = _load_model(args.model)
    X = read_signals(args.signals)
    _check_dims(model, X)
    out, scores = predict_all(model, X)
    kind = "multiclass_ova" if isinstance(model, OneVsAll) else model.task.kind
    fh, close = _open_out(args.out)
    try:
        fh.write(f"# predictions model_sha256={model_io.file_hash(args.model)} task={kind}\n")
        if scores is None:
            for row in out.T:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        else:
            for lab, sc in zip(out, scores):
                sc = " ".join(repr(float(v)) for v in np.atleast_1d(sc))
                fh.write(f"{int(lab)}\t{sc}\n")
    finally:
        if close:
            fh.close()
    return 0


def _fmt(v):
    return "inf" if v == math.inf else repr(float(v))


def cmd_evaluate(args):
    model = _load_model(args.model)
    X = read_signals(args.signals)
    _check_dims(model, X)
    kind = "multiclass_ova" if isinstance(model, OneVsAll) else model.task.kind
    ref = model.members[0] if isinstance(model, OneVsAll) else model
    if args.targets is None:
        if kind != "compressed_sensing":
            raise DataError(f"task {kind} needs targets to evaluate against")
        T = X
    else:
        q = ref.task.m if kind == "compressed_sensing" else (
            len(model.members) if isinstance(model, OneVsAll) else ref.task.q
        )
        T = read_labels(args.targets, X.shape[1], q, kind)
    out, scores = predict_all(model, X)
    fh, close = _open_out(args.out)
    try:
        fh.write(f"n\t{X.shape[1]}\n")
        if scores is not None:
            fh.write(f"error_rate\t{_fmt(error_rate(out, T))}\n")
        else:
            e = mse(out, T)
            fh.write(f"mse\t{_fmt(e)}\n")
            fh.write(f"mse_x100\t{_fmt(100.0 * e)}\n")
            fh.write(f"psnr\t{_fmt(psnr(out, T, peak=args.peak))}\n")
    finally:
        if close:
            fh.close()
    return 0


def cmd_search(args):
    cfg = load_config(args.config)
    tc = _train_config(cfg, args)
    if not cfg.lambda1_grid or not cfg.rho_grid:
        raise ConfigError(f"{cfg.source}: empty search grid")
    if cfg.validation_fraction <= 0:
        raise ConfigError(f"{cfg.source}: search needs validation_fraction > 0 in [data]")
    X, y, XU = load_training_data(cfg)
    Xtr, ytr, Xva, yva = _split(X, y, cfg.validation_fraction, tc.seed)
    it = cfg.search_iterations
    rows = []
    for lam in cfg.lambda1_grid:
        for rho in cfg.rho_grid:
            c = replace(tc, lambda1=lam, rho=rho, T=it, t0=max(1, it // 10))
            try:
                score = _score(_fit(cfg, c, Xtr, ytr, XU), Xva, yva)
            except DivergenceError:
                score = math.inf
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise DataError(str(exc)) from None
            if not np.isfinite(score):
                score = math.inf
            rows.append((score, lam, rho))
    rows.sort()
    fh, close = _open_out(args.out)
    try:
        fh.write("rank\tlambda1\trho\tvalidation_objective\n")
        for k, (score, lam, rho) in enumerate(rows, 1):
            fh.write(f"{k}\t{lam!r}\t{rho!r}\t{_fmt(score)}\n")
    finally:
        if close:
            fh.close()
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="taskdict", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=False, model=False):
        if config:
            p.add_argument("--config", required=True, metavar="PATH")
        if model:
            p.add_argument("--model", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--threads", type=int, metavar="N")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("train", help="fit a model from a configuration file"), config=True)
    p = sub.add_parser("encode", help="sparse codes of signals, one line each")
    common(p, model=True)
    p.add_argument("signals", help="text file, one signal per row")
    p = sub.add_parser("predict", help="task predictions for signals")
    common(p, model=True)
    p.add_argument("signals")
    p = sub.add_parser("evaluate", help="error rate, MSE and PSNR on labeled data")
    common(p, model=True)
    p.add_argument("signals")
    p.add_argument("targets", nargs="?", help="labels or targets, one per row")
    p.add_argument("--peak", type=float, default=255.0, help="PSNR peak value (default 255)")
    common(sub.add_parser("search", help="grid search over lambda1 and rho"), config=True)
    return ap


_COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CODES["data"]
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_CODES["divergence"]
    except ModelIOError as exc:
        print(f"model file error: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``tdfix <command> [options]``.

Every run writes a directory::

    <run>/manifest.json          resolved config, rerunnable with --config
    <run>/history.csv, .svg      per-epoch metrics (train / refine)
    <run>/checkpoints/final/     weights after the last epoch
    <run>/checkpoints/best/      weights at the best test accuracy
    <run>/exports/<command>/     CSV exports and figures

Run directories default to ``$TDFIX_RUN_ROOT`` (or ``./runs``) plus a name
derived from the command and a hash of the resolved config.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import plotting
from .checkpoint import load_checkpoint, save_checkpoint
from .dataio import (
    SyntheticSpec,
    build_datasets,
    flatten,
    load_dataset,
    load_sequences,
    save_dataset,
    split,
    synth_datasets,
    unflatten,
    write_frames_csv,
)
from .errors import ConfigError, DataError, TdfixError
from .fmd import decode, filter_to_skeleton, write_decoded_csv
from .msnet import MaskSpec, MSResTCNConfig, build_ms, load_mask, resolve_joint_refs
from .numcore import SGDConfig
from .restcn import ResTCNConfig, build_restcn, evaluate, fit, response_trace

log = logging.getLogger("tdfix")

RUN_ROOT_ENV = "TDFIX_RUN_ROOT"
HISTORY_FIELDS = ("epoch", "lr", "train_loss", "train_acc", "test_loss", "test_acc")

DEFAULTS = {
    "seed": 0,
    "data": {"kind": "synthetic"},
    "model": {},
    "ms": {"pipe_filter_len": 1, "pipe_sigma": "relu_only"},
    "sgd": {},
    "train": {"epochs": 30, "batch_size": 128},
}
# desk-scale defaults for the built-in synthetic data
SYNTHETIC_MODEL = {"block_channels": [8, 16, 32]}
SYNTHETIC_TRAIN = {"epochs": 20, "batch_size": 32}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_config(path) -> dict:
    """Read a JSON or YAML config; a run manifest is accepted as well."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"unreadable config {path}: {e}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping")
    if "config" in doc and "command" in doc:
        return doc["config"]
    return doc


def _set_key(cfg: dict, dotted: str, value):
    node = cfg
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def _parse_set(item: str):
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key.strip(), value


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


# flag name -> config key
FLAG_KEYS = {
    "seed": "seed",
    "epochs": "train.epochs",
    "batch_size": "train.batch_size",
    "lr": "sgd.learning_rate",
    "momentum": "sgd.momentum",
    "l1": "sgd.l1_weight",
    "dropout": "model.dropout",
    "channels": "model.block_channels",
    "frames": "data.frames",
    "data_dir": "data.path",
    "mask": "ms.mask_file",
    "pipe_sigma": "ms.pipe_sigma",
}


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    user = read_config(args.config) if getattr(args, "config", None) else {}
    synthetic = getattr(args, "synthetic", False) or user.get("data", {}).get("kind", "synthetic") == "synthetic"
    if synthetic and not getattr(args, "data_dir", None):
        cfg["model"] = dict(SYNTHETIC_MODEL)
        cfg["train"] = dict(SYNTHETIC_TRAIN)
    cfg = _merge(cfg, user)
    if getattr(args, "synthetic", False) and cfg["data"].get("kind") != "synthetic":
        cfg["data"] = {"kind": "synthetic"}
    if getattr(args, "data_dir", None):
        cfg["data"] = {"kind": "dir"}
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            if flag == "channels":
                value = _int_list(value)
            if flag in ("data_dir", "mask"):
                value = str(Path(value).resolve())
            _set_key(cfg, key, value)
    for item in getattr(args, "set", None) or []:
        _set_key(cfg, *_parse_set(item))
    return cfg


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def load_data(data_cfg: dict):
    """Build ``(train, test)`` datasets from the ``data`` config section."""
    kind = data_cfg.get("kind", "synthetic")
    if kind == "synthetic":
        fields = {k: v for k, v in data_cfg.items() if k != "kind"}
        if "frames" in fields and fields["frames"] is None:
            fields.pop("frames")
        try:
            spec = SyntheticSpec(**fields)
        except TypeError as e:
            raise ConfigError(f"bad synthetic data option: {e}") from None
        return synth_datasets(spec)
    if kind == "dir":
        root = Path(data_cfg.get("path", ""))
        return load_dataset(root / "train"), load_dataset(root / "test")
    if kind == "ntu":
        seqs = load_sequences(data_cfg["path"])
        train, test = split(seqs, data_cfg.get("protocol", "cross_subject"), data_cfg.get("train_ids"))
        K = int(data_cfg.get("num_classes", 60))
        names = [f"A{k + 1:03d}" for k in range(K)]
        return build_datasets(train, test, int(data_cfg.get("frames", 300)), K, names,
                              bool(data_cfg.get("pad_after", False)))
    raise ConfigError(f"unknown data kind {kind!r} (synthetic, dir or ntu)")


def _model_config(cfg: dict, train_set) -> ResTCNConfig:
    fields = dict(cfg.get("model", {}))
    for key, actual in (("input_dim", train_set.x.shape[2]), ("num_classes", train_set.num_classes)):
        if fields.get(key, actual) != actual:
            raise ConfigError(f"model.{key}={fields[key]} does not match the dataset ({actual})")
        fields[key] = actual
    try:
        return ResTCNConfig(**fields)
    except TypeError as e:
        raise ConfigError(f"bad model option: {e}") from None


def _sgd_config(cfg: dict) -> SGDConfig:
    try:
        return SGDConfig(**cfg.get("sgd", {}))
    except TypeError as e:
        raise ConfigError(f"bad sgd option: {e}") from None


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def resolve_mask(cfg: dict, layout, dim: int):
    """Mask from ``ms.mask_file``, inline ``ms.joints``/``ms.dims``, or the synthetic ground truth."""
    ms = cfg.get("ms", {})
    prov = {}
    if ms.get("mask_file"):
        mask = load_mask(ms["mask_file"], layout)
        prov = {"source": "file", "path": ms["mask_file"], "sha256": _file_digest(ms["mask_file"])}
    elif ms.get("dims") or ms.get("joints"):
        dims = set(int(d) for d in ms.get("dims") or [])
        dims |= resolve_joint_refs(layout, ms.get("joints") or [])
        mask = MaskSpec(tuple(sorted(dims)), ms.get("note", "inline mask"))
        prov = {"source": "inline"}
    elif cfg["data"].get("kind") == "synthetic":
        spec = SyntheticSpec(**{k: v for k, v in cfg["data"].items() if k != "kind"})
        mask = MaskSpec(tuple(spec.fine_dims), "synthetic fine-motion joints")
        prov = {"source": "synthetic ground truth", "joints": list(spec.fine_joints)}
    else:
        raise ConfigError("refine needs a mask: --mask FILE, ms.dims or ms.joints")
    mask.validate(dim)
    prov.update(dims=list(mask.kept_dims), note=mask.note)
    return mask, prov


# ---------------------------------------------------------------------------
# run directories and exports
# ---------------------------------------------------------------------------


def _config_hash(cfg: dict) -> str:
    return hashlib.sha1(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:8]


def make_run_dir(command: str, cfg: dict, explicit=None) -> Path:
    if explicit:
        path = Path(explicit)
    else:
        root = Path(os.environ.get(RUN_ROOT_ENV, "runs"))
        path = root / f"{command}-{_config_hash(cfg)}"
        n = 1
        while path.exists():
            path = root / f"{command}-{_config_hash(cfg)}-{n}"
            n += 1
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_FIELDS)
        for rec in history:
            w.writerow([rec["epoch"]] + [repr(float(rec[k])) for k in HISTORY_FIELDS[1:]])


def read_history_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(r[k]) if k == "epoch" else float(r[k])) for k in HISTORY_FIELDS} for r in rows]


def _export_dir(ckpt_path, command, out=None) -> Path:
    if out:
        path = Path(out)
    else:
        p = Path(ckpt_path)
        if (p / "checkpoints").is_dir():
            run = p
        elif p.parent.name == "checkpoints":
            run = p.parent.parent
        else:
            run = p
        path = run / "exports" / command
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# train / refine
# ---------------------------------------------------------------------------


def _train_run(command: str, args) -> Path:
    cfg = resolve_config(args)
    cfg.pop("run_dir", None)
    train_set, test_set = load_data(cfg["data"])
    base = _model_config(cfg, train_set)
    sgd = _sgd_config(cfg)
    seed = int(cfg["seed"])
    manifest = {"command": command, "config": cfg}
    if command == "refine":
        mask, prov = resolve_mask(cfg, train_set.layout, base.input_dim)
        ms = cfg.get("ms", {})
        model = build_ms(MSResTCNConfig(base, mask, int(ms.get("pipe_filter_len", 1)),
                                        ms.get("pipe_sigma", "relu_only")), seed)
        manifest["mask"] = prov
        # pin the resolved dims so the manifest alone reproduces the run
        cfg["ms"] = {**cfg.get("ms", {}), "dims": list(mask.kept_dims), "note": mask.note}
        cfg["ms"].pop("mask_file", None)
        cfg["ms"].pop("joints", None)
    else:
        model = build_restcn(base, seed)
    run = make_run_dir(command, cfg, getattr(args, "run_dir", None))
    (run / "manifest.json").write_text(json.dumps(manifest, indent=2))
    extra = {"data": cfg["data"], "run_command": command}
    best = {"acc": -1.0}

    def on_epoch(rec, m):
        if rec["test_acc"] > best["acc"]:
            best["acc"] = rec["test_acc"]
            save_checkpoint(run / "checkpoints" / "best", m, train_set.mean, train_set.layout,
                            train_set.class_names, epoch=rec["epoch"], **extra)

    t = cfg["train"]
    history = fit(model, train_set, test_set, sgd, int(t["epochs"]), int(t["batch_size"]), seed, on_epoch)
    save_checkpoint(run / "checkpoints" / "final", model, train_set.mean, train_set.layout, train_set.class_names,
                    epoch=history[-1]["epoch"], **extra)
    write_history_csv(run / "history.csv", history)
    plotting.render_history(history, run / "history.svg")
    last = history[-1]
    manifest["results"] = {"final_test_acc": last["test_acc"], "final_test_loss": last["test_loss"],
                           "best_test_acc": best["acc"], "epochs": last["epoch"]}
    (run / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"{command}: {run}  final test acc {last['test_acc']:.4f}  best {best['acc']:.4f}")
    return run


def cmd_train(args):
    return _train_run("train", args)


def cmd_refine(args):
    return _train_run("refine", args)


# ---------------------------------------------------------------------------
# diagnosis commands
# ---------------------------------------------------------------------------


def _data_for(ckpt, args):
    """Dataset pair for a checkpoint: explicit flags win, else the run's own data config."""
    if getattr(args, "config", None) or getattr(args, "data_dir", None) or getattr(args, "synthetic", False):
        data_cfg = resolve_config(args)["data"]
    elif "data" in ckpt.manifest:
        data_cfg = ckpt.manifest["data"]
    else:
        raise ConfigError("no dataset given and the checkpoint does not record one")
    train, test = load_data(data_cfg)
    dim = ckpt.model.config.base.input_dim if hasattr(ckpt.model, "pipes") else ckpt.model.config.input_dim
    if train.x.shape[2] != dim:
        raise ConfigError(f"dataset width {train.x.shape[2]} does not match the checkpoint ({dim})")
    return train, test


def _pick_split(args, train, test):
    return train if getattr(args, "split", "test") == "train" else test


def _class_names(ds, K):
    return list(ds.class_names) if ds.class_names else [f"class{k}" for k in range(K)]


def cmd_eval(args):
    ck = load_checkpoint(args.checkpoint)
    train, test = _data_for(ck, args)
    ds = _pick_split(args, train, test)
    out = _export_dir(args.checkpoint, "eval", args.out)
    rep = evaluate(ck.model, ds)
    K = rep.confusion.shape[0]
    names = _class_names(ds, K)
    counts = rep.confusion.sum(axis=1)
    columns = {"A": [rep.per_class[k] for k in range(K)]}
    rows = [[k, names[k], int(counts[k]), repr(float(rep.per_class[k]))] for k in range(K)]
    header = ["class", "name", "n", "accuracy"]
    flagged = []
    print(f"overall accuracy {rep.accuracy:.4f} on {len(ds.y)} samples ({args.split})")
    if args.compare:
        ck2 = load_checkpoint(args.compare)
        rep2 = evaluate(ck2.model, ds)
        columns = {"A": columns["A"], "B": [rep2.per_class[k] for k in range(K)]}
        header += ["accuracy_b", "delta", "flagged"]
        for k in range(K):
            delta = rep2.per_class[k] - rep.per_class[k]
            flag = bool(delta >= args.threshold)
            if flag:
                flagged.append(names[k])
            rows[k] += [repr(float(rep2.per_class[k])), repr(float(delta)), int(flag)]
        print(f"comparison accuracy {rep2.accuracy:.4f}; {len(flagged)} classes improve by >= {args.threshold}")
    width = max(len(n) for n in names)
    for r in rows:
        line = f"  {r[1]:<{width}}  {float(r[3]):.4f}"
        if args.compare:
            line += f"  {float(r[4]):.4f}  {float(r[5]):+.4f}{'  *' if r[6] else ''}"
        print(line)
    with open(out / "per_class.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    with open(out / "confusion.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\pred"] + names)
        for k in range(K):
            w.writerow([names[k]] + [int(v) for v in rep.confusion[k]])
    (out / "summary.json").write_text(json.dumps(
        {"accuracy": rep.accuracy, "split": args.split, "samples": int(len(ds.y)), "flagged": flagged}, indent=2))
    plotting.render_per_class(names, columns, out / "per_class.svg", flagged)
    return out


def _model_stream(model, stream):
    if hasattr(model, "pipes"):
        return model.config.base
    if stream != "main":
        raise ConfigError("single-stream checkpoints only have the 'main' stream")
    return model.config


def _record(model, ds, idx, stream):
    logits, bundles = model.forward(ds.x[idx], record=True, ids=[ds.ids[i] for i in idx])
    if hasattr(model, "pipes"):
        bundles = bundles[0] if stream == "main" else bundles[1]
    return bundles


def cmd_decode(args):
    ck = load_checkpoint(args.checkpoint)
    _model_stream(ck.model, args.stream)
    train, test = _data_for(ck, args)
    ds = _pick_split(args, train, test)
    ids = args.samples.split(",") if args.samples else [ds.ids[0]]
    idx = [ds.index_of(s) for s in ids]
    layers = _int_list(args.layers)
    out = _export_dir(args.checkpoint, "decode", args.out)
    bundles = _record(ck.model, ds, idx, args.stream)
    for b in bundles:
        for layer in layers:
            dec = decode(b, ck.model, layer, ck.mean)
            stem = f"{b.sample_id}_L{layer}"
            write_decoded_csv(out / f"{stem}.csv", dec, ck.layout)
            plotting.render_skeleton_strip(unflatten(dec.frames, ck.layout), ck.layout, out / f"{stem}.svg",
                                           title=f"{b.sample_id} layer {layer}")
    print(f"decoded {len(bundles)} samples x {len(layers)} layers into {out}")
    return out


def cmd_trace(args):
    ck = load_checkpoint(args.checkpoint)
    _model_stream(ck.model, args.stream)
    train, test = _data_for(ck, args)
    ds = _pick_split(args, train, test)
    members = np.flatnonzero(ds.y == args.class_id)
    if not members.size:
        raise DataError(f"class {args.class_id} has no samples in the {args.split} split")
    idx = [int(i) for i in members[: args.num_samples]]
    bundles = _record(ck.model, ds, idx, args.stream)
    N = bundles[0][args.layer].shape[1]
    top_k = args.top_k
    if top_k > N:
        warnings.warn(f"top_k={top_k} exceeds the {N} filters of layer {args.layer}; using {N}")
        top_k = N
    peak = np.max([np.abs(b[args.layer]).max(axis=0) for b in bundles], axis=0)
    # stable sort keeps the lower filter id first on ties
    fids = [int(i) for i in np.argsort(-peak, kind="stable")[:top_k]]
    out = _export_dir(args.checkpoint, "trace", args.out)
    for b in bundles:
        tr = response_trace(b, args.layer, fids)
        stem = f"{b.sample_id}_L{args.layer}_class{args.class_id}"
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame"] + [f"filter_{f}" for f in fids])
            for t in range(tr.shape[1]):
                w.writerow([t] + [repr(float(v)) for v in tr[:, t]])
        plotting.render_traces(tr, fids, out / f"{stem}.svg", title=f"{b.sample_id} layer {args.layer}")
    print(f"traced filters {fids} for {len(bundles)} samples into {out}")
    return out


def cmd_filters(args):
    ck = load_checkpoint(args.checkpoint)
    cfg = _model_stream(ck.model, args.stream)
    ids = _int_list(args.ids) if args.ids else list(range(cfg.channels(1)))
    out = _export_dir(args.checkpoint, "filters", args.out)
    for fid in ids:
        seq = filter_to_skeleton(ck.model, fid, ck.mean, ck.layout, args.stream)
        write_frames_csv(out / f"{seq.name}.csv", flatten(seq), ck.layout.dim_names())
        plotting.render_skeleton_strip(seq.frames, ck.layout, out / f"{seq.name}.svg",
                                       frame_ids=list(range(seq.num_frames)), title=f"filter {fid}")
    print(f"rendered {len(ids)} filters into {out}")
    return out


def cmd_synth(args):
    cfg = resolve_config(args)
    data = {k: v for k, v in cfg["data"].items() if k != "kind"}
    data.setdefault("seed", cfg["seed"])
    spec = SyntheticSpec(**data)
    train, test = synth_datasets(spec)
    out = Path(args.out)
    save_dataset(out / "train", train)
    save_dataset(out / "test", test)
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    print(f"wrote {len(train)} train and {len(test)} test sequences to {out}")
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p, training=False):
    p.add_argument("--config", help="JSON or YAML config file (a run manifest also works)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key, e.g. sgd.momentum=0.9")
    p.add_argument("--synthetic", action="store_true", help="use the built-in synthetic dataset")
    p.add_argument("--data-dir", help="dataset directory with train/ and test/ (as written by 'synth')")
    p.add_argument("--frames", type=int, help="sequence length after pad/crop")
    p.add_argument("--seed", type=int)
    if training:
        p.add_argument("--run-dir", help="output directory (default: $TDFIX_RUN_ROOT/<command>-<hash>)")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--momentum", type=float)
        p.add_argument("--l1", type=float)
        p.add_argument("--dropout", type=float)
        p.add_argument("--channels", help="block widths, e.g. 64,128,256")


def _diagnose(p):
    p.add_argument("checkpoint", help="run directory or checkpoint directory")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", help="export directory (default: <run>/exports/<command>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdfix", description="Train, diagnose and refine skeleton Res-TCNs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a Res-TCN baseline")
    _common(p, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("refine", help="train a two-stream model on a masked input")
    _common(p, training=True)
    p.add_argument("--mask", help="mask file (YAML/JSON with 'joints' and/or 'dims')")
    p.add_argument("--pipe-sigma", choices=("relu_only", "bn_relu"))
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="overall and per-class accuracy")
    _diagnose(p)
    _common(p)
    p.add_argument("--compare", help="second checkpoint for a side-by-side report")
    p.add_argument("--threshold", type=float, default=0.05, help="flag classes improving by at least this")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decode", help="decode hidden layers back to skeleton sequences")
    _diagnose(p)
    _common(p)
    p.add_argument("--samples", help="comma-separated sample ids (default: first sample)")
    p.add_argument("--layers", default="1,4,7,10")
    p.add_argument("--stream", choices=("main", "ta"), default="main")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("trace", help="filter response magnitudes over time")
    _diagnose(p)
    _common(p)
    p.add_argument("--class", dest="class_id", type=int, required=True)
    p.add_argument("--layer", type=int, default=1)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--num-samples", type=int, default=5)
    p.add_argument("--stream", choices=("main", "ta"), default="main")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("filters", help="render first-layer filters as moving skeletons")
    p.add_argument("checkpoint")
    p.add_argument("--ids", help="comma-separated filter ids (default: all)")
    p.add_argument("--stream", choices=("main", "ta"), default="main")
    p.add_argument("--out")
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("synth", help="write the synthetic dataset to disk")
    p.add_argument("out")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth, synthetic=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        with threadpool_limits(1):
            args.func(args)
    except TdfixError as e:
        print(f"tdfix: error: {e}", file=sys.stderr)
        return e.exit_code
    except (FileNotFoundError, NotADirectoryError) as e:
        print(f"tdfix: error: {e}", file=sys.stderr)
        return DataError.exit_code
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

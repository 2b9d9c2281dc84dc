"""``nrcdt`` command line: gen, featurize, classify, cluster, pca.

Option values resolve as built-in defaults < ``--config`` JSON < flags.
Exit codes: 0 success, 2 invalid configuration, 3 data error,
4 numerical degeneracy.  Failures print one JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, datasets
from .cdt import QuantileGrid
from .directions import make_directions
from .features import METHODS, feature_pipeline, features_to_csv
from .io import DataError
from .measures import DegenerateError, GridImage, SupportError

EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 2, 3, 4


class ConfigError(ValueError):
    pass


# option name -> (default, type); None default means "no value"
_FEATURE_OPTS = {
    "data": (None, str), "method": ("mnrcdt", str), "angles": (64, int), "radii": (850, int),
    "grid": (None, int), "slicer": ("linear", str), "radius": (1.0, float),
}
_COMMON = {"seed": (0, int), "threads": (None, int), "config": (None, str)}

OPTIONS = {
    "gen": {"dataset": (None, str), "classes": (None, int), "per_class": (10, int), "out": (None, str),
            "snap_rotation": (None, int), "n_points": (1000, int), "size": (None, int),
            "idx_images": (None, str), "idx_labels": (None, str), "digits": ("1,5,7", str),
            "no_warp": (False, bool)},
    "featurize": {**_FEATURE_OPTS, "out": (None, str)},
    "classify": {**_FEATURE_OPTS, "mode": ("nt", str), "norm": ("l2", str), "k": (1, int),
                 "train_per_class": (1, int), "repeats": (20, int), "C": (1.0, float),
                 "epochs": (1000, int), "report": (None, str)},
    "cluster": {**_FEATURE_OPTS, "k": (None, int), "train_per_class": (50, int), "restarts": (20, int),
                "report": (None, str), "pca_out": (None, str), "pca_dims": (2, int)},
    "pca": {**_FEATURE_OPTS, "dims": (2, int), "out": (None, str), "report": (None, str)},
}
for _opts in OPTIONS.values():
    _opts.update(_COMMON)

# keys that do not affect results; kept out of reports so they are comparable across machines
_RUNTIME_KEYS = ("threads", "config", "report", "out", "pca_out")

CHOICES = {"method": METHODS, "slicer": ("linear", "circular"), "mode": ("nt", "knn", "svm"),
           "norm": ("l2", "linf"), "dataset": ("academic", "polygons", "rotation", "linmnist")}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrcdt", description="Normalized Radon CDT features and experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        for key, (_, typ) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=argparse.SUPPRESS)
            else:
                sp.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS,
                                choices=CHOICES.get(key))
    return p


def resolve_config(command: str, flags: dict) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    opts = OPTIONS[command]
    cfg = {k: d for k, (d, _) in opts.items()}
    path = flags.get("config")
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(opts))
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for k, v in loaded.items():
            typ = opts[k][1]
            if v is not None:
                try:
                    v = typ(v) if typ is not bool else bool(v)
                except (TypeError, ValueError):
                    raise ConfigError(f"config key {k!r} has a bad value {v!r}") from None
            if k in CHOICES and v not in CHOICES[k]:
                raise ConfigError(f"config key {k!r} must be one of {CHOICES[k]}")
            cfg[k] = v
    cfg.update(flags)
    if cfg.get("threads") is None:
        env = os.environ.get("NRCDT_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"NRCDT_THREADS={env!r} is not an integer") from None
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


# --- gen ----------------------------------------------------------------------


def cmd_gen(cfg) -> dict:
    _require(cfg, "dataset", "out")
    name, seed, per = cfg["dataset"], cfg["seed"], cfg["per_class"]
    if name == "academic":
        ranges = datasets.AffineRanges(snap_rotation=cfg["snap_rotation"])
        ls = datasets.gen_academic(cfg["classes"] or 3, per, seed, ranges, cfg["size"] or datasets.TEMPLATE_SIZE)
    elif name == "polygons":
        ranges = datasets.AffineRanges(shift=(-20.0, 20.0), scale=(0.5, 1.25), snap_rotation=cfg["snap_rotation"])
        warp = None if cfg["no_warp"] else datasets.WarpRanges()
        ls = datasets.gen_polygons(cfg["classes"] or 9, per, seed, ranges, warp, cfg["size"] or datasets.TEMPLATE_SIZE)
    elif name == "rotation":
        if cfg["classes"] not in (None, 3):
            raise ConfigError("the rotation dataset has exactly 3 classes")
        ls = datasets.gen_rotation_dataset(per, cfg["n_points"], seed)
    else:
        _require(cfg, "idx_images", "idx_labels")
        try:
            digits = [int(d) for d in str(cfg["digits"]).split(",") if d.strip()]
        except ValueError:
            raise ConfigError(f"bad digit list {cfg['digits']!r}") from None
        if not digits:
            raise ConfigError("empty digit subset")
        src = datasets.load_idx(cfg["idx_images"], cfg["idx_labels"], digits, cfg["size"] or 128)
        ls = datasets.gen_linmnist(src, per, seed)
    ls.provenance["config"] = _public(cfg)
    path = datasets.write_dataset(ls, cfg["out"])
    return {"command": "gen", "items": len(ls), "manifest": str(path)}


# --- features -----------------------------------------------------------------


def _feature_setup(cfg, sample):
    method = cfg["method"]
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if isinstance(sample, GridImage):
        kind, n_t = "circle", cfg["grid"] or 256
    elif sample.is_so3:
        kind, n_t = "so3", cfg["grid"] or 1000
    else:
        kind = {2: "circle", 3: "sphere2"}.get(sample.dim)
        if kind is None:
            raise ConfigError(f"no direction set for {sample.dim}-dimensional clouds")
        n_t = cfg["grid"] or 1000
    if method == "tv" and kind != "circle":
        raise ConfigError("tv needs circle directions (2-D data)")
    if cfg["angles"] < 1 or cfg["radii"] < 2 or n_t < 1:
        raise ConfigError("angles, radii and grid must be positive (radii at least 2)")
    return make_directions(kind, cfg["angles"]), QuantileGrid(n_t)


def featurize_all(cfg, items, what="sample"):
    if not items:
        raise DataError("dataset is empty")
    dirs, grid = _feature_setup(cfg, items[0])

    def one(pair):
        i, x = pair
        try:
            return feature_pipeline(x, cfg["method"], dirs, cfg["radii"], grid, cfg["slicer"],
                                    radius=cfg["radius"])
        except DegenerateError as exc:
            raise DegenerateError(f"{what} {i}: {exc}") from None

    return _pmap(one, list(enumerate(items)), cfg["threads"])


def _load(cfg):
    _require(cfg, "data")
    return datasets.read_dataset(cfg["data"]), datasets.manifest_hash(cfg["data"])


def _public(cfg) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in _RUNTIME_KEYS}


def _report(cfg, digest, body) -> dict:
    body.update({"config": _public(cfg), "manifest_sha256": digest})
    return body


def cmd_featurize(cfg) -> dict:
    _require(cfg, "out")
    ls, _ = _load(cfg)
    feats = featurize_all(cfg, ls.items)
    _write(cfg["out"], features_to_csv(feats, ls.labels))
    return {"command": "featurize", "items": len(feats), "dim": len(feats[0]), "out": cfg["out"]}


def _matrix(feats):
    return np.array([f.values for f in feats])


def cmd_classify(cfg) -> dict:
    _require(cfg, "report")
    ls, digest = _load(cfg)
    X = _matrix(featurize_all(cfg, ls.items))
    y = ls.labels
    mode = cfg["mode"]
    body = {"command": "classify", "mode": mode, "method": cfg["method"], "n_angles": cfg["angles"]}
    if mode == "nt":
        if not ls.templates:
            raise DataError("dataset has no templates; nearest-template mode needs them")
        T = _matrix(featurize_all(cfg, ls.templates, "template"))
        pred = analysis.nearest_template_batch(X, T, cfg["norm"])
        body.update({"norm": cfg["norm"], "predictions": pred.tolist(),
                     "accuracy": analysis.accuracy(pred, y)})
    else:
        reps = cfg["repeats"]
        if reps < 1:
            raise ConfigError("repeats must be at least 1")

        def run(r):
            seed = analysis.repeat_seed(cfg["seed"], r)
            try:
                tr, te = analysis.split_per_class(y, cfg["train_per_class"], seed)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if te.size == 0:
                raise ConfigError("no test items left after the split")
            if mode == "knn":
                pred = [analysis.knn_classify(X[tr], y[tr], X[i], cfg["k"]) for i in te]
            else:
                model = analysis.svm_train(X[tr], y[tr], cfg["C"], cfg["epochs"], seed)
                pred = analysis.svm_predict(model, X[te])
            return analysis.accuracy(np.asarray(pred), y[te])

        accs = np.array(_pmap(run, range(reps), cfg["threads"]))
        body.update({"train_per_class": cfg["train_per_class"], "repeats": reps,
                     "accuracies": accs.tolist(), "accuracy_mean": float(accs.mean()),
                     "accuracy_std": float(accs.std()), "accuracy": float(accs.mean())})
        if mode == "knn":
            body["k"] = cfg["k"]
    out = _report(cfg, digest, body)
    _write(cfg["report"], _dump(out))
    return out


def cmd_cluster(cfg) -> dict:
    _require(cfg, "report")
    ls, digest = _load(cfg)
    X = _matrix(featurize_all(cfg, ls.items))
    y = ls.labels
    k = cfg["k"] or ls.n_classes
    tr, te = analysis.first_per_class(y, cfg["train_per_class"])
    if tr.size < k:
        raise ConfigError("fewer training items than clusters")
    model = analysis.kmeans_fit(X[tr], k, cfg["restarts"], cfg["seed"])
    c_tr = analysis.kmeans_assign(model, X[tr])
    body = {"command": "cluster", "method": cfg["method"], "n_angles": cfg["angles"], "k": k,
            "inertia": model.inertia,
            "ri_train": analysis.rand_index(y[tr], c_tr), "vi_train": analysis.variation_information(y[tr], c_tr)}
    clusters = np.empty(len(y), dtype=int)
    clusters[tr] = c_tr
    if te.size:
        c_te = analysis.kmeans_assign(model, X[te])
        clusters[te] = c_te
        body.update({"ri_test": analysis.rand_index(y[te], c_te),
                     "vi_test": analysis.variation_information(y[te], c_te)})
    else:
        body.update({"ri_test": None, "vi_test": None})
    if cfg["pca_out"]:
        res = analysis.pca_project(X, cfg["pca_dims"])
        _write(cfg["pca_out"], analysis.pca_to_csv(res, y, clusters))
    out = _report(cfg, digest, body)
    _write(cfg["report"], _dump(out))
    return out


def cmd_pca(cfg) -> dict:
    _require(cfg, "out")
    ls, digest = _load(cfg)
    X = _matrix(featurize_all(cfg, ls.items))
    res = analysis.pca_project(X, cfg["dims"])
    _write(cfg["out"], analysis.pca_to_csv(res, ls.labels))
    out = _report(cfg, digest, {"command": "pca", "method": cfg["method"], "n_angles": cfg["angles"],
                                "explained_variance": res.variances.tolist()})
    if cfg["report"]:
        _write(cfg["report"], _dump(out))
    return out


COMMANDS = {"gen": cmd_gen, "featurize": cmd_featurize, "classify": cmd_classify,
            "cluster": cmd_cluster, "pca": cmd_pca}


def _fail(code, kind, exc) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit": code, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = resolve_config(args.command, flags)
        result = COMMANDS[args.command](cfg)
        if args.command == "gen":
            _write(Path(cfg["out"]) / "resolved_config.json", _dump(cfg))
        else:
            _write(str(cfg.get("report") or cfg["out"]) + ".config.json", _dump(cfg))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except DegenerateError as exc:
        return _fail(EXIT_DEGENERATE, "degenerate", exc)
    except (DataError, SupportError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    sys.stdout.write(_dump({k: v for k, v in result.items() if k in ("command", "items", "accuracy",
                                                                      "ri_train", "ri_test", "dim")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

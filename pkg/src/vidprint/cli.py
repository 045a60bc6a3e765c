"""Command-line entry point.

Commands: synth, preprocess, train, embed, eval (closed|open|grid|sweep|binary).
A single JSON config file drives each run; --seed/--out/--jobs override it.
Outputs are deterministic under a fixed seed at any --jobs setting, and every
artifact embeds the effective config hash, seed and tool version.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, kernels
from .core import derive_seed
from .encoder import (
    EncoderConfig,
    embed_many,
    load_model,
    save_model,
    train_encoder,
)
from .evaluation import (
    ClassifierConfig,
    DEFAULT_THRESHOLDS,
    encoder_feature_dataset,
    make_folds,
    run_binary,
    run_closed_set_folds,
    run_open_set,
    run_pair_grid,
    sweep,
    threshold_sweep,
)
from .ingestion import (
    VBR_PLATFORM,
    Dataset,
    LoadError,
    ParseError,
    load_manifest,
    write_binned_csv,
)
from .preprocess import (
    DEFAULT_PLATFORM_RULES,
    BurstExtensionRule,
    PreprocessConfig,
    preprocess_pipeline,
)
from .synthetic import (
    PlatformModel,
    SyntheticSpec,
    easy_hard_pair,
    easy_pair,
    gen_synthetic_dataset,
)


class ConfigError(ValueError):
    """Invalid configuration; message names the offending field path."""


_REQUIRED = object()


def _cfg_get(cfg: dict, path: str, default=_REQUIRED):
    cur = cfg
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is _REQUIRED:
                raise ConfigError(f"{path}: required key missing")
            return default
        cur = cur[part]
    return cur


def _load_config(args) -> dict:
    if not args.config:
        raise ConfigError("--config: a config file is required")
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"--config: no such file {args.config!r}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("--config: top level must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if "seed" not in cfg:
        raise ConfigError("seed: required (config key or --seed)")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed: must be a non-negative integer")
    if args.out:
        cfg["out_dir"] = args.out
    cfg.setdefault("out_dir", "vidprint_out")
    has_manifest = bool(cfg.get("manifest"))
    has_synth = bool(cfg.get("synthetic"))
    if has_manifest == has_synth:
        raise ConfigError("manifest/synthetic: exactly one data source must be configured")
    return cfg


def _provenance(cfg: dict) -> dict:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return {
        "config_sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": cfg["seed"],
        "version": __version__,
        "kernel_backend": kernels.backend(),
    }


# ------------------------------------------------------------ config -> objects


def _pre_config(cfg: dict) -> PreprocessConfig:
    sec = _cfg_get(cfg, "preprocess", {})
    rules = dict(DEFAULT_PLATFORM_RULES) if sec.get("default_rules") else {}
    for name, r in sec.get("platform_rules", {}).items():
        try:
            rules[name] = BurstExtensionRule(
                src_span_s=float(r["src_span_s"]),
                dst_span_s=float(r["dst_span_s"]),
                amplitude_factor=float(r["amplitude_factor"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"preprocess.platform_rules.{name}: {exc}") from None
    try:
        return PreprocessConfig(
            bin_s=float(sec.get("bin_s", 10.0)),
            duration_s=float(sec.get("duration_s", 600.0)),
            platform_rules=rules,
            normalize=bool(sec.get("normalize", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"preprocess: {exc}") from None


def _enc_config(cfg: dict) -> EncoderConfig:
    sec = _cfg_get(cfg, "encoder", {})
    try:
        return EncoderConfig(
            arch=sec.get("arch", "MLP"),
            embedding_dim=int(sec.get("embedding_dim", 128)),
            dropout_rate=float(sec.get("dropout_rate", 0.1)),
            margin=float(sec.get("margin", 1.0)),
            mining=sec.get("mining", "OFFLINE_EXHAUSTIVE"),
            epochs=sec.get("epochs"),
            batch_size=int(sec.get("batch_size", 128)),
            learning_rate=float(sec.get("learning_rate", 1e-3)),
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"encoder: {exc}") from None


def _cls_config(cfg: dict) -> ClassifierConfig:
    sec = _cfg_get(cfg, "classifier", {})
    try:
        return ClassifierConfig(
            kind=sec.get("kind", "KNN1"),
            epochs=int(sec.get("epochs", 50)),
            batch_size=int(sec.get("batch_size", 128)),
            learning_rate=float(sec.get("learning_rate", 0.1)),
            hidden=int(sec.get("hidden", 128)),
        )
    except ValueError as exc:
        raise ConfigError(f"classifier: {exc}") from None


def _platform_models(sec: dict) -> dict[str, PlatformModel]:
    models = {}
    for name, m in sec.items():
        try:
            startup = m.get("startup")
            models[name] = PlatformModel(
                segment_s=float(m["segment_s"]),
                gain=float(m.get("gain", 1.0)),
                noise_sigma=float(m.get("noise_sigma", 0.0)),
                startup=(float(startup[0]), float(startup[1])) if startup else None,
                truncate_s=float(m["truncate_s"]) if m.get("truncate_s") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"synthetic.platforms.{name}: {exc}") from None
    return models


_PRESETS = {"easy-pair": easy_pair, "easy-hard-pair": easy_hard_pair}


def _synth_spec(cfg: dict) -> SyntheticSpec:
    sec = _cfg_get(cfg, "synthetic")
    preset = sec.get("preset")
    platforms = sec.get("platforms")
    if preset and platforms:
        raise ConfigError("synthetic: give either preset or platforms, not both")
    if preset:
        if preset not in _PRESETS:
            raise ConfigError(f"synthetic.preset: unknown preset {preset!r}")
        models = _PRESETS[preset]()
    elif platforms:
        models = _platform_models(platforms)
    else:
        models = easy_pair()
    try:
        return SyntheticSpec(
            n_classes=int(sec.get("n_classes", 30)),
            trials_per_class=int(sec.get("trials_per_class", 5)),
            platform_models=models,
            duration_s=float(sec.get("duration_s", 600.0)),
            resolution_s=float(sec.get("resolution_s", 1.0)),
            seed=cfg["seed"],
            include_vbr=bool(sec.get("include_vbr", True)),
        )
    except ValueError as exc:
        raise ConfigError(f"synthetic: {exc}") from None


def _dataset(cfg: dict) -> Dataset:
    if cfg.get("manifest"):
        return load_manifest(cfg["manifest"])
    return gen_synthetic_dataset(_synth_spec(cfg))


def _eval_platforms(cfg: dict, dataset: Dataset) -> tuple[str, str]:
    non_vbr = [p for p in dataset.platform_list if p != VBR_PLATFORM]
    train_p = _cfg_get(cfg, "evaluation.train_platform", non_vbr[0] if non_vbr else None)
    test_p = _cfg_get(
        cfg, "evaluation.test_platform", non_vbr[1] if len(non_vbr) > 1 else None
    )
    if not train_p or not test_p:
        raise ConfigError("evaluation.train_platform/test_platform: required")
    for p in (train_p, test_p):
        if p not in dataset.platform_list:
            raise ConfigError(f"evaluation: platform {p!r} not in the dataset")
    return train_p, test_p


# ------------------------------------------------------------ output helpers


def _ensure_out(cfg: dict) -> str:
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, payload: dict, prov: dict) -> None:
    payload = dict(payload)
    payload["provenance"] = prov
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _prov_line(prov: dict) -> str:
    return (
        f"# config_sha256={prov['config_sha256']} seed={prov['seed']} "
        f"version={prov['version']}\n"
    )


def _write_csv(path: str, header: list[str], rows, prov: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_prov_line(prov))
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else _fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ------------------------------------------------------------ commands


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if not cfg.get("synthetic"):
        raise ConfigError("synthetic: the synth command needs a synthetic section")
    prov = _provenance(cfg)
    dataset = _dataset(cfg)
    out = _ensure_out(cfg)
    data_dir = os.path.join(out, "data")
    manifest: dict = {"platforms": {}}
    for (platform, video_id, trial), fv in sorted(dataset.traces.items()):
        rel = os.path.join("data", platform, f"{video_id}_t{trial:02d}.csv")
        full = os.path.join(out, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "w", encoding="utf-8") as fh:
            fh.write(_prov_line(prov))
            write_binned_csv(fv, fh)
        manifest["platforms"].setdefault(platform, {}).setdefault(video_id, []).append(
            {"path": rel, "kind": "binned"}
        )
    manifest["provenance"] = prov
    man_path = os.path.join(out, "manifest.json")
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    load_manifest(man_path)  # self-check: written dataset validates
    print(f"wrote {len(dataset)} traces under {data_dir} and {man_path}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    prov = _provenance(cfg)
    dataset = _dataset(cfg)
    pre = _pre_config(cfg)
    out = _ensure_out(cfg)
    feat_dir = os.path.join(out, "features")
    manifest: dict = {"platforms": {}}
    for (platform, video_id, trial), entry in sorted(dataset.traces.items()):
        fv = preprocess_pipeline(entry, pre)
        rel = os.path.join("features", platform, f"{video_id}_t{trial:02d}.csv")
        full = os.path.join(out, rel)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "w", encoding="utf-8") as fh:
            fh.write(_prov_line(prov))
            write_binned_csv(fv, fh)
        manifest["platforms"].setdefault(platform, {}).setdefault(video_id, []).append(
            {"path": rel, "kind": "binned"}
        )
    manifest["provenance"] = prov
    man_path = os.path.join(out, "features_manifest.json")
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    load_manifest(man_path)
    print(f"wrote {len(dataset)} feature files under {feat_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    prov = _provenance(cfg)
    dataset = _dataset(cfg)
    pre = _pre_config(cfg)
    enc_cfg = _enc_config(cfg)
    sec = _cfg_get(cfg, "train", {})
    platforms = sec.get("platforms")
    if not platforms:
        platforms = [p for p in dataset.platform_list if p != VBR_PLATFORM][:2]
    if len(platforms) != 2:
        raise ConfigError("train.platforms: exactly two platforms are required")
    classes = sec.get("classes") or dataset.class_list
    missing = [c for c in classes if c not in dataset.class_list]
    if missing:
        raise ConfigError(f"train.classes: not in dataset: {missing[:5]}")
    feats = encoder_feature_dataset(
        dataset, classes, tuple(platforms), pre,
        n_augment=int(sec.get("n_augment", 0)),
        augment_fraction=float(sec.get("augment_fraction", 0.05)),
        seed=cfg["seed"],
        trials_limit=sec.get("trials_limit"),
    )
    model = train_encoder(feats, list(classes), tuple(platforms), enc_cfg)
    out = _ensure_out(cfg)
    model_path = os.path.join(out, "model.json")
    save_model(model, model_path, provenance=prov)
    _write_csv(
        os.path.join(out, "loss_history.csv"),
        ["epoch", "mean_loss"],
        [(i, loss) for i, loss in enumerate(model.loss_history)],
        prov,
    )
    print(f"trained {enc_cfg.arch} encoder on {platforms}; model at {model_path}")
    return 0


def cmd_embed(args) -> int:
    cfg = _load_config(args)
    prov = _provenance(cfg)
    dataset = _dataset(cfg)
    pre = _pre_config(cfg)
    sec = _cfg_get(cfg, "embed", {})
    model_path = sec.get("model")
    if not model_path:
        raise ConfigError("embed.model: path to a trained encoder is required")
    model = load_model(model_path)
    platforms = sec.get("platforms") or dataset.platform_list
    out = _ensure_out(cfg)
    rows = []
    for (platform, video_id, trial), entry in sorted(dataset.traces.items()):
        if platform not in platforms:
            continue
        fv = preprocess_pipeline(entry, pre)
        emb = embed_many(model, fv.values[None, :])[0]
        rows.append([platform, video_id, trial] + [float(v) for v in emb])
    header = ["platform", "video_id", "trial"] + [
        f"e{i:03d}" for i in range(model.embedding_dim)
    ]
    path = os.path.join(out, "embeddings.csv")
    _write_csv(path, header, rows, prov)
    print(f"wrote {len(rows)} embeddings to {path}")
    return 0


def _eval_closed(cfg, dataset, prov, out, n_jobs) -> int:
    pre, enc_cfg, cls_cfg = _pre_config(cfg), _enc_config(cfg), _cls_config(cfg)
    train_p, test_p = _eval_platforms(cfg, dataset)
    n_classify = int(_cfg_get(cfg, "evaluation.n_classify", 10))
    plan = make_folds(dataset.class_list, n_classify, cfg["seed"])
    n_folds = _cfg_get(cfg, "evaluation.n_folds", None)
    if n_folds:
        plan = type(plan)(folds=plan.folds[: int(n_folds)], seed=plan.seed)
    reports = run_closed_set_folds(
        dataset, train_p, test_p, plan, pre, enc_cfg, cls_cfg,
        use_encoder=bool(_cfg_get(cfg, "evaluation.use_encoder", True)),
        n_augment=int(_cfg_get(cfg, "evaluation.n_augment", 0)),
        trials_limit=_cfg_get(cfg, "evaluation.trials_limit", None),
        seed=cfg["seed"],
        n_jobs=n_jobs,
    )
    payload = {
        "mode": "closed",
        "train_platform": train_p,
        "test_platform": test_p,
        "classifier": cls_cfg.kind,
        "folds": [r.to_dict() for r in reports],
        "accuracy_mean": float(np.mean([r.accuracy for r in reports])),
    }
    _write_json(os.path.join(out, "closed_report.json"), payload, prov)
    _write_csv(
        os.path.join(out, "closed_folds.csv"),
        ["fold_id", "train_platform", "test_platform", "classifier", "accuracy"],
        [(r.fold_id, train_p, test_p, cls_cfg.kind, r.accuracy) for r in reports],
        prov,
    )
    print(f"closed-set mean accuracy {payload['accuracy_mean']:.4f} over {len(reports)} folds")
    return 0


def _eval_open(cfg, dataset, prov, out, n_jobs) -> int:
    pre, enc_cfg = _pre_config(cfg), _enc_config(cfg)
    cls_sec = _cfg_get(cfg, "classifier", {})
    cls_cfg = ClassifierConfig(
        kind="CNN",
        epochs=int(cls_sec.get("epochs", 50)),
        batch_size=int(cls_sec.get("batch_size", 128)),
        learning_rate=float(cls_sec.get("learning_rate", 0.1)),
        hidden=int(cls_sec.get("hidden", 128)),
    )
    train_p, test_p = _eval_platforms(cfg, dataset)
    n_classify = int(_cfg_get(cfg, "evaluation.n_classify", 20))
    threshold = float(_cfg_get(cfg, "evaluation.threshold", 0.8))
    plan = make_folds(dataset.class_list, n_classify, cfg["seed"], open_set=True)
    n_folds = _cfg_get(cfg, "evaluation.n_folds", None)
    folds = plan.folds[: int(n_folds)] if n_folds else plan.folds

    reports, sweeps = [], []
    for fold in folds:
        seed = derive_seed(cfg["seed"], "open", fold.fold_id)
        reports.append(
            run_open_set(
                dataset, train_p, test_p, fold, pre, enc_cfg, cls_cfg,
                threshold=threshold, seed=seed,
            )
        )
        sweeps.append(
            threshold_sweep(
                dataset, train_p, test_p, fold, pre, enc_cfg, cls_cfg,
                thresholds=DEFAULT_THRESHOLDS, seed=seed,
            )
        )
    mean_curve = []
    for ti, t in enumerate(DEFAULT_THRESHOLDS):
        mean_curve.append(
            {
                "threshold": float(t),
                "accuracy": float(np.mean([s["curve"][ti]["accuracy"] for s in sweeps])),
                "known_precision_mean": float(
                    np.mean([s["curve"][ti]["known_precision_mean"] for s in sweeps])
                ),
                "known_recall_mean": float(
                    np.mean([s["curve"][ti]["known_recall_mean"] for s in sweeps])
                ),
            }
        )
    best = max(mean_curve, key=lambda r: r["known_precision_mean"])
    payload = {
        "mode": "open",
        "train_platform": train_p,
        "test_platform": test_p,
        "threshold": threshold,
        "folds": [r.to_dict() for r in reports],
        "known_precision_mean": float(np.mean([r.known_precision_mean for r in reports])),
        "known_recall_mean": float(np.mean([r.known_recall_mean for r in reports])),
        "accuracy_mean": float(np.mean([r.accuracy for r in reports])),
        "threshold_curves": sweeps,
        "mean_curve": mean_curve,
        "best_precision_threshold": best["threshold"],
    }
    _write_json(os.path.join(out, "open_report.json"), payload, prov)
    _write_csv(
        os.path.join(out, "threshold_curve.csv"),
        ["threshold", "accuracy", "known_precision_mean", "known_recall_mean"],
        [
            (r["threshold"], r["accuracy"], r["known_precision_mean"], r["known_recall_mean"])
            for r in mean_curve
        ],
        prov,
    )
    print(
        f"open-set known precision {payload['known_precision_mean']:.4f} at threshold "
        f"{threshold} over {len(reports)} folds"
    )
    return 0


def _eval_grid(cfg, dataset, prov, out, n_jobs) -> int:
    pre, enc_cfg, cls_cfg = _pre_config(cfg), _enc_config(cfg), _cls_config(cfg)
    n_classify = int(_cfg_get(cfg, "evaluation.n_classify", 10))
    plan = make_folds(dataset.class_list, n_classify, cfg["seed"])
    n_folds = _cfg_get(cfg, "evaluation.n_folds", None)
    if n_folds:
        plan = type(plan)(folds=plan.folds[: int(n_folds)], seed=plan.seed)
    report = run_pair_grid(dataset, plan, pre, enc_cfg, cls_cfg, seed=cfg["seed"], n_jobs=n_jobs)
    _write_json(os.path.join(out, "grid_report.json"), report.to_dict(), prov)
    for name, matrix in (("grid_embedding.csv", report.embedding_mean),
                         ("grid_raw.csv", report.raw_mean)):
        rows = [
            [test_p] + matrix[ti]
            for ti, test_p in enumerate(report.testing_platforms)
        ]
        _write_csv(
            os.path.join(out, name),
            ["test_platform"] + report.training_inputs,
            rows,
            prov,
        )
    print(
        f"grid over {len(report.training_inputs)} training inputs x "
        f"{len(report.testing_platforms)} testing platforms written"
    )
    return 0


def _eval_sweep(cfg, dataset, prov, out, n_jobs) -> int:
    pre, enc_cfg, cls_cfg = _pre_config(cfg), _enc_config(cfg), _cls_config(cfg)
    train_p, test_p = _eval_platforms(cfg, dataset)
    axis = _cfg_get(cfg, "evaluation.sweep_axis")
    values = _cfg_get(cfg, "evaluation.sweep_values")
    if not isinstance(values, list) or not values:
        raise ConfigError("evaluation.sweep_values: a non-empty list is required")
    n_classify = int(_cfg_get(cfg, "evaluation.n_classify", 10))
    plan = make_folds(dataset.class_list, n_classify, cfg["seed"])
    rows = sweep(
        dataset, plan, axis, values, train_p, test_p, pre, enc_cfg, cls_cfg,
        seed=cfg["seed"], n_jobs=n_jobs,
        n_folds=_cfg_get(cfg, "evaluation.n_folds", None),
    )
    payload = {"mode": "sweep", "axis": axis, "rows": rows}
    _write_json(os.path.join(out, "sweep_report.json"), payload, prov)
    _write_csv(
        os.path.join(out, "sweep.csv"),
        ["axis", "value", "accuracy_mean"],
        [(r["axis"], r["value"], r["accuracy_mean"]) for r in rows],
        prov,
    )
    print(f"sweep over {axis} ({len(values)} values) written")
    return 0


def _eval_binary(cfg, dataset, prov, out, n_jobs) -> int:
    pre, enc_cfg = _pre_config(cfg), _enc_config(cfg)
    train_p, test_p = _eval_platforms(cfg, dataset)
    sec = _cfg_get(cfg, "evaluation.binary", {})
    n_classify = int(_cfg_get(cfg, "evaluation.n_classify", 10))
    plan = make_folds(dataset.class_list, n_classify, cfg["seed"])
    n_folds = _cfg_get(cfg, "evaluation.n_folds", None)
    folds = plan.folds[: int(n_folds)] if n_folds else plan.folds
    results = [
        run_binary(
            dataset, train_p, test_p, fold, pre, enc_cfg,
            epochs=int(sec.get("epochs", 50)),
            batch=int(sec.get("batch_size", 128)),
            lr=float(sec.get("learning_rate", 0.1)),
            hidden=int(sec.get("hidden", 128)),
            trials_limit=sec.get("trials_limit"),
            seed=derive_seed(cfg["seed"], "binary", fold.fold_id),
        )
        for fold in folds
    ]
    payload = {
        "mode": "binary",
        "train_platform": train_p,
        "test_platform": test_p,
        "folds": results,
        "raw_accuracy_mean": float(np.mean([r["raw"]["accuracy"] for r in results])),
        "embedding_accuracy_mean": float(
            np.mean([r["embedding"]["accuracy"] for r in results])
        ),
    }
    _write_json(os.path.join(out, "binary_report.json"), payload, prov)
    print(
        f"binary pair accuracy raw {payload['raw_accuracy_mean']:.4f} -> "
        f"embeddings {payload['embedding_accuracy_mean']:.4f}"
    )
    return 0


_EVAL_MODES = {
    "closed": _eval_closed,
    "open": _eval_open,
    "grid": _eval_grid,
    "sweep": _eval_sweep,
    "binary": _eval_binary,
}


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    prov = _provenance(cfg)
    dataset = _dataset(cfg)
    out = _ensure_out(cfg)
    mode = args.mode or _cfg_get(cfg, "evaluation.mode", "closed")
    if mode not in _EVAL_MODES:
        raise ConfigError(f"--mode: unknown mode {mode!r}")
    return _EVAL_MODES[mode](cfg, dataset, prov, out, max(1, args.jobs))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidprint",
        description="cross-platform video recognition from encrypted traffic traces",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, extra in (
        ("synth", cmd_synth, "generate a synthetic dataset (binned CSVs + manifest)"),
        ("preprocess", cmd_preprocess, "write preprocessed feature CSVs"),
        ("train", cmd_train, "train a triplet encoder and save it"),
        ("embed", cmd_embed, "export embeddings for a trained encoder"),
        ("eval", cmd_eval, "run an evaluation protocol"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel jobs for folds/grid cells")
        if name == "eval":
            p.add_argument(
                "--mode", choices=sorted(_EVAL_MODES), default=None,
                help="evaluation protocol (default: evaluation.mode or closed)",
            )
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LoadError, ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

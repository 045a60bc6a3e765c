"""Experiment protocols: fold plans, closed/open-set runs, platform-pair
grids, threshold and parameter sweeps, metrics.

Every run is a pure function of (dataset, configs, seed): per-job rngs derive
from the master seed and the job's identity, and parallel execution merges
results in a fixed order, so reports are identical at any job count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classifiers as cls_mod
from . import encoder as enc_mod
from .core import derive_rng, derive_seed, minmax_normalize
from .ingestion import VBR_PLATFORM, Dataset
from .preprocess import FeatureVector, PreprocessConfig, augment_gaussian, preprocess_pipeline

CLASSIFIER_KINDS = ("KNN1", "KNN10", "NMEV", "CNN")

DEFAULT_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(21))

UNKNOWN_LABEL = "UNKNOWN"


# ------------------------------------------------------------ fold plans


@dataclass(frozen=True)
class Fold:
    fold_id: int
    encoder_classes: tuple[str, ...]
    classify_classes: tuple[str, ...]
    known_classes: tuple[str, ...] | None = None
    unknown_classes: tuple[str, ...] | None = None


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]
    seed: int


def make_folds(all_classes, n_classify: int, seed: int, open_set: bool = False) -> FoldPlan:
    """Rotating cross-validation folds: classes are shuffled once, then
    partitioned into mutually exclusive classification sets covering every
    class; each fold's encoder set is all remaining classes. Open-set folds
    split the classification set in half: known then unknown."""
    classes = list(all_classes)
    if len(set(classes)) != len(classes):
        raise ValueError("class list contains duplicates")
    if n_classify < 1 or len(classes) % n_classify != 0:
        raise ValueError(f"n_classify={n_classify} must divide the {len(classes)} classes")
    if open_set and n_classify % 2 != 0:
        raise ValueError("open-set folds need an even classification set")
    rng = derive_rng(seed, "folds")
    shuffled = [classes[i] for i in rng.permutation(len(classes))]
    folds = []
    for fold_id, start in enumerate(range(0, len(shuffled), n_classify)):
        chunk = tuple(shuffled[start:start + n_classify])
        rest = tuple(c for c in shuffled if c not in chunk)
        known = unknown = None
        if open_set:
            half = n_classify // 2
            known, unknown = chunk[:half], chunk[half:]
        folds.append(
            Fold(
                fold_id=fold_id,
                encoder_classes=rest,
                classify_classes=chunk,
                known_classes=known,
                unknown_classes=unknown,
            )
        )
    return FoldPlan(folds=tuple(folds), seed=seed)


def _assert_fold(fold: Fold) -> None:
    overlap = set(fold.encoder_classes) & set(fold.classify_classes)
    if overlap:
        raise ValueError(f"encoder and classification classes overlap: {sorted(overlap)[:5]}")


# ------------------------------------------------------------ metrics


def metrics(confusion):
    """(accuracy, per-class precision, per-class recall) from a confusion
    matrix conf[true, predicted]; zero-prediction precision is 0."""
    conf = np.asarray(confusion, dtype=np.float64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ValueError("confusion matrix must be square")
    total = conf.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = float(np.trace(conf) / total)
    col = conf.sum(axis=0)
    row = conf.sum(axis=1)
    diag = np.diag(conf).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    return accuracy, precision, recall


def _confusion(truth, preds, n: int) -> np.ndarray:
    conf = np.zeros((n, n), dtype=np.int64)
    for t, p in zip(truth, preds):
        conf[t, p] += 1
    return conf


@dataclass
class EvalReport:
    fold_id: int
    accuracy: float
    precision: list[float]
    recall: list[float]
    confusion: list[list[int]]
    class_labels: list[str]
    config_echo: dict = field(default_factory=dict)
    known_precision_mean: float | None = None
    known_recall_mean: float | None = None

    def to_dict(self) -> dict:
        out = {
            "fold_id": self.fold_id,
            "accuracy": self.accuracy,
            "precision": [float(p) for p in self.precision],
            "recall": [float(r) for r in self.recall],
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "class_labels": list(self.class_labels),
            "config_echo": self.config_echo,
        }
        if self.known_precision_mean is not None:
            out["known_precision_mean"] = self.known_precision_mean
            out["known_recall_mean"] = self.known_recall_mean
        return out


# ------------------------------------------------------------ features


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "KNN1"
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 0.1
    hidden: int = 128

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"classifier kind must be one of {CLASSIFIER_KINDS}")


def _feature_matrix(dataset: Dataset, platform: str, classes, pre_cfg: PreprocessConfig,
                    max_trials: int | None = None):
    """(X, y) of pipeline features for the listed classes on one platform;
    labels are indices into `classes`."""
    rows, labels = [], []
    for ci, cls in enumerate(classes):
        entries = dataset.entries(platform, cls, max_trials=max_trials)
        if not entries:
            raise ValueError(f"no traces for class {cls!r} on platform {platform!r}")
        for entry in entries:
            rows.append(preprocess_pipeline(entry, pre_cfg).values)
            labels.append(ci)
    return np.asarray(rows), np.asarray(labels, dtype=np.int64)


def encoder_feature_dataset(
    dataset: Dataset,
    classes,
    pair: tuple[str, str],
    pre_cfg: PreprocessConfig,
    n_augment: int,
    augment_fraction: float,
    seed: int,
    trials_limit: int | None,
) -> Dataset:
    """Featurized encoder-training subset. Augmented replicas are drawn in
    the counts domain (before normalization), per platform and class."""
    counts_cfg = replace(pre_cfg, normalize=False)
    traces: dict[tuple[str, str, int], FeatureVector] = {}
    for platform in pair:
        for cls in classes:
            entries = dataset.entries(platform, cls, max_trials=trials_limit)
            if not entries:
                raise ValueError(f"no traces for class {cls!r} on platform {platform!r}")
            counts = [preprocess_pipeline(e, counts_cfg) for e in entries]
            next_trial = max(fv.trial for fv in counts) + 1
            for j in range(n_augment):
                src = counts[j % len(entries)]
                rng = derive_rng(seed, "augment", platform, cls, j)
                vals = augment_gaussian(src.values, augment_fraction, rng)
                counts.append(
                    FeatureVector(vals, platform, cls, trial=next_trial + j, bin_s=src.bin_s)
                )
            for fv in counts:
                vals = minmax_normalize(fv.values) if pre_cfg.normalize else fv.values
                traces[(platform, cls, fv.trial)] = FeatureVector(
                    vals, platform, cls, fv.trial, fv.bin_s
                )
    return Dataset(traces=traces, class_list=list(classes), platform_list=list(pair))


def _train_fold_encoder(dataset, fold, pair, pre_cfg, enc_cfg, n_augment, augment_fraction,
                        trials_limit, seed):
    enc_ds = encoder_feature_dataset(
        dataset, fold.encoder_classes, pair, pre_cfg,
        n_augment, augment_fraction, seed, trials_limit,
    )
    cfg = replace(enc_cfg, seed=derive_seed(seed, "encoder"))
    return enc_mod.train_encoder(enc_ds, list(fold.encoder_classes), pair, cfg)


def _fit_predict(cls_cfg: ClassifierConfig, x_train, y_train, x_test, n_out: int, seed: int):
    if cls_cfg.kind == "KNN1":
        model = cls_mod.knn_fit(x_train, y_train, k=1)
        return cls_mod.knn_predict_batch(model, x_test)
    if cls_cfg.kind == "KNN10":
        model = cls_mod.knn_fit(x_train, y_train, k=10)
        return cls_mod.knn_predict_batch(model, x_test)
    if cls_cfg.kind == "NMEV":
        model = cls_mod.nmev_fit(x_train, y_train)
        return cls_mod.nmev_predict_batch(model, x_test)
    model = cls_mod.train_softmax_cnn(
        x_train, y_train, n_out=n_out,
        epochs=cls_cfg.epochs, batch=cls_cfg.batch_size,
        lr=cls_cfg.learning_rate, seed=seed, hidden=cls_cfg.hidden,
    )
    return np.argmax(cls_mod.predict_proba_batch(model, x_test), axis=1)


# ------------------------------------------------------------ closed set


def run_closed_set(
    dataset: Dataset,
    train_platform: str,
    test_platform: str,
    fold: Fold,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    use_encoder: bool = True,
    n_augment: int = 0,
    augment_fraction: float = 0.05,
    trials_limit: int | None = None,
    seed: int = 0,
) -> EvalReport:
    """Train the encoder on the fold's encoder classes over the platform
    pair, fit the classifier on the train platform's held-out classes, score
    on the test platform. use_encoder=False is the raw-feature baseline."""
    _assert_fold(fold)
    cls_cfg = cls_cfg or ClassifierConfig()
    classes = list(fold.classify_classes)

    model = None
    if use_encoder:
        model = _train_fold_encoder(
            dataset, fold, (train_platform, test_platform), pre_cfg, enc_cfg,
            n_augment, augment_fraction, trials_limit, seed,
        )
    x_train, y_train = _feature_matrix(dataset, train_platform, classes, pre_cfg)
    x_test, y_test = _feature_matrix(dataset, test_platform, classes, pre_cfg)
    if model is not None:
        x_train = enc_mod.embed_many(model, x_train)
        x_test = enc_mod.embed_many(model, x_test)
    preds = _fit_predict(
        cls_cfg, x_train, y_train, x_test, n_out=len(classes),
        seed=derive_seed(seed, "classifier"),
    )
    conf = _confusion(y_test, preds, len(classes))
    accuracy, precision, recall = metrics(conf)
    return EvalReport(
        fold_id=fold.fold_id,
        accuracy=accuracy,
        precision=precision.tolist(),
        recall=recall.tolist(),
        confusion=conf.tolist(),
        class_labels=classes,
        config_echo={
            "train_platform": train_platform,
            "test_platform": test_platform,
            "classifier": cls_cfg.kind,
            "arch": enc_cfg.arch,
            "use_encoder": use_encoder,
            "n_augment": n_augment,
            "trials_limit": trials_limit,
        },
    )


# ------------------------------------------------------------ open set


def _open_set_probs(
    dataset, train_platform, test_platform, fold, pre_cfg, enc_cfg,
    cls_cfg: ClassifierConfig, n_out: int | None, use_encoder: bool, seed: int,
):
    """Train encoder + softmax CNN once; return (probs, truth, known) where
    truth == len(known) marks an unknown-class sample."""
    _assert_fold(fold)
    if fold.known_classes is None or fold.unknown_classes is None:
        raise ValueError("fold has no known/unknown split; build the plan with open_set=True")
    known = list(fold.known_classes)
    unknown = list(fold.unknown_classes)
    if n_out is None:
        n_out = len(known) + 1  # one untrained spare unit

    model = None
    if use_encoder:
        model = _train_fold_encoder(
            dataset, fold, (train_platform, test_platform), pre_cfg, enc_cfg, 0, 0.05, None, seed
        )

    x_train, y_train = _feature_matrix(dataset, train_platform, known, pre_cfg)
    # 50/50 known/unknown test split, balanced by trial truncation
    trials_known = min(len(dataset.trials(test_platform, c)) for c in known)
    trials_unknown = min(len(dataset.trials(test_platform, c)) for c in unknown)
    per_class = min(trials_known, trials_unknown)
    x_known, y_known = _feature_matrix(dataset, test_platform, known, pre_cfg, max_trials=per_class)
    x_unknown, _ = _feature_matrix(dataset, test_platform, unknown, pre_cfg, max_trials=per_class)
    if model is not None:
        x_train = enc_mod.embed_many(model, x_train)
        x_known = enc_mod.embed_many(model, x_known)
        x_unknown = enc_mod.embed_many(model, x_unknown)

    cnn = cls_mod.train_softmax_cnn(
        x_train, y_train, n_out=n_out,
        epochs=cls_cfg.epochs, batch=cls_cfg.batch_size,
        lr=cls_cfg.learning_rate, seed=derive_seed(seed, "classifier"),
        hidden=cls_cfg.hidden,
    )
    x_test = np.concatenate([x_known, x_unknown])
    truth = np.concatenate([y_known, np.full(x_unknown.shape[0], len(known), dtype=np.int64)])
    probs = cls_mod.predict_proba_batch(cnn, x_test)
    return probs, truth, known


def _open_set_confusion(probs, truth, n_known: int, threshold: float) -> np.ndarray:
    conf = np.zeros((n_known + 1, n_known + 1), dtype=np.int64)
    for p_row, t in zip(probs, truth):
        pred = cls_mod.open_set_classify(p_row, threshold)
        if pred == cls_mod.UNKNOWN or pred >= n_known:
            pred = n_known  # a spare untrained unit is not a known class
        conf[t, pred] += 1
    return conf


def _open_set_report(probs, truth, known, threshold, fold_id, echo) -> EvalReport:
    n_known = len(known)
    conf = _open_set_confusion(probs, truth, n_known, threshold)
    accuracy, precision, recall = metrics(conf)
    return EvalReport(
        fold_id=fold_id,
        accuracy=accuracy,
        precision=precision.tolist(),
        recall=recall.tolist(),
        confusion=conf.tolist(),
        class_labels=list(known) + [UNKNOWN_LABEL],
        config_echo=echo,
        known_precision_mean=float(np.mean(precision[:n_known])),
        known_recall_mean=float(np.mean(recall[:n_known])),
    )


def run_open_set(
    dataset: Dataset,
    train_platform: str,
    test_platform: str,
    fold: Fold,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    threshold: float = 0.8,
    n_out: int | None = None,
    use_encoder: bool = True,
    seed: int = 0,
) -> EvalReport:
    """Closed training on known classes, test traffic mixes known and unknown
    classes 50/50; predictions below the softmax threshold become UNKNOWN."""
    cls_cfg = cls_cfg or ClassifierConfig(kind="CNN")
    probs, truth, known = _open_set_probs(
        dataset, train_platform, test_platform, fold, pre_cfg, enc_cfg,
        cls_cfg, n_out, use_encoder, seed,
    )
    echo = {
        "train_platform": train_platform,
        "test_platform": test_platform,
        "threshold": threshold,
        "arch": enc_cfg.arch,
        "use_encoder": use_encoder,
    }
    return _open_set_report(probs, truth, known, threshold, fold.fold_id, echo)


def threshold_sweep(
    dataset: Dataset,
    train_platform: str,
    test_platform: str,
    fold: Fold,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    thresholds=DEFAULT_THRESHOLDS,
    n_out: int | None = None,
    use_encoder: bool = True,
    seed: int = 0,
) -> dict:
    """One trained model, every threshold: (threshold, precision, recall,
    accuracy) rows plus the argmax-precision threshold."""
    cls_cfg = cls_cfg or ClassifierConfig(kind="CNN")
    probs, truth, known = _open_set_probs(
        dataset, train_platform, test_platform, fold, pre_cfg, enc_cfg,
        cls_cfg, n_out, use_encoder, seed,
    )
    n_known = len(known)
    curve = []
    for t in thresholds:
        conf = _open_set_confusion(probs, truth, n_known, t)
        accuracy, precision, recall = metrics(conf)
        curve.append(
            {
                "threshold": float(t),
                "accuracy": accuracy,
                "known_precision_mean": float(np.mean(precision[:n_known])),
                "known_recall_mean": float(np.mean(recall[:n_known])),
            }
        )
    best = max(curve, key=lambda r: r["known_precision_mean"])
    return {
        "fold_id": fold.fold_id,
        "train_platform": train_platform,
        "test_platform": test_platform,
        "curve": curve,
        "best_precision_threshold": best["threshold"],
    }


# ------------------------------------------------------------ pair grid


@dataclass
class PairGridReport:
    training_inputs: list[str]
    testing_platforms: list[str]
    embedding_mean: list[list[float | None]]  # [test][train]
    raw_mean: list[list[float | None]]
    embedding_folds: list[list[list[float] | None]]
    raw_folds: list[list[list[float] | None]]
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "training_inputs": self.training_inputs,
            "testing_platforms": self.testing_platforms,
            "embedding_mean": self.embedding_mean,
            "raw_mean": self.raw_mean,
            "embedding_folds": self.embedding_folds,
            "raw_folds": self.raw_folds,
            "config_echo": self.config_echo,
        }


def _grid_cell_job(args):
    (dataset, train_in, test_p, fold, pre_cfg, enc_cfg, cls_cfg, use_encoder, seed) = args
    report = run_closed_set(
        dataset, train_in, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
        use_encoder=use_encoder,
        seed=derive_seed(seed, "grid", train_in, test_p, fold.fold_id,
                         "emb" if use_encoder else "raw"),
    )
    return report.accuracy


def _run_jobs(worker, arg_list, n_jobs: int):
    if n_jobs <= 1:
        return [worker(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(worker, arg_list))


def run_pair_grid(
    dataset: Dataset,
    fold_plan: FoldPlan,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> PairGridReport:
    """Mean accuracy per ordered (training input, testing platform) pair for
    both the raw baseline and the embedding pipeline, on identical folds.
    VBR (when present) serves as a training input only; same-platform cells
    are left empty."""
    cls_cfg = cls_cfg or ClassifierConfig()
    testing = [p for p in dataset.platform_list if p != VBR_PLATFORM]
    training = list(dataset.platform_list)
    if len(testing) < 2:
        raise ValueError("pair grid needs at least two non-VBR platforms")

    jobs, slots = [], []
    for ti, test_p in enumerate(testing):
        for si, train_in in enumerate(training):
            if train_in == test_p:
                continue
            for fold in fold_plan.folds:
                for use_encoder in (False, True):
                    jobs.append(
                        (dataset, train_in, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
                         use_encoder, seed)
                    )
                    slots.append((ti, si, fold.fold_id, use_encoder))

    results = _run_jobs(_grid_cell_job, jobs, n_jobs)

    n_folds = len(fold_plan.folds)
    emb_folds = [[None if training[si] == testing[ti] else [0.0] * n_folds
                  for si in range(len(training))] for ti in range(len(testing))]
    raw_folds = [[None if training[si] == testing[ti] else [0.0] * n_folds
                  for si in range(len(training))] for ti in range(len(testing))]
    for (ti, si, fold_id, use_encoder), acc in zip(slots, results):
        target = emb_folds if use_encoder else raw_folds
        target[ti][si][fold_id] = acc

    def _means(folds):
        return [
            [None if cell is None else float(np.mean(cell)) for cell in row]
            for row in folds
        ]

    return PairGridReport(
        training_inputs=training,
        testing_platforms=testing,
        embedding_mean=_means(emb_folds),
        raw_mean=_means(raw_folds),
        embedding_folds=emb_folds,
        raw_folds=raw_folds,
        config_echo={"classifier": cls_cfg.kind, "arch": enc_cfg.arch, "n_folds": n_folds},
    )


# ------------------------------------------------------------ sweeps


SWEEP_AXES = (
    "training_classes",
    "trials_per_class",
    "bin_s",
    "duration_min",
    "augmentation",
    "base_model",
)


def _sweep_job(args):
    (dataset, train_p, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
     n_augment, trials_limit, seed, tag) = args
    report = run_closed_set(
        dataset, train_p, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
        use_encoder=True, n_augment=n_augment, trials_limit=trials_limit,
        seed=derive_seed(seed, "sweep", tag, fold.fold_id),
    )
    return report.accuracy


def sweep(
    dataset: Dataset,
    fold_plan: FoldPlan,
    axis: str,
    values,
    train_platform: str,
    test_platform: str,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    seed: int = 0,
    n_jobs: int = 1,
    n_folds: int | None = None,
) -> list[dict]:
    """One closed-set evaluation per axis value, everything else fixed."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    cls_cfg = cls_cfg or ClassifierConfig()
    folds = fold_plan.folds[:n_folds] if n_folds else fold_plan.folds

    jobs, slots = [], []
    for vi, value in enumerate(values):
        pre, enc_c, n_augment, trials_limit = pre_cfg, enc_cfg, 0, None
        run_folds = folds
        if axis == "training_classes":
            m = int(value)
            run_folds = []
            for f in folds:
                if m > len(f.encoder_classes):
                    raise ValueError(f"fold {f.fold_id} has only {len(f.encoder_classes)} encoder classes")
                run_folds.append(replace(f, encoder_classes=f.encoder_classes[:m]))
        elif axis == "trials_per_class":
            trials_limit = int(value)
        elif axis == "bin_s":
            pre = replace(pre_cfg, bin_s=float(value))
        elif axis == "duration_min":
            pre = replace(pre_cfg, duration_s=float(value) * 60.0)
        elif axis == "augmentation":
            n_augment = 5 if value else 0
        elif axis == "base_model":
            enc_c = replace(enc_cfg, arch=str(value))
        for fold in run_folds:
            jobs.append(
                (dataset, train_platform, test_platform, fold, pre, enc_c, cls_cfg,
                 n_augment, trials_limit, seed, f"{axis}={value}")
            )
            slots.append(vi)

    results = _run_jobs(_sweep_job, jobs, n_jobs)
    rows = []
    for vi, value in enumerate(values):
        accs = [acc for slot, acc in zip(slots, results) if slot == vi]
        rows.append(
            {
                "axis": axis,
                "value": value,
                "accuracy_mean": float(np.mean(accs)),
                "accuracy_folds": [float(a) for a in accs],
            }
        )
    return rows


# ------------------------------------------------------------ binary pairs


def run_binary(
    dataset: Dataset,
    train_platform: str,
    test_platform: str,
    fold: Fold,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    epochs: int = 50,
    batch: int = 128,
    lr: float = 0.1,
    hidden: int = 128,
    trials_limit: int | None = None,
    seed: int = 0,
) -> dict:
    """Same/different video pair classification across the platform pair.
    Pairs for training come from the fold's encoder classes, pairs for
    testing from the held-out classes; raw and embedding variants share
    folds, pair draws and classifier settings."""
    _assert_fold(fold)

    def _side_features(platform, classes):
        out = []
        for cl in classes:
            for entry in dataset.entries(platform, cl, max_trials=trials_limit):
                out.append(preprocess_pipeline(entry, pre_cfg))
        return out

    train_a = _side_features(train_platform, fold.encoder_classes)
    train_b = _side_features(test_platform, fold.encoder_classes)
    test_a = _side_features(train_platform, fold.classify_classes)
    test_b = _side_features(test_platform, fold.classify_classes)

    model = _train_fold_encoder(
        dataset, fold, (train_platform, test_platform), pre_cfg, enc_cfg,
        0, 0.05, trials_limit, seed,
    )

    def _embed_side(feats):
        emb = enc_mod.embed_many(model, np.stack([f.values for f in feats]))
        return [
            FeatureVector(e, f.platform, f.video_id, f.trial, f.bin_s)
            for e, f in zip(emb, feats)
        ]

    results = {}
    for variant in ("raw", "embedding"):
        if variant == "raw":
            tr_a, tr_b, te_a, te_b = train_a, train_b, test_a, test_b
        else:
            tr_a, tr_b = _embed_side(train_a), _embed_side(train_b)
            te_a, te_b = _embed_side(test_a), _embed_side(test_b)
        train_pairs = cls_mod.make_binary_pairs(
            tr_a, tr_b, derive_rng(seed, "binary-train", variant)
        )
        test_pairs = cls_mod.make_binary_pairs(
            te_a, te_b, derive_rng(seed, "binary-test", variant)
        )
        cnn = cls_mod.train_binary(
            train_pairs, epochs=epochs, batch=batch, lr=lr,
            seed=derive_seed(seed, "binary", variant), hidden=hidden,
        )
        x_test = np.stack([p.concat() for p in test_pairs])
        y_test = np.asarray([p.label for p in test_pairs])
        preds = np.argmax(cls_mod.predict_proba_batch(cnn, x_test), axis=1)
        results[variant] = {
            "accuracy": float(np.mean(preds == y_test)),
            "n_train_pairs": len(train_pairs),
            "n_test_pairs": len(test_pairs),
        }
    results["fold_id"] = fold.fold_id
    results["train_platform"] = train_platform
    results["test_platform"] = test_platform
    return results


# ------------------------------------------------------------ fold loops


def _closed_fold_job(args):
    (dataset, train_p, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
     use_encoder, n_augment, trials_limit, seed) = args
    return run_closed_set(
        dataset, train_p, test_p, fold, pre_cfg, enc_cfg, cls_cfg,
        use_encoder=use_encoder, n_augment=n_augment, trials_limit=trials_limit,
        seed=derive_seed(seed, "closed", fold.fold_id, "emb" if use_encoder else "raw"),
    )


def run_closed_set_folds(
    dataset: Dataset,
    train_platform: str,
    test_platform: str,
    fold_plan: FoldPlan,
    pre_cfg: PreprocessConfig,
    enc_cfg: enc_mod.EncoderConfig,
    cls_cfg: ClassifierConfig | None = None,
    use_encoder: bool = True,
    n_augment: int = 0,
    trials_limit: int | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[EvalReport]:
    cls_cfg = cls_cfg or ClassifierConfig()
    jobs = [
        (dataset, train_platform, test_platform, fold, pre_cfg, enc_cfg, cls_cfg,
         use_encoder, n_augment, trials_limit, seed)
        for fold in fold_plan.folds
    ]
    return _run_jobs(_closed_fold_job, jobs, n_jobs)

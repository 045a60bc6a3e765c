"""Downstream classifiers over embeddings (or raw features for baselines).

KNN is the main multiclass classifier (k=1 by default); N-MEV keeps one mean
embedding per class; the softmax CNN handles closed-set, open-set (via
max-probability thresholding) and binary same/different pair classification.
All labels here are integer class indices; callers map video ids to indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import modelio, nn
from .core import derive_rng, pairwise_distances

UNKNOWN = -1
SAME = 1
DIFFERENT = 0

_CONV_FILTERS = 8
_CONV_WIDTH = 3


# ------------------------------------------------------------ KNN


@dataclass
class KnnModel:
    points: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) int
    k: int


def knn_fit(embeddings, labels, k: int = 1) -> KnnModel:
    pts = np.asarray(embeddings, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) embedding matrix")
    if lab.shape != (pts.shape[0],):
        raise ValueError("labels must match the number of embeddings")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > pts.shape[0]:
        raise ValueError(f"k={k} exceeds the {pts.shape[0]} stored points")
    return KnnModel(points=pts.copy(), labels=lab.copy(), k=k)


def _knn_vote(neigh_labels, neigh_dists) -> int:
    # majority -> smaller summed distance -> smaller label index
    best = None
    for lab in np.unique(neigh_labels):
        sel = neigh_labels == lab
        key = (-int(sel.sum()), float(neigh_dists[sel].sum()), int(lab))
        if best is None or key < best:
            best = key
    return best[2]


def knn_predict(model: KnnModel, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.size != model.points.shape[1]:
        raise ValueError(f"query dimension {q.shape} != stored dimension {model.points.shape[1]}")
    d = pairwise_distances(q[None, :], model.points)[0]
    order = np.argsort(d, kind="stable")[: model.k]
    return _knn_vote(model.labels[order], d[order])


def knn_predict_batch(model: KnnModel, queries) -> np.ndarray:
    qs = np.asarray(queries, dtype=np.float64)
    d = pairwise_distances(qs, model.points)
    out = np.empty(qs.shape[0], dtype=np.int64)
    for i in range(qs.shape[0]):
        order = np.argsort(d[i], kind="stable")[: model.k]
        out[i] = _knn_vote(model.labels[order], d[i][order])
    return out


# ------------------------------------------------------------ N-MEV


@dataclass
class NmevModel:
    class_labels: np.ndarray  # (c,) int, sorted
    means: np.ndarray  # (c, d)


def nmev_fit(embeddings, labels) -> NmevModel:
    pts = np.asarray(embeddings, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) embedding matrix")
    uniq = np.unique(lab)
    means = np.stack([pts[lab == c].mean(axis=0) for c in uniq])
    if not np.all(np.isfinite(means)):
        raise ValueError("non-finite class mean")
    return NmevModel(class_labels=uniq, means=means)


def nmev_predict(model: NmevModel, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    d = pairwise_distances(q[None, :], model.means)[0]
    return int(model.class_labels[int(np.argmin(d))])


def nmev_predict_batch(model: NmevModel, queries) -> np.ndarray:
    d = pairwise_distances(np.asarray(queries, dtype=np.float64), model.means)
    return model.class_labels[np.argmin(d, axis=1)]


# ------------------------------------------------------------ softmax CNN


@dataclass
class SoftmaxClassifier:
    """conv (8x3) + rectifier, max-pool 2, flatten, two rectified dense
    layers, dropout, softmax output layer."""

    input_len: int
    n_out: int
    hidden: int
    dropout_rate: float
    params: list[np.ndarray]
    loss_history: list[float] = field(default_factory=list)


def _init_softmax(rng, input_len: int, n_out: int, hidden: int, dropout_rate: float) -> SoftmaxClassifier:
    if input_len < _CONV_WIDTH + 1:
        raise ValueError(f"input_len {input_len} too short for conv+pool")
    flat = ((input_len - _CONV_WIDTH + 1) // 2) * _CONV_FILTERS
    params = [
        nn.uniform_init(rng, (_CONV_FILTERS, _CONV_WIDTH), _CONV_WIDTH),
        np.zeros(_CONV_FILTERS),
        nn.uniform_init(rng, (flat, hidden), flat),
        np.zeros(hidden),
        nn.uniform_init(rng, (hidden, hidden), hidden),
        np.zeros(hidden),
        nn.uniform_init(rng, (hidden, n_out), hidden),
        np.zeros(n_out),
    ]
    return SoftmaxClassifier(
        input_len=input_len, n_out=n_out, hidden=hidden, dropout_rate=dropout_rate, params=params
    )


def _softmax_forward(model: SoftmaxClassifier, x, train_mode=False, rng=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.input_len:
        raise ValueError(f"input length {x.shape[1]} != model input_len {model.input_len}")
    wc, bc, w1, b1, w2, b2, w3, b3 = model.params
    conv = nn.relu(nn.conv1d_forward(x, wc, bc))
    pooled, second = nn.maxpool2_forward(conv)
    flat = pooled.reshape(x.shape[0], -1)
    h1 = nn.relu(nn.dense_forward(flat, w1, b1))
    h2 = nn.relu(nn.dense_forward(h1, w2, b2))
    mask = None
    h2d = h2
    if train_mode and model.dropout_rate > 0:
        mask = nn.dropout_mask(rng, h2.shape, model.dropout_rate)
        h2d = h2 * mask
    probs = nn.softmax(nn.dense_forward(h2d, w3, b3))
    return probs, (x, conv, second, flat, h1, h2, mask)


def _softmax_backward(model: SoftmaxClassifier, cache, dlogits):
    x, conv, second, flat, h1, h2, mask = cache
    wc, _, w1, _, w2, _, w3, _ = model.params
    h2d = h2 if mask is None else h2 * mask
    dh2d, dw3, db3 = nn.dense_backward(h2d, w3, dlogits)
    dh2 = dh2d if mask is None else dh2d * mask
    dh2 = nn.relu_grad(h2, dh2)
    dh1, dw2, db2 = nn.dense_backward(h1, w2, dh2)
    dh1 = nn.relu_grad(h1, dh1)
    dflat, dw1, db1 = nn.dense_backward(flat, w1, dh1)
    dpool = dflat.reshape(second.shape)
    dconv = nn.maxpool2_backward(second, conv.shape, dpool)
    dconv = nn.relu_grad(conv, dconv)
    _, dwc, dbc = nn.conv1d_backward(x, wc, dconv)
    return [dwc, dbc, dw1, db1, dw2, db2, dw3, db3]


def train_softmax_cnn(
    inputs,
    labels,
    n_out: int,
    epochs: int = 50,
    batch: int = 128,
    lr: float = 0.1,
    seed: int = 0,
    hidden: int = 128,
    dropout_rate: float = 0.1,
) -> SoftmaxClassifier:
    """Plain SGD on sparse categorical cross-entropy; deterministic in seed."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("inputs must be (n, len) with one integer label per row")
    if y.size and (y.min() < 0 or y.max() >= n_out):
        raise ValueError(f"labels must lie in [0, {n_out})")
    rng = derive_rng(seed, "softmax-train")
    model = _init_softmax(rng, x.shape[1], n_out, hidden, dropout_rate)
    for _epoch in range(epochs):
        perm = rng.permutation(x.shape[0])
        loss_sum = 0.0
        for start in range(0, x.shape[0], batch):
            idx = perm[start:start + batch]
            probs, cache = _softmax_forward(model, x[idx], train_mode=True, rng=rng)
            loss_sum += nn.sparse_xent_loss(probs, y[idx]) * idx.size
            grads = _softmax_backward(model, cache, nn.sparse_xent_grad(probs, y[idx]))
            for p, g in zip(model.params, grads):
                p -= lr * g
        model.loss_history.append(loss_sum / x.shape[0])
    return model


def predict_softmax(model: SoftmaxClassifier, x) -> np.ndarray:
    """Probability vector; dropout off, rows sum to 1."""
    probs, _ = _softmax_forward(model, x, train_mode=False)
    return probs[0] if np.asarray(x).ndim == 1 else probs


def predict_proba_batch(model: SoftmaxClassifier, x) -> np.ndarray:
    probs, _ = _softmax_forward(model, x, train_mode=False)
    return probs


def open_set_classify(probs, threshold: float) -> int:
    """UNKNOWN iff the winning probability is below the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    p = np.asarray(probs, dtype=np.float64)
    if p.max() < threshold:
        return UNKNOWN
    return int(np.argmax(p))


# ------------------------------------------------------------ binary pairs


@dataclass(frozen=True)
class PairSample:
    a: np.ndarray
    b: np.ndarray
    video_a: str
    video_b: str

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise ValueError("pair halves must have equal length")

    @property
    def label(self) -> int:
        return SAME if self.video_a == self.video_b else DIFFERENT

    def concat(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])


def make_binary_pairs(features_a, features_b, rng: np.random.Generator) -> list[PairSample]:
    """Cross product of the two sides, keeping all same-video pairs and
    undersampling the majority class to balance. Deterministic under rng."""
    same: list[PairSample] = []
    diff: list[PairSample] = []
    for fa in features_a:
        for fb in features_b:
            pair = PairSample(a=fa.values, b=fb.values, video_a=fa.video_id, video_b=fb.video_id)
            (same if pair.label == SAME else diff).append(pair)
    if not same:
        raise ValueError("no same-video pairs between the two sides")
    if not diff:
        raise ValueError("no different-video pairs between the two sides")
    if len(diff) > len(same):
        keep = np.sort(rng.choice(len(diff), size=len(same), replace=False))
        diff = [diff[i] for i in keep]
    elif len(same) > len(diff):
        keep = np.sort(rng.choice(len(same), size=len(diff), replace=False))
        same = [same[i] for i in keep]
    return same + diff


def train_binary(
    pairs: list[PairSample],
    epochs: int = 50,
    batch: int = 128,
    lr: float = 0.1,
    seed: int = 0,
    hidden: int = 128,
) -> SoftmaxClassifier:
    labels = np.asarray([p.label for p in pairs], dtype=np.int64)
    n_same = int((labels == SAME).sum())
    if n_same * 2 != labels.size:
        raise ValueError("binary training needs a balanced pair set")
    x = np.stack([p.concat() for p in pairs])
    return train_softmax_cnn(x, labels, n_out=2, epochs=epochs, batch=batch, lr=lr, seed=seed, hidden=hidden)


def predict_binary(model: SoftmaxClassifier, pair: PairSample) -> int:
    return int(np.argmax(predict_softmax(model, pair.concat())))


# ------------------------------------------------------------ serialization


def save_knn(model: KnnModel, path) -> None:
    doc = {
        "kind": "knn",
        "format": modelio.FORMAT_VERSION,
        "k": model.k,
        "labels": model.labels.tolist(),
        "points": modelio.params_to_doc([model.points]),
    }
    modelio.save_doc(doc, path)


def load_knn(path) -> KnnModel:
    doc = modelio.load_doc(path, "knn")
    return KnnModel(
        points=modelio.params_from_doc(doc["points"])[0],
        labels=np.asarray(doc["labels"], dtype=np.int64),
        k=int(doc["k"]),
    )


def save_softmax(model: SoftmaxClassifier, path) -> None:
    doc = {
        "kind": "softmax_cnn",
        "format": modelio.FORMAT_VERSION,
        "input_len": model.input_len,
        "n_out": model.n_out,
        "hidden": model.hidden,
        "dropout_rate": model.dropout_rate,
        "params": modelio.params_to_doc(model.params),
    }
    modelio.save_doc(doc, path)


def load_softmax(path) -> SoftmaxClassifier:
    doc = modelio.load_doc(path, "softmax_cnn")
    return SoftmaxClassifier(
        input_len=int(doc["input_len"]),
        n_out=int(doc["n_out"]),
        hidden=int(doc["hidden"]),
        dropout_rate=float(doc["dropout_rate"]),
        params=modelio.params_from_doc(doc["params"]),
    )

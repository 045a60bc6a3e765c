"""Triplet-loss encoder: base networks, mining, training, inference.

An encoder maps a fixed-length feature vector to an embedding in which
same-video traces from different platforms sit close together. Three base
architectures are supported:

  MLP    three dense layers as wide as the embedding (rectifier on the hidden
         ones, linear output), dropout on the embedding in train mode.
  CNN1D  conv (8 filters, width 3) + rectifier, max-pool (width 2), flatten,
         a rectified dense layer, a linear embedding layer, dropout.
  RNN    a single LSTM over the bin sequence (one scalar per step), hidden
         size equal to the embedding; the final hidden state is the
         embedding, dropout in train mode.

Training minimizes the hinge triplet loss
    max(d(anchor, positive) - d(anchor, negative) + margin, 0)
with Adam, using either exhaustive offline mining (every anchor paired with
one instance of every other class) or online semi-hard mining inside each
batch. All of it is a pure function of (dataset, config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import modelio, nn
from .core import derive_rng, euclidean_distance, pairwise_distances
from .ingestion import Dataset
from .preprocess import FeatureVector

ARCH_MLP = "MLP"
ARCH_CNN1D = "CNN1D"
ARCH_RNN = "RNN"
ARCHS = (ARCH_MLP, ARCH_CNN1D, ARCH_RNN)

MINING_OFFLINE = "OFFLINE_EXHAUSTIVE"
MINING_SEMIHARD = "ONLINE_SEMIHARD"

_EPOCH_DEFAULTS = {MINING_OFFLINE: 5, MINING_SEMIHARD: 20}


@dataclass(frozen=True)
class EncoderConfig:
    arch: str = ARCH_MLP
    embedding_dim: int = 128
    dropout_rate: float = 0.1
    margin: float = 1.0
    mining: str = MINING_OFFLINE
    epochs: int | None = None  # None -> 5 offline / 20 online
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}")
        if self.mining not in _EPOCH_DEFAULTS:
            raise ValueError(f"mining must be one of {tuple(_EPOCH_DEFAULTS)}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def resolved_epochs(self) -> int:
        return _EPOCH_DEFAULTS[self.mining] if self.epochs is None else self.epochs


@dataclass
class EncoderModel:
    arch: str
    input_len: int
    embedding_dim: int
    dropout_rate: float
    params: list[np.ndarray]
    loss_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class Triplet:
    """anchor: video i on platform j; positive: video i on platform j' != j;
    negative: video k != i on the positive's platform."""

    anchor: FeatureVector
    positive: FeatureVector
    negative: FeatureVector

    def __post_init__(self):
        if self.anchor.video_id != self.positive.video_id:
            raise ValueError("anchor and positive must share a video")
        if self.anchor.video_id == self.negative.video_id:
            raise ValueError("negative must be a different video")
        if self.positive.platform != self.negative.platform:
            raise ValueError("positive and negative must share a platform")
        if self.anchor.platform == self.positive.platform:
            raise ValueError("anchor must come from a different platform")


# ------------------------------------------------------------ construction


def init_model(config: EncoderConfig, input_len: int) -> EncoderModel:
    if input_len < 1:
        raise ValueError("input_len must be >= 1")
    rng = derive_rng(config.seed, "init")
    e = config.embedding_dim
    if config.arch == ARCH_MLP:
        params = [
            nn.uniform_init(rng, (input_len, e), input_len),
            np.zeros(e),
            nn.uniform_init(rng, (e, e), e),
            np.zeros(e),
            nn.uniform_init(rng, (e, e), e),
            np.zeros(e),
        ]
    elif config.arch == ARCH_CNN1D:
        n_filters, width = 8, 3
        if input_len < width + 1:
            raise ValueError(f"input_len {input_len} too short for conv+pool")
        flat = ((input_len - width + 1) // 2) * n_filters
        params = [
            nn.uniform_init(rng, (n_filters, width), width),
            np.zeros(n_filters),
            nn.uniform_init(rng, (flat, e), flat),
            np.zeros(e),
            nn.uniform_init(rng, (e, e), e),
            np.zeros(e),
        ]
    else:
        h = e
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # unit forget-gate bias
        params = [
            nn.uniform_init(rng, (4 * h,), 1 + h),
            nn.uniform_init(rng, (h, 4 * h), 1 + h),
            b,
        ]
    return EncoderModel(
        arch=config.arch,
        input_len=input_len,
        embedding_dim=e,
        dropout_rate=config.dropout_rate,
        params=params,
    )


# ------------------------------------------------------------ forward


def _as_input_matrix(model: EncoderModel, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.input_len:
        raise ValueError(f"input length {arr.shape[-1]} != model input_len {model.input_len}")
    return arr


def forward_batch(model: EncoderModel, x, train_mode: bool = False, rng=None):
    """Embed a (B, input_len) batch; returns (embeddings, cache)."""
    x = _as_input_matrix(model, x)
    mask = None
    if model.arch == ARCH_MLP:
        w1, b1, w2, b2, w3, b3 = model.params
        h1 = nn.relu(nn.dense_forward(x, w1, b1))
        h2 = nn.relu(nn.dense_forward(h1, w2, b2))
        emb = nn.dense_forward(h2, w3, b3)
        if train_mode and model.dropout_rate > 0:
            mask = nn.dropout_mask(rng, emb.shape, model.dropout_rate)
            emb = emb * mask
        return emb, (x, h1, h2, mask)
    if model.arch == ARCH_CNN1D:
        wc, bc, w1, b1, w2, b2 = model.params
        conv = nn.relu(nn.conv1d_forward(x, wc, bc))
        pooled, second = nn.maxpool2_forward(conv)
        flat = pooled.reshape(x.shape[0], -1)
        h1 = nn.relu(nn.dense_forward(flat, w1, b1))
        emb = nn.dense_forward(h1, w2, b2)
        if train_mode and model.dropout_rate > 0:
            mask = nn.dropout_mask(rng, emb.shape, model.dropout_rate)
            emb = emb * mask
        return emb, (x, conv, second, flat, h1, mask)
    wx, wh, b = model.params
    h_last, lstm_cache = nn.lstm_forward(x, wx, wh, b)
    emb = h_last
    if train_mode and model.dropout_rate > 0:
        mask = nn.dropout_mask(rng, emb.shape, model.dropout_rate)
        emb = emb * mask
    return emb, (x, lstm_cache, mask)


def forward(model: EncoderModel, x, train_mode: bool = False, rng=None) -> np.ndarray:
    """Embed one feature vector."""
    emb, _ = forward_batch(model, x, train_mode=train_mode, rng=rng)
    return emb[0]


def embed(model: EncoderModel, x) -> np.ndarray:
    """Deterministic inference-mode embedding."""
    return forward(model, x, train_mode=False)


def embed_many(model: EncoderModel, x) -> np.ndarray:
    emb, _ = forward_batch(model, x, train_mode=False)
    return emb


def backward_batch(model: EncoderModel, cache, demb) -> list[np.ndarray]:
    """Parameter gradients given the gradient on the (post-dropout)
    embeddings; reuses the dropout masks drawn in forward."""
    if model.arch == ARCH_MLP:
        x, h1, h2, mask = cache
        w1, _, w2, _, w3, _ = model.params
        if mask is not None:
            demb = demb * mask
        dh2, dw3, db3 = nn.dense_backward(h2, w3, demb)
        dh2 = nn.relu_grad(h2, dh2)
        dh1, dw2, db2 = nn.dense_backward(h1, w2, dh2)
        dh1 = nn.relu_grad(h1, dh1)
        _, dw1, db1 = nn.dense_backward(x, w1, dh1)
        return [dw1, db1, dw2, db2, dw3, db3]
    if model.arch == ARCH_CNN1D:
        x, conv, second, flat, h1, mask = cache
        wc, _, w1, _, w2, _ = model.params
        if mask is not None:
            demb = demb * mask
        dh1, dw2, db2 = nn.dense_backward(h1, w2, demb)
        dh1 = nn.relu_grad(h1, dh1)
        dflat, dw1, db1 = nn.dense_backward(flat, w1, dh1)
        dpool = dflat.reshape(second.shape)
        dconv = nn.maxpool2_backward(second, conv.shape, dpool)
        dconv = nn.relu_grad(conv, dconv)
        _, dwc, dbc = nn.conv1d_backward(x, wc, dconv)
        return [dwc, dbc, dw1, db1, dw2, db2]
    x, lstm_cache, mask = cache
    wx, wh, _ = model.params
    if mask is not None:
        demb = demb * mask
    dwx, dwh, db = nn.lstm_backward(x, wx, wh, lstm_cache, demb)
    return [dwx, dwh, db]


# ------------------------------------------------------------ triplet loss


def triplet_loss(a, p, n, alpha: float) -> float:
    """max(d(a,p) - d(a,n) + alpha, 0) with Euclidean d."""
    return max(euclidean_distance(a, p) - euclidean_distance(a, n) + alpha, 0.0)


def _row_norms(diff):
    return np.sqrt(np.sum(diff * diff, axis=1))


def triplet_batch_loss(model, a, p, n, alpha, train_mode=False, rng=None) -> float:
    """Mean hinge loss over a batch of triplet inputs (feature space)."""
    ea, _ = forward_batch(model, a, train_mode, rng)
    ep, _ = forward_batch(model, p, train_mode, rng)
    en, _ = forward_batch(model, n, train_mode, rng)
    dap = _row_norms(ea - ep)
    dan = _row_norms(ea - en)
    return float(np.mean(np.maximum(dap - dan + alpha, 0.0)))


def triplet_batch_backward(model, a, p, n, alpha, rng=None):
    """Mean batch triplet loss and its gradients w.r.t. every parameter.

    Zero-loss triplets contribute zero gradient; the subgradient 0 is used
    exactly at the hinge. Dropout masks drawn here are the ones backward
    reuses.
    """
    train = model.dropout_rate > 0 and rng is not None
    ea, ca = forward_batch(model, a, train, rng)
    ep, cp = forward_batch(model, p, train, rng)
    en, cn = forward_batch(model, n, train, rng)
    diff_p = ea - ep
    diff_n = ea - en
    dap = _row_norms(diff_p)
    dan = _row_norms(diff_n)
    marg = dap - dan + alpha
    losses = np.maximum(marg, 0.0)
    batch = ea.shape[0]
    active = (marg > 0).astype(np.float64)[:, None]

    with np.errstate(invalid="ignore", divide="ignore"):
        up = np.where(dap[:, None] > 0, diff_p / dap[:, None], 0.0)
        un = np.where(dan[:, None] > 0, diff_n / dan[:, None], 0.0)
    d_ea = active * (up - un) / batch
    d_ep = active * (-up) / batch
    d_en = active * un / batch

    grads = backward_batch(model, ca, d_ea)
    for g, extra in zip(grads, backward_batch(model, cp, d_ep)):
        g += extra
    for g, extra in zip(grads, backward_batch(model, cn, d_en)):
        g += extra
    return float(np.mean(losses)), grads


# ------------------------------------------------------------ optimizer


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(model: EncoderModel | object) -> AdamState:
    params = model.params
    return AdamState(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(model, grads, state: AdamState, lr: float):
    """Standard Adam update with bias correction, in place."""
    if len(grads) != len(model.params):
        raise ValueError("gradient count does not match parameter count")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(model.params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return model, state


# ------------------------------------------------------------ mining


def mine_offline_triplets(
    dataset: Dataset,
    anchor_platform: str,
    other_platform: str,
    classes: list[str],
    rng: np.random.Generator,
) -> list[Triplet]:
    """Exhaustive offline mining: every trace of every listed class on the
    anchor platform anchors exactly one triplet per negative class; the
    positive and negative trials come from the other platform via rng."""
    pools: dict[str, list] = {}
    anchors: dict[str, list] = {}
    for cls in classes:
        anchors[cls] = dataset.entries(anchor_platform, cls)
        pools[cls] = dataset.entries(other_platform, cls)
        if not anchors[cls]:
            raise ValueError(f"class {cls!r} missing on platform {anchor_platform!r}")
        if not pools[cls]:
            raise ValueError(f"class {cls!r} missing on platform {other_platform!r}")
    triplets: list[Triplet] = []
    for cls in classes:
        for anchor in anchors[cls]:
            for neg_cls in classes:
                if neg_cls == cls:
                    continue
                pos = pools[cls][rng.integers(len(pools[cls]))]
                neg = pools[neg_cls][rng.integers(len(pools[neg_cls]))]
                triplets.append(Triplet(anchor=anchor, positive=pos, negative=neg))
    return triplets


def mine_semihard(embeddings, labels, platforms, alpha: float) -> list[tuple[int, int, int]]:
    """Select in-batch triplets for each cross-platform same-class (anchor,
    positive) pair: prefer the hardest negative inside the semi-hard band
    d(a,p) < d(a,n) < d(a,p)+alpha; with an empty band take the farthest
    negative still violating the margin; skip the pair when every negative
    already satisfies the margin."""
    emb = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    platforms = np.asarray(platforms)
    dist = pairwise_distances(emb, emb)
    out: list[tuple[int, int, int]] = []
    n = emb.shape[0]
    for a in range(n):
        for p in range(n):
            if p == a or labels[p] != labels[a] or platforms[p] == platforms[a]:
                continue
            dap = dist[a, p]
            cand = np.where((labels != labels[a]) & (platforms == platforms[p]))[0]
            if cand.size == 0:
                continue
            dans = dist[a, cand]
            band = (dans > dap) & (dans < dap + alpha)
            if band.any():
                sub = cand[band]
                neg = int(sub[np.argmin(dans[band])])
            else:
                viol = dans < dap + alpha
                if not viol.any():
                    continue
                sub = cand[viol]
                neg = int(sub[np.argmax(dans[viol])])
            out.append((a, p, neg))
    return out


# ------------------------------------------------------------ training


def _collect_features(dataset: Dataset, classes, platforms):
    feats, labels, plats = [], [], []
    for platform in platforms:
        for cls in classes:
            for fv in dataset.entries(platform, cls):
                feats.append(fv.values)
                labels.append(cls)
                plats.append(platform)
    if not feats:
        raise ValueError("no features found for the requested classes/platforms")
    lengths = {len(f) for f in feats}
    if len(lengths) != 1:
        raise ValueError(f"feature lengths differ: {sorted(lengths)}")
    return np.asarray(feats), np.asarray(labels), np.asarray(plats)


def train_encoder(
    dataset: Dataset,
    classes: list[str],
    platform_pair: tuple[str, str],
    config: EncoderConfig,
) -> EncoderModel:
    """Train on the listed classes over (anchor platform, other platform).

    Offline mining mines once and revisits the same triplets in reshuffled
    batches each epoch; online mining re-mines semi-hard triplets inside
    every batch and stops early on a zero-loss epoch. Mean epoch losses are
    recorded on the model.
    """
    anchor_platform, other_platform = platform_pair
    if anchor_platform == other_platform:
        raise ValueError("platform pair must name two different platforms")
    feats, labels, plats = _collect_features(
        dataset, classes, [anchor_platform, other_platform]
    )
    model = init_model(config, input_len=feats.shape[1])
    epochs = config.resolved_epochs
    if epochs == 0:
        return model
    state = adam_init(model)
    rng = derive_rng(config.seed, "train")

    if config.mining == MINING_OFFLINE:
        triplets = mine_offline_triplets(
            dataset, anchor_platform, other_platform, classes, derive_rng(config.seed, "mining")
        )
        a = np.asarray([t.anchor.values for t in triplets])
        p = np.asarray([t.positive.values for t in triplets])
        n = np.asarray([t.negative.values for t in triplets])
        total = len(triplets)
        for _epoch in range(epochs):
            perm = rng.permutation(total)
            loss_sum = 0.0
            for start in range(0, total, config.batch_size):
                idx = perm[start:start + config.batch_size]
                loss, grads = triplet_batch_backward(
                    model, a[idx], p[idx], n[idx], config.margin, rng
                )
                adam_step(model, grads, state, config.learning_rate)
                loss_sum += loss * idx.size
            model.loss_history.append(loss_sum / total)
        return model

    total = feats.shape[0]
    for _epoch in range(epochs):
        perm = rng.permutation(total)
        loss_sum = 0.0
        n_triplets = 0
        for start in range(0, total, config.batch_size):
            idx = perm[start:start + config.batch_size]
            emb = embed_many(model, feats[idx])
            picks = mine_semihard(emb, labels[idx], plats[idx], config.margin)
            if not picks:
                continue
            ai = idx[[t[0] for t in picks]]
            pi = idx[[t[1] for t in picks]]
            ni = idx[[t[2] for t in picks]]
            loss, grads = triplet_batch_backward(
                model, feats[ai], feats[pi], feats[ni], config.margin, rng
            )
            adam_step(model, grads, state, config.learning_rate)
            loss_sum += loss * len(picks)
            n_triplets += len(picks)
        epoch_loss = loss_sum / n_triplets if n_triplets else 0.0
        model.loss_history.append(epoch_loss)
        if epoch_loss == 0.0:
            break  # no gradient signal remains
    return model


# ------------------------------------------------------------ serialization


def save_model(model: EncoderModel, path, provenance: dict | None = None) -> None:
    doc = {
        "kind": "encoder",
        "format": modelio.FORMAT_VERSION,
        "arch": model.arch,
        "input_len": model.input_len,
        "embedding_dim": model.embedding_dim,
        "dropout_rate": model.dropout_rate,
        "params": modelio.params_to_doc(model.params),
    }
    if provenance:
        doc["provenance"] = provenance
    modelio.save_doc(doc, path)


def load_model(path) -> EncoderModel:
    doc = modelio.load_doc(path, "encoder")
    return EncoderModel(
        arch=doc["arch"],
        input_len=int(doc["input_len"]),
        embedding_dim=int(doc["embedding_dim"]),
        dropout_rate=float(doc["dropout_rate"]),
        params=modelio.params_from_doc(doc["params"]),
    )

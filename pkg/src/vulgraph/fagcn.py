"""Graph-convolutional vulnerability detector.

A method's statement vectors form its feature matrix; two graph-convolution
layers over the symmetric-normalized dependence adjacency produce statement
representations, a three-level pyramid max-pool flattens them to a fixed
width, and a small fully-connected head emits a two-class softmax. The
vulnerability score is the V-class probability; the decision threshold is fit
on a tuning split by F1 search and persisted with the checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Adam,
    ParamStore,
    Tensor,
    concat,
    glorot,
    load_checkpoint,
    save_checkpoint,
)
from .encoders import EncoderConfig, encode_method_batch, init_encoder_params
from .errors import EmptySplit, ShapeMismatch, SingleClassTuningSet
from .features import Vocabulary, extract_method_features
from .frontend import Pdg
from .metrics import auc
from .rng import Rng

POOL_LEVELS = (1, 2, 4)
GCN_HIDDEN = 64
FC_HIDDEN = (64, 32)
N_CLASSES = 2


@dataclass
class MethodFeatureMatrix:
    matrix: Tensor
    graph: Pdg


@dataclass(frozen=True)
class RankedDetection:
    method: str
    score: float
    decision: str
    rank: int


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 8
    patience: int = 5
    seed: int = 0


@dataclass
class DetectionModel:
    store: ParamStore
    vocab: Vocabulary
    encoder_config: EncoderConfig
    threshold: float = 0.5


def pool_width(d2: int = GCN_HIDDEN) -> int:
    return sum(POOL_LEVELS) * d2


def init_model_params(
    store: ParamStore, rng: Rng, vocab_size: int, cfg: EncoderConfig, d2: int = GCN_HIDDEN
) -> None:
    init_encoder_params(store, rng, vocab_size, cfg)
    store.add("gcn.w1", glorot(rng, cfg.stmt_dim, d2))
    store.add("gcn.w2", glorot(rng, d2, d2))
    h1, h2 = FC_HIDDEN
    store.add("fc.w1", glorot(rng, pool_width(d2), h1))
    store.add("fc.b1", np.zeros(h1))
    store.add("fc.w2", glorot(rng, h1, h2))
    store.add("fc.b2", np.zeros(h2))
    store.add("fc.w3", glorot(rng, h2, N_CLASSES))
    store.add("fc.b3", np.zeros(N_CLASSES))


def new_model(vocab: Vocabulary, cfg: EncoderConfig | None = None, seed: int = 0) -> DetectionModel:
    cfg = cfg or EncoderConfig()
    store = ParamStore()
    init_model_params(store, Rng(seed).fork("init"), len(vocab), cfg)
    return DetectionModel(store=store, vocab=vocab, encoder_config=cfg)


def normalized_adjacency(pdg: Pdg) -> Tensor:
    """D^{-1/2} (A + I) D^{-1/2} over the symmetrized edge set."""
    n = len(pdg.nodes)
    a = np.eye(n)
    for e in pdg.edges:
        a[e.src, e.dst] = 1.0
        a[e.dst, e.src] = 1.0
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return Tensor(np.outer(dinv, dinv) * a)


def gcn_forward(fm: MethodFeatureMatrix, store: ParamStore, adj: Tensor | None = None) -> Tensor:
    """Two relu graph-convolution layers; rows stay aligned with statements."""
    if adj is None:
        adj = normalized_adjacency(fm.graph)
    if adj.data.shape[0] != fm.matrix.data.shape[0]:
        raise ShapeMismatch("adjacency and feature matrix disagree on n")
    h1 = (adj @ (fm.matrix @ store["gcn.w1"])).relu()
    return (adj @ (h1 @ store["gcn.w2"])).relu()


def pyramid_pool(h: Tensor) -> Tensor:
    """Fixed-width descriptor: per-column max over 1+2+4 contiguous row bins."""
    n = h.data.shape[0]
    parts = []
    for level in POOL_LEVELS:
        for b in range(level):
            start = (b * n) // level
            end = ((b + 1) * n) // level
            if end == start:
                end = start + 1
            parts.append(h[start:end].amax_rows())
    return concat(parts, axis=0)


def _head_logits(pooled: Tensor, store: ParamStore) -> Tensor:
    z = pooled.reshape(1, pooled.data.shape[0])
    z = (z @ store["fc.w1"] + store["fc.b1"]).relu()
    z = (z @ store["fc.w2"] + store["fc.b2"]).relu()
    return z @ store["fc.w3"] + store["fc.b3"]


def graph_logits(adj: Tensor, feats: Tensor, store: ParamStore) -> Tensor:
    """Full model head over an (optionally masked) adjacency: [1, 2] logits."""
    fm = MethodFeatureMatrix(matrix=feats, graph=None)
    h = gcn_forward(fm, store, adj=adj)
    return _head_logits(pyramid_pool(h), store)


def _softmax_row(logits: Tensor) -> Tensor:
    return logits.softmax(axis=1)


def score_methods(model: DetectionModel, items: list, chunk: int = 16) -> list:
    """Scores for [(id, pdg)] pairs; forward passes batched per chunk."""
    out = []
    for lo in range(0, len(items), chunk):
        part = items[lo : lo + chunk]
        pdgs = [p for _, p in part]
        bundles = [extract_method_features(p) for p in pdgs]
        enc, spans = encode_method_batch(pdgs, model.vocab, model.store, model.encoder_config, bundles)
        for (mid, pdg), (s, e) in zip(part, spans):
            adj = normalized_adjacency(pdg)
            probs = _softmax_row(graph_logits(adj, enc[s:e], model.store))
            out.append((mid, float(probs.data[0, 1])))
    return out


def classify(pdg: Pdg, model: DetectionModel) -> tuple[float, str]:
    """V-class probability and thresholded decision for one method."""
    (_, score), = score_methods(model, [("m", pdg)])
    return score, ("V" if score >= model.threshold else "NV")


def rank_methods(scored: list, threshold: float = 0.5) -> list[RankedDetection]:
    """Descending by score, ties by method id; ranks are 1-based."""
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    return [
        RankedDetection(method=mid, score=score, decision="V" if score >= threshold else "NV", rank=i)
        for i, (mid, score) in enumerate(ordered, start=1)
    ]


def detection_report(ranked: list[RankedDetection]) -> list[dict]:
    return [
        {"method": r.method, "score": r.score, "decision": r.decision, "rank": r.rank}
        for r in ranked
    ]


def best_threshold(scored: list, labels: dict) -> float:
    """F1-maximizing cut over candidate thresholds: midpoints between the
    distinct sorted scores, plus the smallest score (the all-V decision).
    Ties prefer the smaller threshold."""
    pairs = [(score, labels[mid]) for mid, score in scored]
    classes = {lab for _, lab in pairs}
    if classes != {"V", "NV"}:
        raise SingleClassTuningSet(f"tuning classes seen: {sorted(classes)}")
    distinct = sorted({s for s, _ in pairs})
    candidates = [distinct[0]]
    candidates += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    best = None
    for tau in sorted(candidates):
        tp = sum(1 for s, lab in pairs if s >= tau and lab == "V")
        fp = sum(1 for s, lab in pairs if s >= tau and lab == "NV")
        fn = sum(1 for s, lab in pairs if s < tau and lab == "V")
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        if best is None or f1 > best[0] + 1e-12:
            best = (f1, tau)
    return best[1]


def fit_threshold(model: DetectionModel, tune_items: list, labels: dict) -> float:
    if not tune_items:
        raise EmptySplit("tuning split is empty")
    return best_threshold(score_methods(model, tune_items), labels)


def balanced_training_pairs(items: list, labels: dict) -> list:
    """Equal V/NV counts; the surplus of the larger class is dropped
    deterministically in method-id order."""
    pos = sorted([it for it in items if labels[it[0]] == "V"], key=lambda it: it[0])
    neg = sorted([it for it in items if labels[it[0]] == "NV"], key=lambda it: it[0])
    m = min(len(pos), len(neg))
    return pos[:m] + neg[:m]


def _batch_loss(model: DetectionModel, batch: list, labels: dict) -> Tensor:
    pdgs = [p for _, p in batch]
    bundles = [extract_method_features(p) for p in pdgs]
    enc, spans = encode_method_batch(pdgs, model.vocab, model.store, model.encoder_config, bundles)
    logit_rows = []
    for (mid, pdg), (s, e) in zip(batch, spans):
        adj = normalized_adjacency(pdg)
        logit_rows.append(graph_logits(adj, enc[s:e], model.store))
    logits = concat(logit_rows, axis=0)
    y = np.array([1 if labels[mid] == "V" else 0 for mid, _ in batch], dtype=np.int64)
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    shifted = (logits.transpose() - shift.transpose()).transpose()
    lse = shifted.exp().sum(axis=1, keepdims=True).log() + shift
    picked = logits[np.arange(len(batch)), y]
    return (lse.reshape(len(batch)) - picked).mean()


def train(
    train_items: list,
    tune_items: list,
    labels: dict,
    vocab: Vocabulary,
    encoder_config: EncoderConfig | None = None,
    config: TrainConfig | None = None,
) -> tuple[DetectionModel, list[dict]]:
    """Cross-entropy training with Adam over balanced batches; per-epoch loss
    and tuning AUC are logged, early stopping restores the best-AUC epoch."""
    config = config or TrainConfig()
    if not train_items:
        raise EmptySplit("training split is empty")
    if not tune_items:
        raise EmptySplit("tuning split is empty")
    balanced = balanced_training_pairs(train_items, labels)
    if not balanced:
        raise EmptySplit("training split lacks one of the classes")
    model = new_model(vocab, encoder_config, seed=config.seed)
    opt = Adam(model.store, lr=config.lr)
    order_rng = Rng(config.seed).fork("order")
    log: list[dict] = []
    best_auc = -1.0
    best_snapshot = None
    bad_epochs = 0
    for epoch in range(1, config.epochs + 1):
        items = list(balanced)
        order_rng.shuffle(items)
        losses = []
        for lo in range(0, len(items), config.batch_size):
            batch = items[lo : lo + config.batch_size]
            model.store.zero_grad()
            loss = _batch_loss(model, batch, labels)
            loss.backward(params=model.store)
            opt.step()
            losses.append(float(loss.data))
        scored = score_methods(model, tune_items)
        pos = [s for mid, s in scored if labels[mid] == "V"]
        neg = [s for mid, s in scored if labels[mid] == "NV"]
        tune_auc = auc(pos, neg) if pos and neg else 0.0
        log.append(
            {"epoch": epoch, "loss": sum(losses) / len(losses), "tuning_auc": tune_auc}
        )
        if tune_auc > best_auc + 1e-12:
            best_auc = tune_auc
            best_snapshot = {name: t.data.copy() for name, t in model.store.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    if best_snapshot is not None:
        for name, t in model.store.items():
            t.data[...] = best_snapshot[name]
    model.threshold = fit_threshold(model, tune_items, labels)
    return model, log


def save_model(path, model: DetectionModel) -> None:
    meta = {
        "threshold": model.threshold,
        "vocab": model.vocab.to_dict(),
        "encoder_config": model.encoder_config.to_dict(),
    }
    save_checkpoint(path, model.store, meta=meta)


def load_model(path) -> DetectionModel:
    store, meta, _ = load_checkpoint(path)
    return DetectionModel(
        store=store,
        vocab=Vocabulary.from_dict(meta["vocab"]),
        encoder_config=EncoderConfig(**meta["encoder_config"]),
        threshold=float(meta["threshold"]),
    )

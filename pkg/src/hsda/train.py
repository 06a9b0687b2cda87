"""Training protocol: SGD with momentum, cosine schedule, stratified folds.

The dataset is split once into a stratified 20% test set; the remainder is
partitioned into k stratified folds, each serving once as validation. Every
fold trains a freshly initialized model; the checkpoint with the best
validation accuracy across folds is evaluated on the held-out test set.
Everything is seeded and sequential, so a run is bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor, make_rng
from .errors import ConfigError, ProtocolError
from .features import kinematic_features, render_image
from .ingest import StrokeSequence
from .loss import (
    CONTRASTIVE_WEIGHT,
    Templates,
    contrastive,
    cross_entropy,
    make_templates,
    total_loss,
    update_templates,
)
from .model import HsdaNet, ModelConfig


@dataclass
class TrainConfig:
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.05
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 10
    k_folds: int = 4
    test_fraction: float = 0.2
    seed: int = 0
    contrastive_weight: float = CONTRASTIVE_WEIGHT  # 0 disables the template term

    def __post_init__(self):
        for name in ("lr0", "batch_size", "max_epochs", "patience", "k_folds"):
            if getattr(self, name) <= 0:
                raise ConfigError("%s must be positive, got %r" % (name, getattr(self, name)))
        for name in ("momentum", "weight_decay", "contrastive_weight"):
            if getattr(self, name) < 0:
                raise ConfigError("%s must be >= 0, got %r" % (name, getattr(self, name)))
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0,1), got %r" % self.test_fraction)
        if self.patience > self.max_epochs:
            raise ConfigError(
                "patience %d exceeds max_epochs %d" % (self.patience, self.max_epochs)
            )


class Sample(NamedTuple):
    image: np.ndarray  # (3, S, S) rendered stroke
    signal: np.ndarray  # (9, T) standardized kinematic channels
    label: int
    subject_id: str


def build_dataset(records: Sequence[Tuple[StrokeSequence, str]], canvas_size: int) -> List[Sample]:
    """Turn preprocessed strokes into model-ready (image, signal, label) triples."""
    from .ingest import LABEL_TO_INDEX

    samples = []
    for stroke, label in records:
        sig = kinematic_features(stroke)
        canvas = render_image(stroke, size=canvas_size)
        samples.append(
            Sample(canvas.pixels, sig.channels, LABEL_TO_INDEX[label], stroke.subject_id)
        )
    return samples


# ---------------------------------------------------------------------------
# optimizer


def cosine_lr(epoch: int, lr0: float = 0.01, t_max: int = 100, lr_min: float = 0.0) -> float:
    if not 0 <= epoch <= t_max:
        raise ConfigError("epoch %d outside [0, %d]" % (epoch, t_max))
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * epoch / t_max))


def sgd_step(
    params: Dict[str, Tensor],
    state: Dict[str, np.ndarray],
    lr: float,
    momentum: float = 0.9,
    weight_decay: float = 0.05,
) -> None:
    """v <- momentum*v + (g + wd*w); w <- w - lr*v. Mutates params and state."""
    for name, t in params.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.values)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient in %s" % name)
        g = g + weight_decay * t.values
        v = state.get(name)
        if v is None:
            v = np.zeros_like(t.values)
        v = momentum * v + g
        state[name] = v
        t.values = t.values - lr * v


# ---------------------------------------------------------------------------
# split protocol


def split_and_fold(
    labels: Sequence[int], cfg: TrainConfig
) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """Stratified test split plus k stratified folds over the remainder.

    Test slots go to classes by largest fractional remainder; fold slots go
    one sample at a time to the currently lightest fold, per class, which
    keeps per-class counts within 1 across folds and pools the slack evenly.
    Returns (test indices, [(train indices, val indices), ...]).
    """
    labels = np.asarray(labels)
    n = labels.size
    classes = np.unique(labels)
    rng = make_rng(cfg.seed, "shuffle", substream=0)
    order = rng.permutation(n)

    by_class = {c: order[labels[order] == c] for c in classes}
    for c in classes:
        if by_class[c].size < cfg.k_folds:
            raise ProtocolError(
                "class %r has %d samples, fewer than k=%d"
                % (c, by_class[c].size, cfg.k_folds)
            )

    n_test = int(round(cfg.test_fraction * n))
    ideal = {c: cfg.test_fraction * by_class[c].size for c in classes}
    take = {c: int(ideal[c]) for c in classes}
    remainders = sorted(classes, key=lambda c: (-(ideal[c] - take[c]), c))
    for c in remainders:
        if sum(take.values()) >= n_test:
            break
        take[c] += 1

    test_parts, pool_parts = [], {}
    for c in classes:
        test_parts.append(by_class[c][: take[c]])
        pool_parts[c] = by_class[c][take[c] :]
        if pool_parts[c].size < cfg.k_folds:
            raise ProtocolError(
                "class %r keeps %d samples after the test split, fewer than k=%d"
                % (c, pool_parts[c].size, cfg.k_folds)
            )
    test_idx = np.sort(np.concatenate(test_parts))

    fold_members: List[List[int]] = [[] for _ in range(cfg.k_folds)]
    loads = np.zeros(cfg.k_folds, dtype=int)
    for c in classes:
        for idx in pool_parts[c]:
            dest = int(np.argmin(loads))
            fold_members[dest].append(int(idx))
            loads[dest] += 1

    folds = []
    for i in range(cfg.k_folds):
        val = np.sort(np.array(fold_members[i], dtype=int))
        train = np.sort(
            np.concatenate([np.array(fold_members[j], dtype=int) for j in range(cfg.k_folds) if j != i])
        )
        folds.append((train, val))
    return test_idx, folds


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    zero_division: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "Metrics":
        total = tp + fp + fn + tn
        if total == 0:
            raise ValueError("empty confusion matrix")
        flagged = False

        def ratio(num, den):
            nonlocal flagged
            if den == 0:
                flagged = True
                return 0.0
            return num / den

        precision = ratio(tp, tp + fp)
        recall = ratio(tp, tp + fn)
        f1 = ratio(2 * precision * recall, precision + recall) if (precision + recall) else ratio(0, 0)
        return cls(
            tp=tp,
            fp=fp,
            fn=fn,
            tn=tn,
            accuracy=100.0 * (tp + tn) / total,
            precision=100.0 * precision,
            recall=100.0 * recall,
            f1=100.0 * f1,
            zero_division=flagged,
        )

    def as_dict(self) -> Dict[str, object]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "accuracy": "%.2f" % self.accuracy,
            "precision": "%.2f" % self.precision,
            "recall": "%.2f" % self.recall,
            "f1": "%.2f" % self.f1,
            "zero_division": int(self.zero_division),
        }

    def table(self) -> str:
        head = "%-10s %-10s %-10s %-10s" % ("F1", "Accuracy", "Precision", "Recall")
        row = "%-10.2f %-10.2f %-10.2f %-10.2f" % (self.f1, self.accuracy, self.precision, self.recall)
        counts = "tp=%d fp=%d fn=%d tn=%d" % (self.tp, self.fp, self.fn, self.tn)
        return "\n".join((head, row, counts))


def predict(model: HsdaNet, sample: Sample) -> int:
    logits, _ = model(sample.image, sample.signal)
    return int(np.argmax(logits.values[0]))


def evaluate(model: HsdaNet, test_set: Sequence[Sample]) -> Metrics:
    if len(test_set) == 0:
        raise ValueError("empty test set")
    tp = fp = fn = tn = 0
    for sample in test_set:
        pred = predict(model, sample)
        if sample.label == 1:
            tp, fn = tp + (pred == 1), fn + (pred == 0)
        else:
            fp, tn = fp + (pred == 1), tn + (pred == 0)
    return Metrics.from_counts(tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# training loop


@dataclass
class FoldResult:
    fold: int
    best_epoch: int
    best_val_acc: float
    best_state: Dict[str, np.ndarray]
    history: List[Tuple[int, float, float, float]]  # (epoch, lr, train_loss, val_acc)
    templates: Templates


def _forward_batch(model: HsdaNet, batch: Sequence[Sample]):
    prob_rows, f_rows = [], []
    for sample in batch:
        logits, f = model(sample.image, sample.signal)
        prob_rows.append(dc.softmax_rows(logits))
        f_rows.append(f)
    probs = prob_rows[0] if len(prob_rows) == 1 else dc.concat(prob_rows, axis=0)
    feats = f_rows[0] if len(f_rows) == 1 else dc.concat(f_rows, axis=0)
    return probs, feats


def _val_accuracy(model: HsdaNet, val_set: Sequence[Sample]) -> float:
    correct = sum(predict(model, s) == s.label for s in val_set)
    return correct / len(val_set)


def train_loop(
    model: HsdaNet,
    templates: Templates,
    train_set: Sequence[Sample],
    val_set: Sequence[Sample],
    cfg: TrainConfig,
    fold: int = 0,
) -> FoldResult:
    if not train_set or not val_set:
        raise ProtocolError("fold %d has an empty train or validation set" % fold)
    params = model.parameter_dict()
    state: Dict[str, np.ndarray] = {}
    shuffle_rng = make_rng(cfg.seed, "shuffle", substream=1 + fold)
    history: List[Tuple[int, float, float, float]] = []
    best_acc, best_epoch, since_best = -1.0, -1, 0
    best_state = {name: t.values.copy() for name, t in params.items()}

    for epoch in range(cfg.max_epochs):
        lr = cosine_lr(epoch, cfg.lr0, cfg.max_epochs)
        order = shuffle_rng.permutation(len(train_set))
        batch_losses = []
        for b_start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[b_start : b_start + cfg.batch_size]]
            batch_labels = np.array([s.label for s in batch])
            model.zero_grad()
            with dc.Tape() as tape:
                probs, feats = _forward_batch(model, batch)
                ce = cross_entropy(probs, batch_labels)
                if cfg.contrastive_weight > 0.0:
                    loss = total_loss(
                        ce, contrastive(feats, batch_labels, templates), cfg.contrastive_weight
                    )
                else:
                    loss = ce
                loss_value = loss.item()
                if not np.isfinite(loss_value):
                    raise FloatingPointError(
                        "non-finite loss at epoch %d batch %d" % (epoch, b_start // cfg.batch_size)
                    )
                dc.backward(loss, tape)
            sgd_step(params, state, lr, cfg.momentum, cfg.weight_decay)
            templates = update_templates(templates, feats.values, batch_labels)
            batch_losses.append(loss_value)

        val_acc = _val_accuracy(model, val_set)
        history.append((epoch, lr, float(np.mean(batch_losses)), val_acc))
        if val_acc > best_acc:
            best_acc, best_epoch, since_best = val_acc, epoch, 0
            best_state = {name: t.values.copy() for name, t in params.items()}
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    return FoldResult(fold, best_epoch, best_acc, best_state, history, templates)


@dataclass
class ProtocolResult:
    fold_results: List[FoldResult]
    best_fold: int
    test_metrics: Metrics
    test_indices: np.ndarray
    model: HsdaNet


def run_protocol(
    dataset: Sequence[Sample], model_cfg: ModelConfig, cfg: TrainConfig
) -> ProtocolResult:
    labels = [s.label for s in dataset]
    test_idx, folds = split_and_fold(labels, cfg)
    test_set = [dataset[i] for i in test_idx]

    fold_results = []
    for fold, (train_idx, val_idx) in enumerate(folds):
        model = HsdaNet(model_cfg, seed=cfg.seed)
        templates = make_templates(model_cfg.d, make_rng(cfg.seed, "init", substream=1 + fold))
        result = train_loop(
            model,
            templates,
            [dataset[i] for i in train_idx],
            [dataset[i] for i in val_idx],
            cfg,
            fold=fold,
        )
        fold_results.append(result)

    best_fold = max(range(len(fold_results)), key=lambda i: fold_results[i].best_val_acc)
    final = HsdaNet(model_cfg, seed=cfg.seed)
    for name, t in final.parameter_dict().items():
        t.values = fold_results[best_fold].best_state[name].copy()
    metrics = evaluate(final, test_set)
    return ProtocolResult(fold_results, best_fold, metrics, test_idx, final)


# ---------------------------------------------------------------------------
# artifacts


def write_history_csv(path: str, history: Sequence[Tuple[int, float, float, float]]) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,lr,train_loss,val_acc\n")
        for epoch, lr, loss_value, acc in history:
            fh.write("%d,%.17g,%.17g,%.17g\n" % (epoch, lr, loss_value, acc))


def write_metrics(path: str, metrics: Metrics) -> None:
    with open(path, "w") as fh:
        for key, value in metrics.as_dict().items():
            fh.write("%s=%s\n" % (key, value))

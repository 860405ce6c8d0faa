"""Road-type classification from tactile signals.

A small 1D CNN (three strided conv blocks, global average pooling, a 128-d
embedding layer, linear head over the six classes) serves two roles: the
downstream evaluation probe for generated signals, and the embedding network
behind the Frechet distance. Aggregate metrics are macro-averaged with the
0/0 -> 0 convention for absent predictions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from .corpus.profiles import CLASS_INDEX, CLASS_ORDER, RoadClass
from .errors import CheckpointMismatch, ShapeError, TrainingDiverged
from .seeding import rng_for, torch_seed_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassifierConfig:
    input_len: int = 1024
    input_channels: int = 1
    widths: Tuple[int, ...] = (32, 64, 128)
    embed_dim: int = 128
    n_classes: int = 6


class SignalClassifier(nn.Module):
    def __init__(self, cfg: ClassifierConfig = ClassifierConfig()):
        super().__init__()
        self.cfg = cfg
        blocks = []
        in_ch = cfg.input_channels
        for w in cfg.widths:
            blocks += [
                nn.Conv1d(in_ch, w, kernel_size=5, stride=2, padding=2),
                nn.BatchNorm1d(w),
                nn.ReLU(),
            ]
            in_ch = w
        self.blocks = nn.Sequential(*blocks)
        self.embedding = nn.Linear(in_ch, cfg.embed_dim)
        self.head = nn.Linear(cfg.embed_dim, cfg.n_classes)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(x).mean(dim=2)
        return torch.relu(self.embedding(h))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.embed(x))


def _as_batch(signal, cfg: ClassifierConfig) -> torch.Tensor:
    arr = np.asarray(getattr(signal, "values", signal), dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim == 2:
        arr = arr[np.newaxis, :, :]
    if arr.shape[1:] != (cfg.input_channels, cfg.input_len):
        raise ShapeError(
            f"expected ({cfg.input_channels}, {cfg.input_len}) signals, got {arr.shape[1:]}"
        )
    return torch.from_numpy(arr)


def _labels_to_indices(labels: Sequence) -> np.ndarray:
    out = []
    for lab in labels:
        cls = lab if isinstance(lab, RoadClass) else RoadClass.from_label(str(lab))
        out.append(CLASS_INDEX[cls])
    return np.asarray(out)


@dataclass
class ClassifierTrainConfig:
    steps: int = 600
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    log_every: int = 100


def train_classifier(
    signals: Sequence,
    labels: Sequence,
    cfg: ClassifierConfig = ClassifierConfig(),
    opt: ClassifierTrainConfig = ClassifierTrainConfig(),
) -> tuple:
    """Cross-entropy training on normalized signals; returns (model, history)."""
    y = _labels_to_indices(labels)
    if np.unique(y).size < 2:
        raise ValueError("need at least 2 classes to train a classifier")
    x = torch.cat([_as_batch(s, cfg) for s in signals])
    if x.shape[0] != y.size:
        raise ShapeError(f"{x.shape[0]} signals but {y.size} labels")
    labels_t = torch.from_numpy(y)

    torch.manual_seed(torch_seed_for(opt.seed, "classifier-init"))
    model = SignalClassifier(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=opt.lr)
    batch_rng = rng_for(opt.seed, "classifier-batches")
    history = {"loss": []}
    model.train()
    n = x.shape[0]
    for step in range(opt.steps):
        idx = torch.from_numpy(batch_rng.choice(n, size=min(opt.batch_size, n), replace=False))
        loss = nn.functional.cross_entropy(model(x[idx]), labels_t[idx])
        if not torch.isfinite(loss):
            raise TrainingDiverged(step, f"classifier loss became {loss.item()} at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history["loss"].append(float(loss.item()))
        if opt.log_every and step % opt.log_every == 0:
            log.info("classifier step %d: loss %.5f", step, history["loss"][-1])
    model.eval()
    return model, history


def classify(signal, model: SignalClassifier) -> Tuple[RoadClass, np.ndarray]:
    """Predicted class and softmax probabilities (sum to 1 within 1e-6)."""
    model.eval()
    with torch.no_grad():
        probs = torch.softmax(model(_as_batch(signal, model.cfg)), dim=1)[0].double().numpy()
    return CLASS_ORDER[int(np.argmax(probs))], probs


def predict_batch(signals: Sequence, model: SignalClassifier) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        x = torch.cat([_as_batch(s, model.cfg) for s in signals])
        return model(x).argmax(dim=1).numpy()


def embed(signal, model: SignalClassifier) -> np.ndarray:
    """Penultimate-layer embedding used as the Frechet feature space."""
    cfg = model.cfg
    arr = np.asarray(getattr(signal, "values", signal))
    if arr.ravel().shape[0] != cfg.input_channels * cfg.input_len:
        raise CheckpointMismatch(
            f"signal length {arr.ravel().shape[0]} does not match the "
            f"classifier's {cfg.input_channels} x {cfg.input_len} input"
        )
    model.eval()
    with torch.no_grad():
        return model.embed(_as_batch(arr.reshape(cfg.input_channels, cfg.input_len), cfg))[0].double().numpy()


# ---------------------------------------------------------------------------
# Aggregate metrics (plain numpy; no sklearn dependency at runtime)


@dataclass
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray  # (n_classes, n_classes), rows = true class

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    mat = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(mat, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return mat


def macro_metrics(confusion: np.ndarray) -> Dict[str, float]:
    """Accuracy plus macro precision/recall/F1 from a confusion matrix.

    Per-class ratios with zero denominators count as 0 (e.g. a class never
    predicted has precision 0), matching the usual zero-division convention.
    """
    tp = np.diag(confusion).astype(np.float64)
    pred_tot = confusion.sum(axis=0).astype(np.float64)
    true_tot = confusion.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        recall = np.where(true_tot > 0, tp / true_tot, 0.0)
        f1 = np.where(
            precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0
        )
    return {
        "accuracy": float(tp.sum() / confusion.sum()),
        "precision": float(precision.mean()),
        "recall": float(recall.mean()),
        "f1": float(f1.mean()),
    }


def evaluate_generated(
    gen_signals: Sequence, true_labels: Sequence, model: SignalClassifier
) -> ClassificationMetrics:
    """Score generated signals with a real-data-trained classifier."""
    y_true = _labels_to_indices(true_labels)
    y_pred = predict_batch(gen_signals, model)
    confusion = confusion_matrix(y_true, y_pred, model.cfg.n_classes)
    agg = macro_metrics(confusion)
    return ClassificationMetrics(confusion=confusion, **agg)

"""Classification metrics for single-label and multi-label targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EvalResult:
    accuracy: float
    micro_f1: float
    macro_f1: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    split: str = ""


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def predictions_from_logits(logits: np.ndarray, multi_label: bool, threshold: float = 0.5):
    if multi_label:
        return (1.0 / (1.0 + np.exp(-logits)) >= threshold).astype(np.uint8)
    return logits.argmax(axis=1)


def evaluate(predictions: np.ndarray, labels: np.ndarray, multi_label: bool, split: str = "") -> EvalResult:
    """Micro-F1 from pooled TP/FP/FN, macro-F1 as unweighted mean of per-class F1."""
    if len(predictions) != len(labels):
        raise ValueError("prediction/label length mismatch")
    if multi_label:
        pred = np.asarray(predictions, dtype=bool)
        true = np.asarray(labels, dtype=bool)
        tp = (pred & true).sum(axis=0).astype(float)
        fp = (pred & ~true).sum(axis=0).astype(float)
        fn = (~pred & true).sum(axis=0).astype(float)
        accuracy = float((pred == true).all(axis=1).mean()) if len(pred) else 0.0
    else:
        n_classes = int(max(predictions.max(initial=0), labels.max(initial=0))) + 1
        tp = np.zeros(n_classes)
        fp = np.zeros(n_classes)
        fn = np.zeros(n_classes)
        for c in range(n_classes):
            tp[c] = np.sum((predictions == c) & (labels == c))
            fp[c] = np.sum((predictions == c) & (labels != c))
            fn[c] = np.sum((predictions != c) & (labels == c))
        accuracy = float(np.mean(predictions == labels)) if len(labels) else 0.0

    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
    tp_s, fp_s, fn_s = tp.sum(), fp.sum(), fn.sum()
    micro = float(2 * tp_s / (2 * tp_s + fp_s + fn_s)) if (2 * tp_s + fp_s + fn_s) > 0 else 0.0
    macro = float(np.mean([_f1(p, r) for p, r in zip(precision, recall)])) if len(tp) else 0.0
    return EvalResult(accuracy, micro, macro, precision, recall, split)


def primary_metric(result: EvalResult, multi_label: bool) -> float:
    """Model-selection metric: accuracy when single-label, micro-F1 when multi-label."""
    return result.micro_f1 if multi_label else result.accuracy

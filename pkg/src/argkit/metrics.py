"""Multiclass classification metrics computed from integer label arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, LengthMismatch


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Counts with true labels on rows and predicted labels on columns."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.ndim != 1 or y_pred.ndim != 1:
        raise InputError("label arrays must be one-dimensional")
    if y_true.shape[0] != y_pred.shape[0]:
        raise LengthMismatch(f"{y_true.shape[0]} true labels vs {y_pred.shape[0]} predictions")
    if n_classes < 1:
        raise InputError("n_classes must be positive")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            raise InputError(f"{name} labels must be integers")
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise InputError(f"{name} labels outside [0, {n_classes})")
    flat = y_true.astype(np.int64) * n_classes + y_pred.astype(np.int64)
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    balanced_accuracy: float
    weighted_f1: float


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # a zero denominator scores 0, it never propagates NaN
    out = np.zeros_like(num, dtype=np.float64)
    mask = den > 0
    out[mask] = num[mask] / den[mask]
    return out


def report_from_confusion(cm: np.ndarray) -> ClassificationReport:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise InputError("confusion matrix must be square")
    total = int(cm.sum())
    if total == 0:
        raise InputError("confusion matrix is empty")
    diag = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = _safe_div(diag, predicted.astype(np.float64))
    recall = _safe_div(diag, support.astype(np.float64))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    seen = support > 0  # absent classes do not drag macro averages down
    macro_precision = float(precision[seen].mean())
    macro_recall = float(recall[seen].mean())
    macro_f1 = float(f1[seen].mean())
    weighted_f1 = float((f1[seen] * support[seen]).sum() / support[seen].sum())
    return ClassificationReport(
        accuracy=float(diag.sum() / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro_precision=macro_precision,
        macro_recall=macro_recall,
        macro_f1=macro_f1,
        balanced_accuracy=macro_recall,
        weighted_f1=weighted_f1,
    )


def evaluate(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> ClassificationReport:
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes))


def format_report(report: ClassificationReport, class_names: list[str] | None = None) -> str:
    n = report.support.shape[0]
    if class_names is None:
        class_names = [str(i) for i in range(n)]
    if len(class_names) != n:
        raise LengthMismatch(f"{len(class_names)} names for {n} classes")
    width = max(5, *(len(name) for name in class_names))
    lines = [f"{'class':<{width}}  {'prec':>7}  {'recall':>7}  {'f1':>7}  {'support':>7}"]
    for i, name in enumerate(class_names):
        lines.append(
            f"{name:<{width}}  {report.precision[i]:>7.4f}  {report.recall[i]:>7.4f}"
            f"  {report.f1[i]:>7.4f}  {int(report.support[i]):>7d}"
        )
    lines.append("")
    lines.append(f"accuracy          {report.accuracy:.4f}")
    lines.append(f"macro precision   {report.macro_precision:.4f}")
    lines.append(f"macro recall      {report.macro_recall:.4f}")
    lines.append(f"macro f1          {report.macro_f1:.4f}")
    lines.append(f"balanced accuracy {report.balanced_accuracy:.4f}")
    lines.append(f"weighted f1       {report.weighted_f1:.4f}")
    return "\n".join(lines)

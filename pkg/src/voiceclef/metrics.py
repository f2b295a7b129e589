"""Splitting, confusion matrices, per-class scores, ROC/AUC and patient voting."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, EmptyDataset, EmptyVoteSet, LabelOutOfRange
from .nn import make_rng


# ------------------------------------------------------------------ splits

def split_dataset(items, ratios=(0.8, 0.1, 0.1), seed: int = 0, groups=None, grouped: bool = True):
    """Deterministic train/val/test split.

    With ``grouped`` (the default) whole groups move together, so no patient
    appears in two splits; ``groups`` gives one id per item and defaults to
    one group per item. Validation and test receive ``floor(ratio * n)``
    groups each and train takes the rest.
    """
    items = list(items)
    if not items:
        raise EmptyDataset("nothing to split")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if groups is None or not grouped:
        groups = list(range(len(items)))
    groups = list(groups)
    if len(groups) != len(items):
        raise ValueError("one group id per item is required")

    unique = sorted(set(groups), key=str)
    order = make_rng(seed).permutation(len(unique))
    shuffled = [unique[i] for i in order]
    n = len(shuffled)
    n_val = int(np.floor(ratios[1] * n + 1e-9))
    n_test = int(np.floor(ratios[2] * n + 1e-9))
    val_g = set(shuffled[:n_val])
    test_g = set(shuffled[n_val : n_val + n_test])
    train, val, test = [], [], []
    for item, g in zip(items, groups):
        (val if g in val_g else test if g in test_g else train).append(item)
    return train, val, test


def split_indices(n: int, ratios=(0.8, 0.1, 0.1), seed: int = 0, groups=None, grouped: bool = True):
    tr, va, te = split_dataset(range(n), ratios, seed, groups, grouped)
    return np.array(tr, dtype=np.int64), np.array(va, dtype=np.int64), np.array(te, dtype=np.int64)


# --------------------------------------------------------- confusion matrix

@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class
    label_names: tuple = ()

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0


def confusion_matrix(truths, predictions, k: int, label_names=None) -> ConfusionMatrix:
    t = np.asarray(truths, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("truths and predictions differ in length")
    if t.size and (t.min() < 0 or p.min() < 0 or t.max() >= k or p.max() >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    names = tuple(label_names) if label_names else tuple(str(i) for i in range(k))
    return ConfusionMatrix(counts, names)


@dataclass
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    c = cm.counts
    tp = np.diag(c)
    precision = _safe_div(tp, c.sum(axis=0))
    recall = _safe_div(tp, c.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return ClassMetrics(precision, recall, f1, c.sum(axis=1), cm.accuracy)


# --------------------------------------------------------------------- ROC

def roc_curve(scores, truths):
    """One-vs-rest ROC for binary ``truths`` (1 = positive).

    Thresholds sweep every distinct score from high to low; tied scores move
    together as one step. Returns ``(points, auc)`` with points running from
    (0, 0) to (1, 1) and the AUC by the trapezoid rule.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truths).astype(bool)
    if s.shape != y.shape:
        raise ValueError("scores and truths differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC needs at least one positive and one negative")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(y)[last_of_run]
    fps = (last_of_run + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return np.column_stack([fpr, tpr]), auc


def operating_point(scores, truths, threshold: float = 0.5) -> tuple[float, float]:
    """(FPR, TPR) when scores >= ``threshold`` are called positive."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truths).astype(bool)
    hit = s >= threshold
    tpr = float(hit[y].mean()) if y.any() else 0.0
    fpr = float(hit[~y].mean()) if (~y).any() else 0.0
    return fpr, tpr


# ------------------------------------------------------------------ voting

def patient_vote(clip_predictions) -> int:
    """Plurality vote over ``(label, probabilities)`` pairs for one patient.

    A tie goes to the tied label whose clips carry the larger summed softmax
    probability for it, then to the lowest label index.
    """
    preds = list(clip_predictions)
    if not preds:
        raise EmptyVoteSet("no clips to vote on")
    votes = Counter(int(label) for label, _ in preds)
    top = max(votes.values())
    tied = sorted(label for label, n in votes.items() if n == top)
    if len(tied) == 1:
        return tied[0]
    mass = {lab: 0.0 for lab in tied}
    for label, probs in preds:
        if int(label) in mass:
            mass[int(label)] += float(np.asarray(probs)[int(label)])
    best = max(mass.values())
    return min(lab for lab in tied if mass[lab] == best)


# -------------------------------------------------------------- evaluation

@dataclass
class EvalReport:
    clip_accuracy: float
    patient_accuracy: float
    confusion: list
    labels: list
    per_class: list
    roc: list
    patients: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "clip_accuracy": self.clip_accuracy,
            "patient_accuracy": self.patient_accuracy,
            "confusion": self.confusion,
            "labels": self.labels,
            "per_class": self.per_class,
            "roc": self.roc,
            "patients": self.patients,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["clip_accuracy"], d["patient_accuracy"], d["confusion"], d["labels"],
                   d["per_class"], d["roc"], d.get("patients", []))

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, EvalReport) and self.to_dict() == other.to_dict()


REPORT_SCHEMA = {
    "type": "object",
    "required": ["clip_accuracy", "patient_accuracy", "confusion", "labels", "per_class", "roc"],
    "properties": {
        "clip_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "patient_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "confusion": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
        "labels": {"type": "array", "items": {"type": "string"}},
        "per_class": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "precision", "recall", "f1", "support"],
                "properties": {
                    "label": {"type": "string"},
                    "precision": {"type": "number", "minimum": 0, "maximum": 1},
                    "recall": {"type": "number", "minimum": 0, "maximum": 1},
                    "f1": {"type": "number", "minimum": 0, "maximum": 1},
                    "support": {"type": "integer", "minimum": 0},
                },
            },
        },
        "roc": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "auc", "points"],
                "properties": {
                    "label": {"type": "string"},
                    "auc": {"type": ["number", "null"]},
                    "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                },
            },
        },
    },
}


def evaluate_predictions(probs, truths, patient_ids=None, label_names=None) -> EvalReport:
    """Assemble an :class:`EvalReport` from per-clip probability rows."""
    probs = np.asarray(probs, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.int64)
    if probs.ndim != 2 or len(probs) == 0:
        raise EmptyDataset("no predictions to evaluate")
    k = probs.shape[1]
    names = list(label_names) if label_names else [str(i) for i in range(k)]
    preds = probs.argmax(axis=1)
    cm = confusion_matrix(truths, preds, k, names)
    m = class_metrics(cm)
    per_class = [
        {"label": names[c], "precision": float(m.precision[c]), "recall": float(m.recall[c]),
         "f1": float(m.f1[c]), "support": int(m.support[c])}
        for c in range(k)
    ]
    roc = []
    for c in range(k):
        pos = truths == c
        entry = {"label": names[c], "auc": None, "points": []}
        if pos.any() and (~pos).any():
            pts, auc = roc_curve(probs[:, c], pos)
            entry["auc"] = auc
            entry["points"] = pts.tolist()
        fpr, tpr = operating_point(probs[:, c], pos, 0.5)
        entry["threshold_0_5"] = {"fpr": fpr, "tpr": tpr}
        roc.append(entry)

    if patient_ids is None:
        patient_ids = [str(i) for i in range(len(truths))]
    by_patient: dict = {}
    for i, pid in enumerate(patient_ids):
        by_patient.setdefault(pid, []).append(i)
    patients = []
    correct = 0
    for pid in sorted(by_patient, key=str):
        idx = by_patient[pid]
        voted = patient_vote((int(preds[i]), probs[i]) for i in idx)
        # every clip of a patient carries the same true label
        true = Counter(int(truths[i]) for i in idx).most_common(1)[0][0]
        correct += voted == true
        patients.append({"patient_id": str(pid), "true": names[true], "voted": names[voted],
                         "clips": len(idx)})
    return EvalReport(
        clip_accuracy=cm.accuracy,
        patient_accuracy=correct / len(by_patient),
        confusion=cm.counts.tolist(),
        labels=names,
        per_class=per_class,
        roc=roc,
        patients=patients,
    )


def evaluate(model, features, truths, patient_ids=None) -> EvalReport:
    """Predict every clip with ``model`` and report clip- and patient-level results."""
    from .classifier import predict_batch

    _, probs = predict_batch(model, features)
    return evaluate_predictions(probs, truths, patient_ids, model.label_names)


def roc_to_csv(report: EvalReport) -> str:
    lines = ["label,fpr,tpr"]
    for entry in report.roc:
        for fpr, tpr in entry["points"]:
            lines.append(f"{entry['label']},{fpr!r},{tpr!r}")
    return "\n".join(lines) + "\n"

"""Confusion metrics, threshold sweeps, FAR, and fitness functions.

Two scoring modes exist everywhere a confusion matrix is built:

* ``sample``: every step is counted independently.
* ``event``: each maximal contiguous label-1 block is one positive event,
  detected (TP) iff any prediction inside it is 1, otherwise FN; each
  maximal contiguous prediction-1 block lying entirely in label-0
  territory is one false-alarm event; each maximal label-0 stretch
  containing no false-alarm step is one TN event.

FAR divides false positives (events or samples, per mode) by hours of
background-labeled time only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLE = "sample"
EVENT = "event"
MODES = (SAMPLE, EVENT)

FITNESS_MCC = "mcc"
FITNESS_RAD = "f1_tpr0sq"
FITNESS_NAMES = (FITNESS_MCC, FITNESS_RAD)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class RocPoint:
    theta: int
    far_per_hour: float
    tpr: float


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class EvalReport:
    """Metric summary of one classifier (or ensemble) over an evaluation set."""

    cm: ConfusionMatrix
    mode: str
    mcc: float
    f1: float
    precision: float
    recall: float
    far_per_hour: float
    background_hours: float
    theta: int = 0
    window: int = 0

    def as_dict(self) -> dict:
        return {
            "mode": self.mode, "theta": self.theta, "window": self.window,
            "tp": self.cm.tp, "tn": self.cm.tn,
            "fp": self.cm.fp, "fn": self.cm.fn,
            "mcc": self.mcc, "f1": self.f1,
            "precision": self.precision, "recall": self.recall,
            "tpr": self.recall, "far_per_hour": self.far_per_hour,
            "background_hours": self.background_hours,
        }


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown scoring mode {mode!r}")
    return mode


def rolling_sum(z: np.ndarray, window: int) -> np.ndarray:
    """Sum of the last ``window`` entries at each step; prefix before t=W-1.

    window <= 1 returns z unchanged (a window of one step is the count
    itself, and 0 means disabled).
    """
    z = np.asarray(z)
    if window <= 1:
        return z.copy()
    c = np.cumsum(z)
    out = c.copy()
    out[window:] = c[window:] - c[:-window]
    return out


def _as_y(trace) -> np.ndarray:
    return np.asarray(trace.y if hasattr(trace, "y") else trace)


def _as_z(trace) -> np.ndarray:
    return np.asarray(trace.z if hasattr(trace, "z") else trace)


def _blocks(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, end) spans of maximal contiguous 1-blocks."""
    mask = np.asarray(mask).astype(bool)
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(edges[i]), int(edges[i + 1])) for i in range(0, len(edges), 2)]


def _confusion_one(y: np.ndarray, labels: np.ndarray, mode: str) -> ConfusionMatrix:
    if y.shape[0] != labels.shape[0]:
        raise ValueError(
            f"prediction length {y.shape[0]} != label length {labels.shape[0]}")
    labels = np.asarray(labels).astype(bool)
    y = y.astype(bool)
    if mode == SAMPLE:
        tp = int(np.count_nonzero(y & labels))
        tn = int(np.count_nonzero(~y & ~labels))
        fp = int(np.count_nonzero(y & ~labels))
        fn = int(np.count_nonzero(~y & labels))
        return ConfusionMatrix(tp, tn, fp, fn)
    tp = fn = fp = tn = 0
    for lo, hi in _blocks(labels):
        if y[lo:hi].any():
            tp += 1
        else:
            fn += 1
    fp_steps = np.zeros(labels.shape[0], bool)
    for lo, hi in _blocks(y):
        if not labels[lo:hi].any():
            fp += 1
            fp_steps[lo:hi] = True
    for lo, hi in _blocks(~labels):
        if not fp_steps[lo:hi].any():
            tn += 1
    return ConfusionMatrix(tp, tn, fp, fn)


def confusion(traces, labels, mode: str = SAMPLE) -> ConfusionMatrix:
    """Aggregate confusion matrix over aligned (trace, label) pairs.

    Traces may be StepTrace objects or plain binary arrays.
    """
    check_mode(mode)
    if len(traces) != len(labels):
        raise ValueError("traces and labels differ in length")
    total = ConfusionMatrix(0, 0, 0, 0)
    for trace, lab in zip(traces, labels):
        total = total + _confusion_one(_as_y(trace), np.asarray(lab), mode)
    return total


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation coefficient; 0 when the denominator vanishes."""
    d = ((cm.tp + cm.fp) * (cm.tp + cm.fn)
         * (cm.tn + cm.fp) * (cm.tn + cm.fn))
    if d == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(d)


def precision(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0


def recall(cm: ConfusionMatrix) -> float:
    return cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0


def f1(cm: ConfusionMatrix) -> float:
    p = precision(cm)
    r = recall(cm)
    return 2.0 * p * r / (p + r) if p + r else 0.0


def false_positive_rate(cm: ConfusionMatrix) -> float:
    return cm.fp / (cm.fp + cm.tn) if cm.fp + cm.tn else 0.0


def background_hours(runs) -> float:
    """Hours of label-0 time across runs (label-0 steps x stride)."""
    seconds = 0.0
    for run in runs:
        labels = np.asarray(run.labels)
        seconds += float(np.count_nonzero(labels == 0)) * run.stride_seconds
    return seconds / 3600.0


def _windowed(traces, window: int) -> list[np.ndarray]:
    return [rolling_sum(_as_z(t), window) for t in traces]


def _score_at_theta(windowed, labels, theta: int, mode: str):
    ys = [(w > theta).astype(np.int8) for w in windowed]
    return confusion(ys, labels, mode)


def roc_sweep(traces, labels, mode: str, background_hours: float,
              window: int = 0) -> RocCurve:
    """Sweep theta over 0..max windowed count; FAR = FP / background hours."""
    check_mode(mode)
    if background_hours <= 0:
        raise ValueError("background time is zero; FAR undefined")
    windowed = _windowed(traces, window)
    max_count = max((int(w.max()) for w in windowed if w.size), default=0)
    points = []
    for theta in range(max_count + 1):
        cm = _score_at_theta(windowed, labels, theta, mode)
        points.append(RocPoint(theta=theta,
                               far_per_hour=cm.fp / background_hours,
                               tpr=recall(cm)))
    return RocCurve(tuple(points))


def tpr_at_far(roc: RocCurve, far_limit: float) -> float:
    """TPR of the smallest theta with FAR <= far_limit; 0 if none qualifies."""
    for p in roc.points:
        if p.far_per_hour <= far_limit:
            return p.tpr
    return 0.0


def fitness_mcc(cm: ConfusionMatrix) -> float:
    return mcc(cm)


def fitness_rad(traces, labels, mode: str, background_hours: float,
                window: int = 0) -> float:
    """F1 of the traces' own predictions plus squared TPR at FAR = 0."""
    cm = confusion(traces, labels, mode)
    roc = roc_sweep(traces, labels, mode, background_hours, window)
    tpr0 = tpr_at_far(roc, 0.0)
    return f1(cm) + tpr0 * tpr0


def best_mcc_threshold(traces, labels, mode: str = SAMPLE,
                       window: int = 0) -> tuple[int, float]:
    """Exhaustive theta sweep maximizing MCC; ties break toward larger theta."""
    check_mode(mode)
    windowed = _windowed(traces, window)
    max_count = max((int(w.max()) for w in windowed if w.size), default=0)
    best_theta, best = 0, -2.0
    for theta in range(max_count + 1):
        cm = _score_at_theta(windowed, labels, theta, mode)
        m = mcc(cm)
        if m >= best:
            best_theta, best = theta, m
    return best_theta, best


def make_report(traces, labels, runs, mode: str = SAMPLE, theta: int = 0,
                window: int = 0) -> EvalReport:
    """Score already-thresholded traces and bundle the standard metrics."""
    cm = confusion(traces, labels, mode)
    hours = background_hours(runs)
    far = cm.fp / hours if hours > 0 else 0.0
    return EvalReport(cm=cm, mode=mode, mcc=mcc(cm), f1=f1(cm),
                      precision=precision(cm), recall=recall(cm),
                      far_per_hour=far, background_hours=hours,
                      theta=theta, window=window)

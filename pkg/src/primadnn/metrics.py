"""Threshold decoding and segment-based detection metrics.

The timeline is split into fixed 100 ms segments; a (segment, class)
pair is active iff any event of that class overlaps the segment with
positive measure. Per-class and pooled counts give macro and micro
F-measures.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .labels import TECHNIQUE_LABELS, label_index

DEFAULT_THRESHOLD = 0.5
DEFAULT_SEGMENT_SECONDS = 0.100


def binarize(activations: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Detection roll: cell active iff activation >= threshold."""
    return (np.asarray(activations) >= threshold).astype(np.float64)


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass
class SegmentMetrics:
    per_class: dict  # label -> ClassCounts
    segment_seconds: float = DEFAULT_SEGMENT_SECONDS

    @property
    def pooled(self) -> ClassCounts:
        return ClassCounts(
            tp=sum(c.tp for c in self.per_class.values()),
            fp=sum(c.fp for c in self.per_class.values()),
            fn=sum(c.fn for c in self.per_class.values()),
        )

    @property
    def macro_f(self) -> float:
        return float(np.mean([c.f_measure for c in self.per_class.values()]))

    @property
    def micro_f(self) -> float:
        return self.pooled.f_measure

    @property
    def micro_precision(self) -> float:
        return self.pooled.precision

    @property
    def micro_recall(self) -> float:
        return self.pooled.recall

    def to_dict(self) -> dict:
        return {
            "segment_seconds": self.segment_seconds,
            "per_class": {
                label: {
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f_measure": c.f_measure,
                }
                for label, c in self.per_class.items()
            },
            "macro_f": self.macro_f,
            "micro_f": self.micro_f,
            "precision": self.micro_precision,
            "recall": self.micro_recall,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_table(self, name: str = "model") -> str:
        header = f"{'':24s} {'Macro-F':>8s} {'Micro-F':>8s} {'P':>8s} {'R':>8s}"
        row = (
            f"{name:24s} {self.macro_f:8.3f} {self.micro_f:8.3f} "
            f"{self.micro_precision:8.3f} {self.micro_recall:8.3f}"
        )
        return header + "\n" + row

    @staticmethod
    def merge(parts) -> "SegmentMetrics":
        """Exact count summation across clips."""
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to merge")
        per_class = {label: ClassCounts() for label in TECHNIQUE_LABELS}
        for m in parts:
            for label, c in m.per_class.items():
                agg = per_class[label]
                agg.tp += c.tp
                agg.fp += c.fp
                agg.fn += c.fn
        return SegmentMetrics(per_class=per_class, segment_seconds=parts[0].segment_seconds)


def _segment_span(onset: float, offset: float, seg: float, n_segments: int):
    """Indices of segments overlapping [onset, offset) with positive measure."""
    first = int(math.floor(onset / seg))
    while (first + 1) * seg <= onset:
        first += 1
    while first > 0 and first * seg > onset:
        first -= 1
    last = int(math.ceil(offset / seg)) - 1
    while last >= 0 and last * seg >= offset:
        last -= 1
    while (last + 1) * seg < offset:
        last += 1
    return max(first, 0), min(last, n_segments - 1)


def _activity_grid(events, n_segments: int, seg: float) -> np.ndarray:
    grid = np.zeros((len(TECHNIQUE_LABELS), n_segments), dtype=bool)
    for e in events:
        first, last = _segment_span(e.onset, e.offset, seg, n_segments)
        if first <= last:
            grid[label_index(e.label), first : last + 1] = True
    return grid


def segment_metrics(
    reference,
    prediction,
    total_duration: float,
    segment_seconds: float = DEFAULT_SEGMENT_SECONDS,
) -> SegmentMetrics:
    """Segment-based TP/FP/FN between reference and predicted events."""
    if total_duration < 0:
        raise ValueError("total_duration must be >= 0")
    n_segments = int(math.ceil(total_duration / segment_seconds))
    ref = _activity_grid(reference, n_segments, segment_seconds)
    pred = _activity_grid(prediction, n_segments, segment_seconds)
    per_class = {}
    for k, label in enumerate(TECHNIQUE_LABELS):
        per_class[label] = ClassCounts(
            tp=int(np.sum(ref[k] & pred[k])),
            fp=int(np.sum(~ref[k] & pred[k])),
            fn=int(np.sum(ref[k] & ~pred[k])),
        )
    return SegmentMetrics(per_class=per_class, segment_seconds=segment_seconds)


def conditions_table(rows, per_class: bool = False) -> str:
    """Table I/II-shaped report: one line per (name, SegmentMetrics) row."""
    lines = [f"{'condition':24s} {'Macro-F':>8s} {'Micro-F':>8s} {'P':>8s} {'R':>8s}"]
    for name, m in rows:
        if m is None:
            lines.append(f"{name:24s} {'FAILED':>8s} {'-':>8s} {'-':>8s} {'-':>8s}")
        else:
            lines.append(
                f"{name:24s} {m.macro_f:8.3f} {m.micro_f:8.3f} "
                f"{m.micro_precision:8.3f} {m.micro_recall:8.3f}"
            )
    return "\n".join(lines)

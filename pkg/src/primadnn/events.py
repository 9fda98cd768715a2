"""Technique events, annotation CSV files and frame-roll conversion.

Events are half-open intervals [onset, offset) in seconds. Rolls are
binary class x frame matrices on the 10 ms grid; a frame is active for
an event iff its center lies inside the event interval, which makes the
roll -> events -> roll round trip exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .audio import FRAME_SECONDS
from .labels import TECHNIQUE_LABELS, LABEL_TO_INDEX, label_index


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Event:
    onset: float
    offset: float
    label: str

    def __post_init__(self):
        if self.onset >= self.offset:
            raise AnnotationError(f"event onset {self.onset} must precede offset {self.offset}")
        if self.label not in LABEL_TO_INDEX:
            raise AnnotationError(f"unknown technique label: {self.label!r}")


def load_annotations(path) -> list:
    """Parse `onset,offset,label` CSV rows into a sorted event list."""
    events = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and row[0].strip().lower() in ("onset", "start", "time"):
                continue
            if len(row) < 3:
                raise AnnotationError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                onset, offset = float(row[0]), float(row[1])
            except ValueError:
                raise AnnotationError(f"{path}: line {lineno}: unparsable times {row[:2]}") from None
            try:
                events.append(Event(onset, offset, row[2].strip()))
            except AnnotationError as e:
                raise AnnotationError(f"{path}: line {lineno}: {e}") from None
    return sorted(events)


def save_annotations(events, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["onset", "offset", "label"])
        for e in sorted(events):
            w.writerow([f"{e.onset:.6f}", f"{e.offset:.6f}", e.label])


def events_to_roll(events, n_frames: int, frame_seconds: float = FRAME_SECONDS) -> np.ndarray:
    """Binary (n_classes, n_frames) roll; frame active iff its center is inside."""
    if n_frames <= 0:
        raise ValueError("n_frames must be positive")
    roll = np.zeros((len(TECHNIQUE_LABELS), n_frames), dtype=np.float64)
    centers = (np.arange(n_frames) + 0.5) * frame_seconds
    for e in events:
        mask = (centers >= e.onset) & (centers < e.offset)
        roll[label_index(e.label), mask] = 1.0
    return roll


def roll_to_events(roll: np.ndarray, frame_seconds: float = FRAME_SECONDS) -> list:
    """Maximal runs of active frames become events on the frame grid."""
    roll = np.asarray(roll)
    if roll.ndim != 2 or roll.shape[0] != len(TECHNIQUE_LABELS):
        raise ValueError(f"expected ({len(TECHNIQUE_LABELS)}, n_frames) roll, got {roll.shape}")
    events = []
    for k, label in enumerate(TECHNIQUE_LABELS):
        active = np.flatnonzero(roll[k] > 0.5)
        if len(active) == 0:
            continue
        breaks = np.flatnonzero(np.diff(active) > 1)
        starts = np.concatenate([[active[0]], active[breaks + 1]])
        ends = np.concatenate([active[breaks], [active[-1]]])
        for s, e in zip(starts, ends):
            events.append(Event(s * frame_seconds, (e + 1) * frame_seconds, label))
    return sorted(events)


def clip_events(events, start: float, end: float) -> list:
    """Intersect events with [start, end) and rebase onto the window."""
    out = []
    for e in events:
        onset = max(e.onset, start)
        offset = min(e.offset, end)
        if onset < offset:
            out.append(Event(onset - start, offset - start, e.label))
    return sorted(out)

"""Segment-based detection metrics vs a naive enumeration oracle."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from primadnn.events import Event
from primadnn.labels import TECHNIQUE_LABELS
from primadnn.metrics import (
    ClassCounts,
    SegmentMetrics,
    binarize,
    conditions_table,
    segment_metrics,
)


def oracle_counts(reference, prediction, duration, seg=0.1):
    """Materialize every (segment, class) pair explicitly."""
    n_segments = math.ceil(duration / seg)
    counts = {label: ClassCounts() for label in TECHNIQUE_LABELS}
    for s in range(n_segments):
        lo, hi = s * seg, (s + 1) * seg
        for label in TECHNIQUE_LABELS:
            ref = any(
                e.label == label and max(e.onset, lo) < min(e.offset, hi)
                for e in reference
            )
            pred = any(
                e.label == label and max(e.onset, lo) < min(e.offset, hi)
                for e in prediction
            )
            if ref and pred:
                counts[label].tp += 1
            elif pred:
                counts[label].fp += 1
            elif ref:
                counts[label].fn += 1
    return counts


def random_events(rng, duration=10.0, max_events=8):
    events = []
    for _ in range(int(rng.integers(1, max_events + 1))):
        onset = float(rng.uniform(0.0, duration - 0.05))
        offset = min(duration, onset + float(rng.uniform(0.02, 2.0)))
        events.append(Event(onset, offset, str(rng.choice(TECHNIQUE_LABELS))))
    return events


class TestBinarize:
    def test_below_threshold_inactive(self):
        assert np.all(binarize(np.full((9, 5), 0.49)) == 0)

    def test_boundary_is_active(self):
        assert np.all(binarize(np.full((9, 5), 0.5)) == 1)

    def test_zero_threshold_all_active(self):
        assert np.all(binarize(np.full((9, 5), 0.01), threshold=0.0) == 1)


class TestHandExamples:
    def test_vibrato_hand_case(self):
        ref = [Event(0.0, 0.30, "vibrato")]
        pred = [Event(0.10, 0.30, "vibrato")]
        m = segment_metrics(ref, pred, 10.0)
        c = m.per_class["vibrato"]
        assert (c.tp, c.fp, c.fn) == (2, 0, 1)
        assert c.precision == 1.0
        assert c.recall == pytest.approx(2.0 / 3.0)
        assert c.f_measure == pytest.approx(0.8)

    def test_macro_micro_hand_case(self):
        per_class = {label: ClassCounts() for label in TECHNIQUE_LABELS}
        per_class["bend"] = ClassCounts(tp=2, fp=0, fn=1)  # F = 0.8
        per_class["rasp"] = ClassCounts(tp=0, fp=1, fn=1)  # F = 0
        m = SegmentMetrics(per_class=per_class)
        active = [c for c in per_class.values() if c.tp + c.fp + c.fn]
        assert sum(c.f_measure for c in active) / len(active) == pytest.approx(0.4)
        pooled = m.pooled
        assert (pooled.tp, pooled.fp, pooled.fn) == (2, 1, 2)
        assert m.micro_precision == pytest.approx(2.0 / 3.0)
        assert m.micro_recall == pytest.approx(0.5)
        assert m.micro_f == pytest.approx(2 * (2 / 3) * 0.5 / ((2 / 3) + 0.5))

    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        events = random_events(rng)
        m = segment_metrics(events, list(events), 10.0)
        for label in {e.label for e in events}:
            c = m.per_class[label]
            assert c.precision == c.recall == c.f_measure == 1.0

    def test_zero_counts_give_zero_f(self):
        assert ClassCounts().f_measure == 0.0


class TestOracleEquivalence:
    def test_thousand_random_timelines(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            ref = random_events(rng)
            pred = random_events(rng)
            m = segment_metrics(ref, pred, 10.0)
            oracle = oracle_counts(ref, pred, 10.0)
            for label in TECHNIQUE_LABELS:
                a, b = m.per_class[label], oracle[label]
                assert (a.tp, a.fp, a.fn) == (b.tp, b.fp, b.fn)

    def test_frame_grid_boundaries(self):
        # onsets/offsets on exact multiples of the segment length, where
        # float rounding is most dangerous
        rng = np.random.default_rng(7)
        for _ in range(200):
            ref = [
                Event(k * 0.1, (k + j) * 0.1, "scooping")
                for k, j in zip(rng.integers(0, 90, 4), rng.integers(1, 5, 4))
            ]
            pred = [
                Event(k * 0.1, (k + j) * 0.1, "scooping")
                for k, j in zip(rng.integers(0, 90, 4), rng.integers(1, 5, 4))
            ]
            m = segment_metrics(ref, pred, 10.0)
            oracle = oracle_counts(ref, pred, 10.0)
            a, b = m.per_class["scooping"], oracle["scooping"]
            assert (a.tp, a.fp, a.fn) == (b.tp, b.fp, b.fn)


class TestProperties:
    def test_swap_exchanges_precision_and_recall(self):
        rng = np.random.default_rng(9)
        ref = random_events(rng)
        pred = random_events(rng)
        a = segment_metrics(ref, pred, 10.0)
        b = segment_metrics(pred, ref, 10.0)
        assert a.micro_precision == pytest.approx(b.micro_recall)
        assert a.micro_recall == pytest.approx(b.micro_precision)
        assert a.micro_f == pytest.approx(b.micro_f)

    def test_extra_prediction_in_empty_region_adds_fp_only(self):
        ref = [Event(0.0, 0.5, "drop")]
        pred = [Event(0.0, 0.5, "drop")]
        base = segment_metrics(ref, pred, 10.0).per_class["drop"]
        extra = segment_metrics(ref, pred + [Event(5.0, 5.3, "drop")], 10.0).per_class["drop"]
        assert extra.tp == base.tp
        assert extra.fn == base.fn
        assert extra.fp == base.fp + 3

    def test_final_partial_segment_counted(self):
        m = segment_metrics([Event(1.0, 1.05, "bend")], [Event(1.0, 1.05, "bend")], 1.05)
        assert m.per_class["bend"].tp == 1

    def test_merge_sums_counts(self):
        rng = np.random.default_rng(4)
        parts = [
            segment_metrics(random_events(rng), random_events(rng), 10.0)
            for _ in range(5)
        ]
        merged = SegmentMetrics.merge(parts)
        for label in TECHNIQUE_LABELS:
            assert merged.per_class[label].tp == sum(p.per_class[label].tp for p in parts)
            assert merged.per_class[label].fp == sum(p.per_class[label].fp for p in parts)
            assert merged.per_class[label].fn == sum(p.per_class[label].fn for p in parts)


class TestReports:
    def _metrics(self):
        return segment_metrics(
            [Event(0.0, 0.3, "vibrato")], [Event(0.1, 0.3, "vibrato")], 10.0
        )

    def test_json_fields(self):
        d = json.loads(self._metrics().to_json())
        assert d["per_class"]["vibrato"]["f_measure"] == pytest.approx(0.8)
        assert set(d) >= {"macro_f", "micro_f", "precision", "recall", "per_class"}

    def test_table_columns(self):
        table = self._metrics().to_table("full")
        assert "Macro-F" in table and "Micro-F" in table

    def test_conditions_table_failure_marker(self):
        table = conditions_table([("full", self._metrics()), ("no_se", None)])
        assert "FAILED" in table
        assert table.splitlines()[1].startswith("full")

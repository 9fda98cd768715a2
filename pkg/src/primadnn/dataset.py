"""Track ingestion: 10-second segmentation and feature/label assembly."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, HOP_SAMPLES, read_wav
from .events import Event, clip_events, events_to_roll, load_annotations
from .frontend import (
    ChannelStats,
    FeatureStack,
    FrontendConfig,
    MEL_CHANNEL_NAMES,
    PITCHGRAM_CHANNEL,
    build_mel_filterbank,
    multi_res_stack,
    standardize,
)
from .pitch import contour_to_pitchgram, estimate_pitch_fallback, load_pitch_csv

CLIP_SECONDS = 10.0
FRAMES_PER_CLIP = 1000


@dataclass(frozen=True)
class Track:
    singer_id: str
    wav_path: str
    annotation_path: str | None = None
    pitch_path: str | None = None


def segment_track(clip: AudioClip, events, clip_seconds: float = CLIP_SECONDS) -> list:
    """Split into consecutive non-overlapping windows with rebased events.

    The final short remainder is kept; events outside the audio are
    clipped with a warning.
    """
    duration = clip.duration_seconds
    for e in events:
        if e.offset > duration + 1e-9:
            warnings.warn(
                f"event {e.label} [{e.onset:.3f}, {e.offset:.3f}) extends past "
                f"audio end {duration:.3f}s; clipping"
            )
    window = int(round(clip_seconds * clip.sample_rate))
    out = []
    n = len(clip.samples)
    for start in range(0, n, window):
        seg = AudioClip(samples=clip.samples[start : start + window], sample_rate=clip.sample_rate)
        t0 = start / clip.sample_rate
        t1 = min(n, start + window) / clip.sample_rate
        out.append((seg, clip_events(events, t0, t1)))
    return out


def channel_names_for(use_pitch: bool = True, single_resolution: bool = False) -> tuple:
    mels = MEL_CHANNEL_NAMES[:1] if single_resolution else MEL_CHANNEL_NAMES
    return mels + ((PITCHGRAM_CHANNEL,) if use_pitch else ())


def extract_features(
    clip: AudioClip,
    cfg: FrontendConfig,
    fb=None,
    pitch_contour=None,
    use_pitch: bool = True,
    target_frames: int | None = FRAMES_PER_CLIP,
) -> FeatureStack:
    """Full 10 s feature stack: three mel channels plus pitchgram.

    Falls back to the built-in autocorrelation estimator when pitch is
    requested but no contour is supplied.
    """
    if fb is None:
        fb = build_mel_filterbank(cfg, clip.sample_rate)
    stack = multi_res_stack(clip, cfg, fb=fb, target_frames=target_frames)
    if not use_pitch:
        return stack
    if pitch_contour is None:
        pitch_contour = estimate_pitch_fallback(clip)
    n_frames = stack.n_frames
    gram = contour_to_pitchgram(pitch_contour, fb, n_frames)
    data = np.concatenate([stack.data, gram[None, :, :]], axis=0)
    return FeatureStack(data=data, channel_names=stack.channel_names + (PITCHGRAM_CHANNEL,))


@dataclass
class Example:
    """One training/evaluation unit: a clip's features and label roll."""

    singer_id: str
    features: FeatureStack
    labels: np.ndarray  # (n_classes, n_frames)
    clip_id: str = ""
    events: list | None = None  # reference annotation events, if known


def load_corpus_examples(
    manifest: dict,
    root,
    cfg: FrontendConfig | None = None,
    use_pitch: bool = True,
) -> list:
    """Materialize features and label rolls for every clip in a manifest."""
    cfg = cfg or FrontendConfig()
    root = Path(root)
    fb = None
    examples = []
    for rec in manifest["clips"]:
        clip = read_wav(root / rec["wav"])
        if fb is None:
            fb = build_mel_filterbank(cfg, clip.sample_rate)
        contour = load_pitch_csv(root / rec["pitch_csv"]) if rec.get("pitch_csv") else None
        stack = extract_features(
            clip, cfg, fb=fb, pitch_contour=contour, use_pitch=use_pitch
        )
        # float32 keeps a 200-clip corpus comfortably in memory
        stack = FeatureStack(stack.data.astype(np.float32), stack.channel_names)
        events = load_annotations(root / rec["annotation_csv"])
        labels = events_to_roll(events, stack.n_frames).astype(np.float32)
        examples.append(
            Example(
                singer_id=rec["singer_id"],
                features=stack,
                labels=labels,
                clip_id=str(rec["wav"]),
                events=events,
            )
        )
    return examples


def select_condition_channels(examples, use_pitch: bool, single_resolution: bool) -> list:
    """Restrict each example's channels for an ablation condition."""
    names = channel_names_for(use_pitch=use_pitch, single_resolution=single_resolution)
    return [
        Example(
            singer_id=e.singer_id,
            features=e.features.select_channels(names),
            labels=e.labels,
            clip_id=e.clip_id,
            events=e.events,
        )
        for e in examples
    ]

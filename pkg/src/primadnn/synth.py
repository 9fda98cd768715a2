"""Synthetic singing-technique corpus with exact ground truth.

Each 10 s clip is a sequence of sung notes rendered from a harmonic
source (8 harmonics, 1/k rolloff). A subset of notes carries a
technique motif; the generator emits the waveform, the annotation
events and the true pitch contour, so annotations are consistent with
the audio by construction.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from .audio import AudioClip, FRAME_SECONDS, HOP_SAMPLES, REQUIRED_SAMPLE_RATE, write_wav
from .events import Event, save_annotations
from .labels import TECHNIQUE_LABELS
from .pitch import PitchContour, save_pitch_csv

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class SynthSpec:
    n_harmonics: int = 8
    amplitude: float = 0.25
    attack_seconds: float = 0.010
    base_pitch_range: tuple = (175.0, 330.0)
    note_seconds: tuple = (0.55, 1.10)
    gap_seconds: tuple = (0.05, 0.20)
    events_per_clip: tuple = (3, 8)

    vibrato_rate_range: tuple = (5.0, 7.0)
    vibrato_depth_semitones: float = 1.0
    scoop_rise_range: tuple = (0.15, 0.30)
    scoop_span_semitones: float = 3.0
    bend_span_semitones: float = 2.0
    drop_span_semitones: float = 5.0
    drop_glide_seconds: float = 0.20
    hiccup_jump_semitones: float = 4.0
    hiccup_seconds: float = 0.15
    hiccup_gap_seconds: float = 0.04
    falsetto_offset_semitones: float = 9.0
    falsetto_attenuation_db: float = 12.0
    breathy_snr_db: float = -10.0
    subharmonic_ratio: float = 0.5
    rasp_subharmonic_db: float = -6.0
    fry_pulse_rate_hz: float = 40.0

    def __post_init__(self):
        for name in (
            "vibrato_depth_semitones",
            "scoop_span_semitones",
            "bend_span_semitones",
            "drop_span_semitones",
            "hiccup_jump_semitones",
            "falsetto_offset_semitones",
            "fry_pulse_rate_hz",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**known)


@dataclass
class MotifRender:
    wave: np.ndarray  # waveform segment at 44.1 kHz
    f0_hz: np.ndarray  # per-sample fundamental (0 where unvoiced)
    event: Event  # ground truth, relative to segment start


def _semitone(f0, semitones):
    return f0 * 2.0 ** (np.asarray(semitones, dtype=np.float64) / 12.0)


def _envelope(n: int, sr: int, attack: float) -> np.ndarray:
    env = np.ones(n)
    a = min(int(attack * sr), n // 2)
    if a > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(a) / a)
        env[:a] = ramp
        env[-a:] = ramp[::-1]
    return env


def _render_harmonics(f0: np.ndarray, sr: int, n_harmonics: int, harmonic_gains=None) -> np.ndarray:
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    wave = np.zeros_like(f0)
    nyquist = sr / 2.0
    fmax = float(f0.max()) if len(f0) else 0.0
    for k in range(1, n_harmonics + 1):
        if fmax * k >= nyquist:
            break
        gain = 1.0 / k
        if harmonic_gains is not None:
            gain *= harmonic_gains[k - 1]
        wave += gain * np.sin(k * phase)
    return wave


def synth_technique(
    label: str,
    spec: SynthSpec,
    rng: np.random.Generator,
    base_hz: float | None = None,
    duration: float | None = None,
    sample_rate: int = REQUIRED_SAMPLE_RATE,
) -> MotifRender:
    """Render one note carrying the given technique motif."""
    if label not in TECHNIQUE_LABELS:
        raise ValueError(f"unknown technique label: {label!r}")
    sr = sample_rate
    if base_hz is None:
        base_hz = rng.uniform(*spec.base_pitch_range)
    if duration is None:
        duration = rng.uniform(*spec.note_seconds)
    n = int(round(duration * sr))
    t = np.arange(n) / sr
    f0 = np.full(n, float(base_hz))
    gains = None
    noise = None
    sub = None
    env = _envelope(n, sr, spec.attack_seconds)
    onset, offset = 0.0, duration

    if label == "vibrato":
        rate = rng.uniform(*spec.vibrato_rate_range)
        f0 = _semitone(base_hz, spec.vibrato_depth_semitones * np.sin(2.0 * np.pi * rate * t))
    elif label == "scooping":
        rise = rng.uniform(*spec.scoop_rise_range)
        # S-shaped (logistic) rise into the note over the first `rise` seconds
        s = 1.0 / (1.0 + np.exp(-10.0 * (t / rise - 0.5)))
        dev = -spec.scoop_span_semitones * (1.0 - np.minimum(s / s[min(n - 1, int(rise * sr))], 1.0))
        f0 = _semitone(base_hz, np.where(t < rise, dev, 0.0))
        offset = rise
    elif label == "bend":
        span = min(0.4, duration * 0.5)
        start = 0.3 * duration
        inside = (t >= start) & (t < start + span)
        bump = np.zeros(n)
        bump[inside] = np.sin(np.pi * (t[inside] - start) / span)
        f0 = _semitone(base_hz, spec.bend_span_semitones * bump)
        onset, offset = start, start + span
    elif label == "drop":
        glide = min(spec.drop_glide_seconds, duration * 0.5)
        start = duration - glide
        inside = t >= start
        dev = np.zeros(n)
        dev[inside] = -spec.drop_span_semitones * (t[inside] - start) / glide
        f0 = _semitone(base_hz, dev)
        onset = start
    elif label == "hiccup":
        jump = min(spec.hiccup_seconds, duration * 0.4)
        gap = spec.hiccup_gap_seconds
        start = 0.5 * duration
        inside = (t >= start) & (t < start + jump)
        dev = np.zeros(n)
        dev[inside] = spec.hiccup_jump_semitones
        f0 = _semitone(base_hz, dev)
        env = env * ~((t >= start - gap) & (t < start))  # amplitude gap before the jump
        onset, offset = start - gap, start + jump
    elif label == "falsetto":
        f0 = _semitone(np.full(n, float(base_hz)), spec.falsetto_offset_semitones)
        att = 10.0 ** (-spec.falsetto_attenuation_db / 20.0)
        gains = [1.0 if k <= 3 else att for k in range(1, spec.n_harmonics + 1)]
    elif label == "breathy":
        pass  # noise added below
    elif label == "rasp":
        sub_amp = 10.0 ** (spec.rasp_subharmonic_db / 20.0)
        phase_sub = 2.0 * np.pi * np.cumsum(spec.subharmonic_ratio * f0) / sr
        sub = sub_amp * np.sin(phase_sub)
    elif label == "vocal_fry":
        f0 = np.full(n, spec.fry_pulse_rate_hz)

    if label == "vocal_fry":
        # pulse train replacing the harmonic source: decaying tone bursts
        wave = np.zeros(n)
        period = int(round(sr / spec.fry_pulse_rate_hz))
        kernel_len = int(0.010 * sr)
        tk = np.arange(kernel_len) / sr
        kernel = np.exp(-tk / 0.003) * np.sin(2.0 * np.pi * 800.0 * tk)
        for start in range(0, n, period):
            end = min(start + kernel_len, n)
            wave[start:end] += kernel[: end - start]
    else:
        wave = _render_harmonics(f0, sr, spec.n_harmonics, gains)
        if sub is not None:
            wave = wave + sub

    if label == "breathy":
        sig_power = float(np.mean(wave**2)) + 1e-12
        noise_power = sig_power * 10.0 ** (-spec.breathy_snr_db / 10.0)
        wave = wave + rng.standard_normal(n) * np.sqrt(noise_power)

    wave = spec.amplitude * env * wave
    f0_out = f0.copy()
    f0_out[env <= 0] = 0.0
    return MotifRender(wave=wave, f0_hz=f0_out, event=Event(onset, offset, label))


def _plain_note(spec, rng, base_hz, duration, sr):
    n = int(round(duration * sr))
    f0 = np.full(n, float(base_hz))
    wave = spec.amplitude * _envelope(n, sr, spec.attack_seconds) * _render_harmonics(
        f0, sr, spec.n_harmonics
    )
    return wave, f0


@dataclass(frozen=True)
class PseudoSinger:
    singer_id: str
    pitch_range: tuple
    loudness: float


def _singer(spec: SynthSpec, corpus_seed: int, index: int) -> PseudoSinger:
    rng = np.random.default_rng(np.random.SeedSequence([corpus_seed, 1_000_000 + index]))
    lo, hi = spec.base_pitch_range
    center = rng.uniform(lo + 20.0, hi - 20.0)
    return PseudoSinger(
        singer_id=f"singer{index:02d}",
        pitch_range=(center - 20.0, center + 20.0),
        loudness=rng.uniform(0.7, 1.0),
    )


def synth_clip(
    spec: SynthSpec,
    rng: np.random.Generator,
    singer: PseudoSinger,
    clip_seconds: float = 10.0,
    sample_rate: int = REQUIRED_SAMPLE_RATE,
):
    """One clip: (samples, events, frame-grid pitch contour)."""
    sr = sample_rate
    n_total = int(round(clip_seconds * sr))
    wave = np.zeros(n_total)
    f0 = np.zeros(n_total)
    # note schedule first, then motif assignment to distinct notes
    schedule = []
    t = rng.uniform(0.0, 0.25)
    while t < clip_seconds - 0.45:
        dur = min(rng.uniform(*spec.note_seconds), clip_seconds - t - 0.01)
        schedule.append((t, dur))
        t += dur + rng.uniform(*spec.gap_seconds)
    lo, hi = spec.events_per_clip
    n_motifs = min(int(rng.integers(lo, hi + 1)), len(schedule), len(TECHNIQUE_LABELS))
    motif_notes = rng.choice(len(schedule), size=n_motifs, replace=False)
    motif_labels = rng.permutation(np.array(TECHNIQUE_LABELS, dtype=object))[:n_motifs]
    assignment = dict(zip(motif_notes.tolist(), motif_labels.tolist()))

    events = []
    for i, (start, dur) in enumerate(schedule):
        base = rng.uniform(*singer.pitch_range)
        s0 = int(round(start * sr))
        if i in assignment:
            render = synth_technique(assignment[i], spec, rng, base_hz=base, duration=dur)
            seg, f0seg = render.wave, render.f0_hz
            ev = render.event
            events.append(Event(start + ev.onset, start + ev.offset, ev.label))
        else:
            seg, f0seg = _plain_note(spec, rng, base, dur, sr)
        s1 = min(s0 + len(seg), n_total)
        wave[s0:s1] += singer.loudness * seg[: s1 - s0]
        f0[s0:s1] = f0seg[: s1 - s0]

    peak = np.abs(wave).max()
    if peak > 0.95:
        wave *= 0.95 / peak
    n_frames = int(np.ceil(n_total / HOP_SAMPLES))
    centers = np.minimum(
        (np.arange(n_frames) * HOP_SAMPLES + HOP_SAMPLES // 2), n_total - 1
    )
    frame_f0 = f0[centers]
    contour = PitchContour(
        times=FRAME_SECONDS * np.arange(n_frames),
        frequencies=frame_f0,
        confidences=(frame_f0 > 0).astype(np.float64),
    )
    return wave, sorted(events), contour


def synth_corpus(
    spec: SynthSpec,
    n_clips: int,
    n_singers: int,
    seed: int,
    out_dir,
    clip_seconds: float = 10.0,
    n_workers: int = 1,
) -> dict:
    """Generate WAV + annotation CSV + pitch CSV per clip, plus a manifest.

    Per-clip RNG streams are derived independently from the corpus seed,
    so the output is identical for any worker count.
    """
    if n_clips < 1:
        raise ValueError("n_clips must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    singers = [_singer(spec, seed, i) for i in range(n_singers)]
    jobs = [(spec, seed, i, singers[i % n_singers], clip_seconds, out) for i in range(n_clips)]
    if n_workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_generate_one_star, jobs))
    else:
        records = [_generate_one(*job) for job in jobs]
    manifest = {
        "seed": seed,
        "n_clips": n_clips,
        "n_singers": n_singers,
        "clip_seconds": clip_seconds,
        "spec": spec.to_dict(),
        "clips": records,
    }
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    return manifest


def _generate_one_star(job):
    return _generate_one(*job)


def _generate_one(spec, seed, index, singer, clip_seconds, out: Path) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    wave, events, contour = synth_clip(spec, rng, singer, clip_seconds)
    stem = f"clip{index:04d}"
    wav = f"{stem}.wav"
    ann = f"{stem}.events.csv"
    pitch = f"{stem}.pitch.csv"
    write_wav(out / wav, AudioClip(samples=wave))
    save_annotations(events, out / ann)
    save_pitch_csv(out / pitch, contour)
    return {
        "wav": wav,
        "annotation_csv": ann,
        "pitch_csv": pitch,
        "singer_id": singer.singer_id,
        "seed": [seed, index],
    }


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    with open(path) as f:
        return json.load(f)

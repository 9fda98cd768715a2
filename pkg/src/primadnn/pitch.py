"""Pitch contours and the mel-band pitchgram channel.

The pitchgram is a binary 160-band matrix with a one-hot at the mel
band containing each frame's f0; unvoiced frames are all-zero columns.
Contours normally come from an external tracker as CSV; a normalized
autocorrelation fallback estimator is provided for self-contained runs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, FRAME_SECONDS, HOP_SAMPLES
from .frontend import MelFilterbank

DEFAULT_VOICING_THRESHOLD = 0.5
FALLBACK_FMIN = 50.0
FALLBACK_FMAX = 1100.0
_FALLBACK_WINDOW = 1764  # 40 ms, >= 2x the longest searched lag


class PitchCsvError(ValueError):
    """Raised for malformed pitch contour files."""


@dataclass(frozen=True)
class PitchContour:
    """Time-stamped f0 estimates; frequency 0 marks unvoiced frames."""

    times: np.ndarray
    frequencies: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        f = np.asarray(self.frequencies, dtype=np.float64)
        c = np.asarray(self.confidences, dtype=np.float64)
        if not (t.shape == f.shape == c.shape):
            raise ValueError("contour columns must have equal length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("contour times must be strictly increasing")
        if np.any(f < 0):
            raise ValueError("contour frequencies must be >= 0")
        if np.any((c < 0) | (c > 1)):
            raise ValueError("contour confidences must lie in [0, 1]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "confidences", c)

    def __len__(self) -> int:
        return len(self.times)


def load_pitch_csv(path) -> PitchContour:
    """Parse a `time,frequency,confidence` CSV (optional header)."""
    times, freqs, confs = [], [], []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and not _is_number(row[0]):
                continue  # header
            if len(row) < 3:
                raise PitchCsvError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                times.append(float(row[0]))
                freqs.append(float(row[1]))
                confs.append(float(row[2]))
            except ValueError:
                raise PitchCsvError(f"{path}: line {lineno}: unparsable row {row!r}") from None
    try:
        return PitchContour(np.array(times), np.array(freqs), np.array(confs))
    except ValueError as e:
        raise PitchCsvError(f"{path}: {e}") from None


def save_pitch_csv(path, contour: PitchContour) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "frequency", "confidence"])
        for t, fr, c in zip(contour.times, contour.frequencies, contour.confidences):
            w.writerow([f"{t:.6f}", f"{fr:.4f}", f"{c:.4f}"])


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def estimate_pitch_fallback(
    clip: AudioClip,
    fmin: float = FALLBACK_FMIN,
    fmax: float = FALLBACK_FMAX,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
) -> PitchContour:
    """Per-frame f0 by normalized autocorrelation peak picking.

    One entry per 10 ms frame; unvoiced frames get frequency 0 and a
    confidence below the voicing threshold.
    """
    x = clip.samples
    sr = clip.sample_rate
    n_frames = clip.duration_frames
    win = _FALLBACK_WINDOW
    half = win // 2
    xpad = np.pad(x, (half, max(0, (n_frames - 1) * HOP_SAMPLES + win - half - len(x))))
    idx = np.arange(win)[None, :] + HOP_SAMPLES * np.arange(n_frames)[:, None]
    frames = xpad[idx] - xpad[idx].mean(axis=1, keepdims=True)

    nfft = 4096
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n=nfft, axis=1)[:, : win]
    lag_min = max(1, int(sr / fmax))
    lag_max = min(win - 1, int(np.ceil(sr / fmin)))
    energy = acf[:, 0] + 1e-12
    lags = np.arange(lag_min, lag_max + 1)
    # bias compensation for the rectangular-window autocorrelation estimate
    norm = acf[:, lag_min : lag_max + 1] / energy[:, None] * (win / (win - lags))[None, :]

    freqs = np.zeros(n_frames)
    confs = np.zeros(n_frames)
    silent = energy < win * 1e-10
    for t in range(n_frames):
        if silent[t]:
            continue
        row = norm[t]
        peak = row.max()
        if peak <= 0:
            continue
        # prefer the shortest lag among near-best local maxima (octave safety)
        interior = np.zeros_like(row, dtype=bool)
        interior[1:-1] = (row[1:-1] >= row[:-2]) & (row[1:-1] >= row[2:])
        cand = np.flatnonzero(interior & (row >= 0.85 * peak))
        k = cand[0] if len(cand) else int(np.argmax(row))
        lag = float(lags[k])
        if 0 < k < len(row) - 1:
            denom = row[k - 1] - 2 * row[k] + row[k + 1]
            if abs(denom) > 1e-12:
                lag += 0.5 * (row[k - 1] - row[k + 1]) / denom
        freqs[t] = sr / lag
        confs[t] = float(np.clip(row[k], 0.0, 1.0))
    voiced = confs >= voicing_threshold
    freqs[~voiced] = 0.0
    times = FRAME_SECONDS * np.arange(n_frames)
    return PitchContour(times=times, frequencies=freqs, confidences=confs)


def contour_to_pitchgram(
    contour: PitchContour,
    fb: MelFilterbank,
    n_frames: int,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
) -> np.ndarray:
    """Binary n_mels x n_frames matrix, one-hot at the band nearest to f0.

    The contour is sampled at each 10 ms frame center by nearest-time
    lookup; frames below the voicing threshold give all-zero columns.
    """
    if n_frames <= 0:
        raise ValueError("n_frames must be positive")
    centers = fb.band_center_hz
    gram = np.zeros((len(centers), n_frames), dtype=np.float64)
    if len(contour) == 0:
        return gram
    frame_times = FRAME_SECONDS * np.arange(n_frames)
    right = np.searchsorted(contour.times, frame_times)
    left = np.clip(right - 1, 0, len(contour) - 1)
    right = np.clip(right, 0, len(contour) - 1)
    pick_right = np.abs(contour.times[right] - frame_times) < np.abs(
        contour.times[left] - frame_times
    )
    nearest = np.where(pick_right, right, left)
    f = contour.frequencies[nearest]
    active = (contour.confidences[nearest] >= voicing_threshold) & (f > 0)
    if np.any(active):
        bins = np.argmin(np.abs(centers[:, None] - f[None, active]), axis=0)
        gram[bins, np.flatnonzero(active)] = 1.0
    return gram

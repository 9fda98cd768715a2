"""Audio clip container and WAV input/output.

Only mono 44.1 kHz PCM is accepted; everything downstream assumes the
10 ms analysis frame grid derived from that rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

REQUIRED_SAMPLE_RATE = 44100
FRAME_SECONDS = 0.010
HOP_SAMPLES = round(FRAME_SECONDS * REQUIRED_SAMPLE_RATE)  # 441


class AudioFormatError(ValueError):
    """Raised for unsupported sample rates or encodings."""


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with amplitudes in [-1, 1] at 44.1 kHz."""

    samples: np.ndarray
    sample_rate: int = REQUIRED_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioFormatError(f"expected mono audio, got shape {samples.shape}")
        if self.sample_rate != REQUIRED_SAMPLE_RATE:
            raise AudioFormatError(
                f"sample rate must be {REQUIRED_SAMPLE_RATE} Hz, got {self.sample_rate}"
            )
        if not np.all(np.isfinite(samples)):
            raise AudioFormatError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def duration_frames(self) -> int:
        """Number of 10 ms analysis frames covering the clip."""
        return int(np.ceil(len(self.samples) / HOP_SAMPLES)) if len(self.samples) else 0


def read_wav(path) -> AudioClip:
    """Load a mono PCM WAV file (16- or 24-bit) at 44.1 kHz."""
    sr, data = wavfile.read(path)
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy returns 24-bit PCM left-justified in int32
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples=samples, sample_rate=int(sr))


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM."""
    scaled = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(scaled * 32767.0).astype(np.int16)
    wavfile.write(path, clip.sample_rate, pcm)

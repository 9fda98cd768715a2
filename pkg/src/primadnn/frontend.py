"""Multi-resolution log-mel feature extraction.

Three STFT resolutions (windows 2048/1024/512, all zero-padded to a
common 2048-point FFT so they share one frequency grid) are mapped
through a 160-band mel filterbank and log-compressed, then stacked as
channels on a shared 10 ms frame grid.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, HOP_SAMPLES

MEL_CHANNEL_NAMES = ("mel2048", "mel1024", "mel512")
PITCHGRAM_CHANNEL = "pitchgram"
FEATURE_MAGIC = b"PDNF"
FEATURE_VERSION = 1


class ConfigError(ValueError):
    """Raised for inconsistent frontend configuration."""


@dataclass(frozen=True)
class FrontendConfig:
    window_lengths: tuple = (2048, 1024, 512)
    fft_length: int = 2048
    hop_seconds: float = 0.010
    n_mels: int = 160
    fmin: float = 0.0
    fmax: float = 22050.0
    log_floor: float = 1e-10

    def __post_init__(self):
        wl = tuple(int(w) for w in self.window_lengths)
        object.__setattr__(self, "window_lengths", wl)
        if any(b >= a for a, b in zip(wl, wl[1:])):
            raise ConfigError("window_lengths must be strictly decreasing")
        if any(w > self.fft_length for w in wl):
            raise ConfigError("window lengths must not exceed fft_length")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")
        if not 0 <= self.fmin < self.fmax:
            raise ConfigError("need 0 <= fmin < fmax")

    def hop_samples(self, sample_rate: int) -> int:
        return round(self.hop_seconds * sample_rate)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, fft_length // 2 + 1), nonnegative
    band_center_hz: np.ndarray  # (n_mels,), strictly increasing


@dataclass
class FeatureStack:
    """Channels x mel-bands x frames feature tensor."""

    data: np.ndarray
    channel_names: tuple

    def __post_init__(self):
        self.data = np.asarray(self.data)
        self.channel_names = tuple(self.channel_names)
        if self.data.ndim != 3:
            raise ValueError(f"expected 3-d feature tensor, got shape {self.data.shape}")
        if len(self.channel_names) != self.data.shape[0]:
            raise ValueError("channel_names length must match channel count")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature stack contains non-finite values")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    def select_channels(self, names) -> "FeatureStack":
        idx = [self.channel_names.index(n) for n in names]
        return FeatureStack(self.data[idx].copy(), tuple(names))


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def n_frames_for(n_samples: int, hop: int = HOP_SAMPLES) -> int:
    return int(np.ceil(n_samples / hop)) if n_samples else 0


def stft(clip: AudioClip, window_length: int, cfg: FrontendConfig) -> np.ndarray:
    """Magnitude spectrogram, (fft_length//2 + 1) x n_frames.

    Frame t is centered on sample t*hop via reflect padding; the
    Hann-windowed frame is zero-padded symmetrically to fft_length.
    """
    if window_length not in cfg.window_lengths:
        raise ConfigError(f"window_length {window_length} not in {cfg.window_lengths}")
    x = clip.samples
    if len(x) == 0:
        raise ValueError("empty clip")
    hop = cfg.hop_samples(clip.sample_rate)
    n_frames = n_frames_for(len(x), hop)
    half = window_length // 2
    pad_right = max(0, (n_frames - 1) * hop + window_length - half - len(x))
    xpad = _reflect_pad(x, half, pad_right)
    idx = np.arange(window_length)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = xpad[idx] * _hann_periodic(window_length)[None, :]
    spec = np.fft.rfft(frames, n=cfg.fft_length, axis=1)
    # symmetric zero-padding = circular shift, which leaves magnitudes unchanged
    return np.abs(spec).T


def _reflect_pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    if len(x) == 1:
        return np.full(left + len(x) + right, x[0])
    out = x
    # short clips may need repeated reflection
    while left > 0 or right > 0:
        l = min(left, len(out) - 1)
        r = min(right, len(out) - 1)
        out = np.pad(out, (l, r), mode="reflect")
        left -= l
        right -= r
    return out


def build_mel_filterbank(cfg: FrontendConfig, sample_rate: int) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel scale."""
    nyquist = sample_rate / 2.0
    if cfg.fmax > nyquist:
        raise ConfigError(f"fmax {cfg.fmax} exceeds Nyquist {nyquist}")
    n_bins = cfg.fft_length // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / cfg.fft_length
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    lo, ctr, hi = hz_pts[:-2], hz_pts[1:-1], hz_pts[2:]
    up = (bin_hz[None, :] - lo[:, None]) / np.maximum(ctr - lo, 1e-12)[:, None]
    down = (hi[:, None] - bin_hz[None, :]) / np.maximum(hi - ctr, 1e-12)[:, None]
    weights = np.maximum(0.0, np.minimum(up, down))
    return MelFilterbank(weights=weights, band_center_hz=ctr.copy())


def mel_spectrogram(mag: np.ndarray, fb: MelFilterbank, cfg: FrontendConfig) -> np.ndarray:
    """Log-compressed mel power spectrogram, n_mels x frames."""
    if mag.shape[0] != fb.weights.shape[1]:
        raise ValueError(
            f"spectrogram has {mag.shape[0]} bins, filterbank expects {fb.weights.shape[1]}"
        )
    return np.log(fb.weights @ (mag * mag) + cfg.log_floor)


def multi_res_stack(
    clip: AudioClip,
    cfg: FrontendConfig,
    fb: MelFilterbank | None = None,
    target_frames: int | None = None,
) -> FeatureStack:
    """Stack the three mel resolutions as channels [2048, 1024, 512]."""
    if fb is None:
        fb = build_mel_filterbank(cfg, clip.sample_rate)
    channels = [mel_spectrogram(stft(clip, w, cfg), fb, cfg) for w in cfg.window_lengths]
    data = np.stack(channels)
    if target_frames is not None:
        data = _fit_frames(data, target_frames, fill=np.log(cfg.log_floor))
    return FeatureStack(data=data, channel_names=MEL_CHANNEL_NAMES[: len(channels)])


def _fit_frames(data: np.ndarray, target: int, fill: float) -> np.ndarray:
    t = data.shape[-1]
    if t > target:
        return data[..., :target]
    if t < target:
        pad = np.full(data.shape[:-1] + (target - t,), fill, dtype=data.dtype)
        return np.concatenate([data, pad], axis=-1)
    return data


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel standardization moments, computed on the training split."""

    mean: np.ndarray
    std: np.ndarray
    channel_names: tuple

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ValueError("non-finite standardization stats")
        if np.any(std <= 0):
            raise ValueError("standardization std must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))


def compute_channel_stats(stacks, channel_names=None) -> ChannelStats:
    """Global mean/std per mel channel over a collection of stacks.

    The pitchgram channel gets identity stats (it stays in {0, 1}).
    """
    stacks = list(stacks)
    if not stacks:
        raise ValueError("no feature stacks given")
    names = channel_names or stacks[0].channel_names
    mean = np.zeros(len(names))
    std = np.ones(len(names))
    for i, name in enumerate(names):
        if name == PITCHGRAM_CHANNEL:
            continue
        total = 0.0
        total_sq = 0.0
        count = 0
        for s in stacks:
            ch = s.data[s.channel_names.index(name)]
            total += float(ch.sum(dtype=np.float64))
            total_sq += float(np.square(ch, dtype=np.float64).sum())
            count += ch.size
        m = total / count
        mean[i] = m
        std[i] = np.sqrt(max(total_sq / count - m * m, 0.0))
    return ChannelStats(mean=mean, std=std, channel_names=names)


def channel_moment_vectors(stats: ChannelStats, channel_names) -> tuple:
    """(mean, std) vectors aligned to ``channel_names``; pitchgram gets (0, 1)."""
    mean = np.zeros(len(channel_names))
    std = np.ones(len(channel_names))
    for i, name in enumerate(channel_names):
        if name == PITCHGRAM_CHANNEL:
            continue
        j = stats.channel_names.index(name)
        mean[i] = stats.mean[j]
        std[i] = stats.std[j]
    return mean, std


def standardize(stack: FeatureStack, stats: ChannelStats) -> FeatureStack:
    """Apply (x - mean) / std per mel channel; pitchgram passes through."""
    mean, std = channel_moment_vectors(stats, stack.channel_names)
    out = (stack.data.astype(np.float64) - mean[:, None, None]) / std[:, None, None]
    return FeatureStack(data=out.astype(stack.data.dtype), channel_names=stack.channel_names)


def _names_for_channel_count(n: int) -> tuple:
    return {
        4: MEL_CHANNEL_NAMES + (PITCHGRAM_CHANNEL,),
        3: MEL_CHANNEL_NAMES,
        2: (MEL_CHANNEL_NAMES[0], PITCHGRAM_CHANNEL),
        1: (MEL_CHANNEL_NAMES[0],),
    }.get(n, tuple(f"ch{i}" for i in range(n)))


def write_feature_file(path, stack: FeatureStack) -> None:
    """Binary feature file: PDNF header + float32 LE data, channel-major."""
    c, m, t = stack.data.shape
    header = FEATURE_MAGIC + struct.pack("<IIII", FEATURE_VERSION, c, m, t)
    payload = np.ascontiguousarray(stack.data, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_feature_file(path) -> FeatureStack:
    with open(path, "rb") as f:
        head = f.read(20)
        if len(head) < 20 or head[:4] != FEATURE_MAGIC:
            raise ValueError(f"{path}: not a PDNF feature file")
        version, c, m, t = struct.unpack("<IIII", head[4:])
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported feature file version {version}")
        data = np.frombuffer(f.read(4 * c * m * t), dtype="<f4")
    if data.size != c * m * t:
        raise ValueError(f"{path}: truncated feature file")
    return FeatureStack(
        data=data.reshape(c, m, t).astype(np.float32),
        channel_names=_names_for_channel_count(c),
    )

"""Keyframe detection from frame color histograms and the audio feature
pipeline: channel selection, automatic gain control, and MFCC extraction.

Keyframes come from a two-pass scan: pass one computes L1 differences of
successive normalized histograms and a threshold mean(d) + alpha * std(d);
pass two keeps frames whose difference strictly exceeds the threshold and
then discards candidates showing fewer than `min_colors` distinct colors
(so blank or near-blank frames never become keyframes).

Audio frames use a Hann window of 1024 samples with hop 512 at 22050 Hz
(about 46 ms with 50% overlap). Each frame yields 16 cepstral coefficients
(orthonormal DCT-II of log mel-filterbank energies, 40 triangular filters
from 0 Hz to Nyquist, log floor 1e-10) plus 16 delta and 16 delta-delta
coefficients for a 48-dimensional feature row.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.fft import dct

from .errors import InputError

__all__ = [
    "FrameHistogram",
    "AudioClip",
    "MfccConfig",
    "detect_keyframes",
    "count_distinct_colors",
    "sample_context_frames",
    "take_left_channel",
    "tf_agc",
    "mel_filterbank",
    "mfcc_features",
    "delta_coefficients",
]


@dataclass(frozen=True)
class FrameHistogram:
    """Color histogram of one video frame."""

    counts: np.ndarray
    frame_index: int
    timestamp_s: float

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size < 1:
            raise InputError(f"histogram counts must be a 1-D vector, got {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise InputError("histogram counts must be finite and nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM audio samples with an explicit sample rate."""

    samples: np.ndarray
    sample_rate_hz: int
    channels: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InputError(f"samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InputError("samples contain non-finite values")
        if self.sample_rate_hz <= 0:
            raise InputError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.channels != 1:
            raise InputError("AudioClip stores mono audio only")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class MfccConfig:
    """Framing and filterbank settings for MFCC extraction."""

    window_len: int = 1024
    hop: int = 512
    mel_filters: int = 40
    n_coeffs: int = 16

    def __post_init__(self):
        if not 0 < self.hop <= self.window_len:
            raise InputError(
                f"hop must satisfy 0 < hop <= window_len, got {self.hop}, {self.window_len}"
            )
        if self.n_coeffs > self.mel_filters:
            raise InputError(
                f"n_coeffs {self.n_coeffs} cannot exceed mel_filters {self.mel_filters}"
            )
        if self.mel_filters < 1:
            raise InputError("mel_filters must be >= 1")


def count_distinct_colors(h: FrameHistogram) -> int:
    """Number of histogram bins with a positive count."""
    return int(np.count_nonzero(h.counts > 0))


def detect_keyframes(
    frames: Sequence[FrameHistogram],
    alpha: float = 1.0,
    min_colors: int = 26,
) -> List[int]:
    """Two-pass keyframe detection over a frame histogram sequence.

    Returns positions (indices into `frames`) of the detected keyframes.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise InputError(f"keyframe detection needs >= 2 frames, got {len(frames)}")

    normalized = []
    for f in frames:
        total = float(f.counts.sum())
        normalized.append(f.counts / total if total > 0 else f.counts)

    diffs = np.array(
        [
            float(np.sum(np.abs(normalized[i + 1] - normalized[i])))
            for i in range(len(frames) - 1)
        ]
    )
    threshold = float(diffs.mean() + alpha * diffs.std())

    keyframes = []
    for i, d in enumerate(diffs):
        if d > threshold and count_distinct_colors(frames[i + 1]) >= min_colors:
            keyframes.append(i + 1)
    return keyframes


def sample_context_frames(
    keyframe_ts: float,
    fps: float,
    count: int = 10,
    span_s: float = 5.0,
) -> List[float]:
    """Timestamps of `count` uniformly spaced frames in a span centered on
    the keyframe, snapped to the frame grid. Windows that would start
    before zero are shifted to start at zero, keeping the full span.
    """
    if fps <= 0:
        raise InputError(f"fps must be > 0, got {fps}")
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    if span_s < 0:
        raise InputError(f"span must be >= 0, got {span_s}")
    start = max(0.0, keyframe_ts - span_s / 2.0)
    times = np.linspace(start, start + span_s, count)
    snapped = np.round(times * fps) / fps
    return [float(t) for t in snapped]


def take_left_channel(samples, sample_rate_hz: int, channels: int = 2) -> AudioClip:
    """Keep channel 0 of interleaved stereo input; mono passes through."""
    raw = np.asarray(samples, dtype=np.float64)
    if raw.ndim != 1:
        raise InputError(f"interleaved samples must be 1-D, got shape {raw.shape}")
    if channels == 1:
        return AudioClip(samples=raw, sample_rate_hz=sample_rate_hz)
    if channels != 2:
        raise InputError(f"expected 1 or 2 channels, got {channels}")
    if raw.size % 2 != 0:
        raise InputError("stereo interleaved input must have even length")
    return AudioClip(samples=raw[0::2], sample_rate_hz=sample_rate_hz)


def _octave_band_signals(x: np.ndarray, n_bands: int) -> np.ndarray:
    """Split a signal into octave bands by rFFT bin masking.

    Band 0 is the top octave (Nyquist/2, Nyquist]; each next band halves
    the range; the last band keeps everything below, including DC. The
    bands partition the spectrum, so they sum back to the input exactly.
    """
    n = x.size
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n)  # cycles/sample, up to 0.5
    nyq = 0.5
    bands = np.empty((n_bands, n))
    lower_edges = [nyq / 2 ** (b + 1) for b in range(n_bands)]
    for b in range(n_bands):
        hi = nyq / 2**b
        lo = lower_edges[b] if b < n_bands - 1 else 0.0
        if b == n_bands - 1:
            mask = freqs <= hi
        else:
            mask = (freqs > lo) & (freqs <= hi)
        bands[b] = np.fft.irfft(spectrum * mask, n=n)
    return bands


def tf_agc(
    clip: AudioClip,
    n_bands: int = 8,
    attack_s: float = 0.025,
    release_s: float = 0.25,
    gain_floor: float = 1e-6,
) -> AudioClip:
    """Time-frequency automatic gain control.

    Each octave band tracks its peak power with an instant-capture,
    release-rate-decay envelope; the per-band gain 1/sqrt(max(env, floor))
    is then smoothed with the attack constant when the gain must fall
    (signal got louder) and the release constant when it may rise. Silent
    input stays silent because zero samples times any finite gain is zero.
    """
    x = clip.samples
    if x.size == 0:
        return clip
    fs = clip.sample_rate_hz
    bands = _octave_band_signals(x, n_bands)
    decay = math.exp(-1.0 / (release_s * fs))
    c_attack = 1.0 - math.exp(-1.0 / (attack_s * fs))
    c_release = 1.0 - math.exp(-1.0 / (release_s * fs))

    out = np.zeros_like(x)
    for b in range(n_bands):
        band = bands[b]
        env = 0.0
        gain = 1.0
        gained = np.empty_like(band)
        for n in range(band.size):
            p = band[n] * band[n]
            env = p if p > env * decay else env * decay
            target = 1.0 / math.sqrt(env if env > gain_floor else gain_floor)
            c = c_attack if target < gain else c_release
            gain += c * (target - gain)
            gained[n] = band[n] * gain
        out += gained
    return AudioClip(samples=out, sample_rate_hz=fs)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filterbank over rFFT bins, 0 Hz to Nyquist.

    Returns an (n_filters, n_fft // 2 + 1) matrix of nonnegative weights;
    filter m rises from boundary point m-1 to its center at point m and
    falls to point m+1, with the n_filters + 2 boundary points uniformly
    spaced on the mel scale.
    """
    nyquist = sample_rate_hz / 2.0
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(nyquist), n_filters + 2)
    hz_points = _mel_to_hz(mel_points)
    bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft

    bank = np.zeros((n_filters, bin_freqs.size))
    for m in range(n_filters):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def delta_coefficients(seq, window: int = 2) -> np.ndarray:
    """Regression deltas over feature rows with edge replication:

        delta_t = sum_{n=1..window} n (c_{t+n} - c_{t-n}) / (2 sum n^2)
    """
    X = np.asarray(seq, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError(f"delta input must have >= 1 row, got shape {X.shape}")
    if window < 1:
        raise InputError(f"window must be >= 1, got {window}")
    t = X.shape[0]
    padded = np.concatenate(
        [np.repeat(X[:1], window, axis=0), X, np.repeat(X[-1:], window, axis=0)]
    )
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    out = np.zeros_like(X)
    for n in range(1, window + 1):
        out += n * (padded[window + n : window + n + t] - padded[window - n : window - n + t])
    return out / denom


def mfcc_features(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """MFCC + delta + delta-delta rows, one per analysis frame.

    The clip must already be at 22050 Hz (no implicit resampling) and at
    least one window long; frame count is floor((L - window)/hop) + 1.
    """
    if clip.sample_rate_hz != 22050:
        raise InputError(
            f"expected 22050 Hz input, got {clip.sample_rate_hz} (resample upstream)"
        )
    x = clip.samples
    if x.size < cfg.window_len:
        raise InputError(
            f"clip has {x.size} samples, need at least window_len={cfg.window_len}"
        )

    n_frames = (x.size - cfg.window_len) // cfg.hop + 1
    window = np.hanning(cfg.window_len)
    bank = mel_filterbank(cfg.mel_filters, cfg.window_len, clip.sample_rate_hz)

    cepstra = np.empty((n_frames, cfg.n_coeffs))
    for t in range(n_frames):
        frame = x[t * cfg.hop : t * cfg.hop + cfg.window_len] * window
        power = np.abs(np.fft.rfft(frame)) ** 2
        mel_energy = bank @ power
        log_energy = np.log(np.maximum(mel_energy, 1e-10))
        cepstra[t] = dct(log_energy, type=2, norm="ortho")[: cfg.n_coeffs]

    d1 = delta_coefficients(cepstra, window=2)
    d2 = delta_coefficients(d1, window=2)
    return np.hstack([cepstra, d1, d2])

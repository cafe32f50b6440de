"""Shared signal-processing kernels.

One STFT front-end feeds everything else: a triangular log-frequency
pooling approximates a constant-Q representation, pitch-class folding
yields the chromagram, and positive log-magnitude flux gives the onset
strength envelope used for tempo and beat analysis.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .audio import AudioBuffer
from .errors import EmptySignal, InsufficientResolution, LagTooLarge, WrongBinning

DEFAULT_WINDOW = 2048
DEFAULT_HOP = 512
C2_HZ = 65.40639132514966  # midi 36 at A4=440


@dataclass(frozen=True)
class Spectrogram:
    """Frame x bin magnitude matrix with its time/frequency geometry.

    `t0_sec` is the time of frame 0's center, so frame t sits at
    t0_sec + t * hop_sec.
    """

    magnitudes: np.ndarray
    hop_sec: float
    bin_freqs_hz: np.ndarray
    t0_sec: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", np.asarray(self.magnitudes, dtype=np.float64))
        object.__setattr__(self, "bin_freqs_hz", np.asarray(self.bin_freqs_hz, dtype=np.float64))
        if self.magnitudes.ndim != 2:
            raise ValueError("magnitudes must be frame x bin")
        if self.magnitudes.shape[1] != len(self.bin_freqs_hz):
            raise ValueError("bin_freqs_hz length must match bin count")
        if np.any(np.diff(self.bin_freqs_hz) <= 0):
            raise ValueError("bin_freqs_hz must be strictly ascending")
        if self.magnitudes.size and (np.any(self.magnitudes < 0)
                                     or not np.all(np.isfinite(self.magnitudes))):
            raise ValueError("magnitudes must be finite and non-negative")

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    def frame_times(self) -> np.ndarray:
        return self.t0_sec + np.arange(self.n_frames) * self.hop_sec


@dataclass(frozen=True)
class Chromagram:
    """Frame x 12 pitch-class energies, index 0 = C."""

    energies: np.ndarray
    hop_sec: float
    tuning_ref_hz: float = 440.0
    t0_sec: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "energies", np.asarray(self.energies, dtype=np.float64))
        if self.energies.ndim != 2 or self.energies.shape[1] != 12:
            raise ValueError("chromagram needs exactly 12 pitch-class columns")
        if self.energies.size and np.any(self.energies < 0):
            raise ValueError("chroma energies must be non-negative")

    @property
    def n_frames(self) -> int:
        return self.energies.shape[0]


@dataclass(frozen=True)
class OnsetEnvelope:
    """Peak-normalized onset strength per frame."""

    strength: np.ndarray
    hop_sec: float
    t0_sec: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "strength", np.asarray(self.strength, dtype=np.float64))
        if self.strength.ndim != 1:
            raise ValueError("strength must be 1-D")
        if self.strength.size and np.any(self.strength < 0):
            raise ValueError("onset strength must be non-negative")

    @property
    def duration_sec(self) -> float:
        return len(self.strength) * self.hop_sec

    def frame_times(self) -> np.ndarray:
        return self.t0_sec + np.arange(len(self.strength)) * self.hop_sec


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def stft(buf: AudioBuffer, window_len: int = DEFAULT_WINDOW,
         hop: int = DEFAULT_HOP) -> Spectrogram:
    """Hann-windowed magnitude STFT.

    Frame t covers samples [t*hop, t*hop + window_len); no padding, so
    inputs shorter than one window raise EmptySignal. Frame centers are
    at (t*hop + window_len/2) / rate.
    """
    if not _is_power_of_two(window_len):
        raise ValueError("window_len must be a power of two")
    if hop <= 0 or hop > window_len:
        raise ValueError("hop must be in 1..window_len")
    x = buf.samples
    n_frames = (len(x) - window_len) // hop + 1 if len(x) >= window_len else 0
    if n_frames <= 0:
        raise EmptySignal(f"{len(x)} samples < window {window_len}")
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop]
    frames = frames * np.hanning(window_len)[None, :]
    mags = np.abs(scipy.fft.rfft(frames, axis=1))
    freqs = np.arange(window_len // 2 + 1) * buf.sample_rate_hz / window_len
    return Spectrogram(
        magnitudes=mags,
        hop_sec=hop / buf.sample_rate_hz,
        bin_freqs_hz=freqs,
        t0_sec=(window_len / 2) / buf.sample_rate_hz,
    )


_stft_cache_lock = threading.Lock()
_stft_cache: dict = {}


def stft_shared(buf: AudioBuffer, window_len: int = DEFAULT_WINDOW,
                hop: int = DEFAULT_HOP) -> Spectrogram:
    """stft with a small cache keyed on the buffer's sample array.

    Extractors running on the same decoded buffer share one transform
    instead of each recomputing it. Safe because buffers are immutable;
    entries are validated against the live array and capped at a handful
    of files.
    """
    key = (id(buf.samples), window_len, hop)
    with _stft_cache_lock:
        for k in [k for k, (ref, _) in _stft_cache.items() if ref() is None]:
            del _stft_cache[k]  # buffer is gone; do not pin its spectrogram
        entry = _stft_cache.get(key)
        if entry is not None and entry[0]() is buf.samples:
            return entry[1]
    spec = stft(buf, window_len, hop)
    with _stft_cache_lock:
        while len(_stft_cache) >= 4:
            _stft_cache.pop(next(iter(_stft_cache)))
        _stft_cache[key] = (weakref.ref(buf.samples), spec)
    return spec


def logfreq_spectrogram(spec: Spectrogram, bins_per_octave: int = 12,
                        fmin_hz: float = C2_HZ, n_bins: int = 72,
                        half_width_bins: float = 0.5) -> Spectrogram:
    """Pool spectral energy onto log-spaced bins with triangular weights.

    Output bin k is centered at fmin * 2^(k / bins_per_octave); its
    triangular window spans +/-half_width_bins log bins around the
    center and pools the squared linear magnitudes (energy). The default
    half-width of half a bin keeps neighboring bins' windows disjoint,
    so window-skirt leakage stays out of adjacent semitones. Each output
    bin's weights over linear bins are normalized to sum to one; a bin
    whose window contains no linear bin center falls back to its nearest
    linear bin.
    """
    lin_freqs = spec.bin_freqs_hz
    lin_spacing = lin_freqs[1] - lin_freqs[0] if len(lin_freqs) > 1 else lin_freqs[0]
    centers = fmin_hz * 2.0 ** (np.arange(n_bins) / bins_per_octave)

    # reject setups where neighboring log bins collapse onto one coarse bin
    nearest = np.round(centers / lin_spacing).astype(int)
    for k in range(n_bins - 1):
        if nearest[k] == nearest[k + 1] and nearest[k] < 4:
            raise InsufficientResolution(
                f"log bins {k},{k + 1} (around {centers[k]:.1f} Hz) both map to "
                f"linear bin {nearest[k]} ({lin_spacing:.2f} Hz spacing)")

    ratio = 2.0 ** (half_width_bins / bins_per_octave)
    weights = np.zeros((n_bins, len(lin_freqs)))
    for k in range(n_bins):
        lo = centers[k] / ratio
        hi = centers[k] * ratio
        rising = (lin_freqs >= lo) & (lin_freqs < centers[k])
        falling = (lin_freqs >= centers[k]) & (lin_freqs <= hi)
        weights[k, rising] = (lin_freqs[rising] - lo) / (centers[k] - lo)
        weights[k, falling] = (hi - lin_freqs[falling]) / (hi - centers[k])
        total = weights[k].sum()
        if total > 0:
            weights[k] /= total
        else:
            weights[k, min(max(nearest[k], 0), len(lin_freqs) - 1)] = 1.0
    pooled = (spec.magnitudes ** 2) @ weights.T
    return Spectrogram(pooled, spec.hop_sec, centers, t0_sec=spec.t0_sec)


def chromagram(logspec: Spectrogram, tuning_ref_hz: float = 440.0) -> Chromagram:
    """Fold a 12-bin-per-octave log spectrogram into pitch classes.

    Bin frequencies determine the fold: each log bin contributes all of
    its energy to one pitch class (A4 at the tuning reference is class 9),
    so total energy is conserved exactly.
    """
    freqs = logspec.bin_freqs_hz
    steps = 12.0 * np.log2(freqs[1:] / freqs[:-1])
    if len(freqs) < 2 or np.any(np.abs(steps - 1.0) > 1e-3):
        raise WrongBinning("chromagram requires 12 bins per octave")
    classes = (np.round(12.0 * np.log2(freqs / tuning_ref_hz)).astype(int) + 9) % 12
    energies = np.zeros((logspec.n_frames, 12))
    for pc in range(12):
        cols = classes == pc
        if np.any(cols):
            energies[:, pc] = logspec.magnitudes[:, cols].sum(axis=1)
    return Chromagram(energies, logspec.hop_sec, tuning_ref_hz, t0_sec=logspec.t0_sec)


def onset_envelope(spec: Spectrogram) -> OnsetEnvelope:
    """Positive spectral flux of log(1+magnitude), peak-normalized.

    strength[0] is 0 by definition; silence yields all zeros.
    """
    if spec.n_frames < 2:
        raise EmptySignal("onset envelope needs at least 2 frames")
    logmag = np.log1p(spec.magnitudes)
    flux = np.maximum(0.0, np.diff(logmag, axis=0)).sum(axis=1)
    strength = np.concatenate([[0.0], flux])
    peak = strength.max()
    if peak > 0:
        strength = strength / peak
    return OnsetEnvelope(strength, spec.hop_sec, t0_sec=spec.t0_sec)


def autocorrelate(x, max_lag: int) -> np.ndarray:
    """Raw autocorrelation r[l] = sum_t x[t] * x[t+l] for l in 0..max_lag."""
    x = np.asarray(x, dtype=np.float64)
    if max_lag >= len(x):
        raise LagTooLarge(f"max_lag {max_lag} >= signal length {len(x)}")
    full = np.correlate(x, x, mode="full")
    return full[len(x) - 1:len(x) + max_lag]

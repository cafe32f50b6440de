"""WAV decoding, resampling, and the canonical in-memory audio buffer.

Everything downstream consumes mono float64 samples in [-1, 1]. The
canonical analysis rate is 22050 Hz; ``resample`` converts decoded audio
to it with a windowed-sinc polyphase filter.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import upfirdn

from .errors import CorruptHeader, UnsupportedFormat

CANONICAL_RATE_HZ = 22050

# windowed-sinc taps per polyphase branch
_TAPS_PER_PHASE = 64


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio signal: float samples in [-1, 1] plus its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int
    source_path: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if samples.ndim != 1:
            raise ValueError("AudioBuffer is mono: samples must be 1-D")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")

    @property
    def duration_sec(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _read_chunks(data: bytes):
    """Yield (chunk_id, payload) pairs from a RIFF body."""
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        payload = data[pos + 8:pos + 8 + size]
        if len(payload) < size:
            raise CorruptHeader(f"chunk {cid!r} truncated: expected {size} bytes")
        yield cid, payload
        pos += 8 + size + (size & 1)  # chunks are word-aligned


def decode_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file into a mono AudioBuffer.

    Accepts PCM 16/24/32-bit integer and 32-bit float data with one or
    two channels. Stereo is downmixed by per-sample mean; integers are
    scaled to [-1, 1] by 2^(bits-1). The sample rate is preserved;
    use :func:`resample` to reach the canonical rate.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    for cid, chunk in _read_chunks(data):
        if cid == b"fmt " and fmt is None:
            if len(chunk) < 16:
                raise CorruptHeader(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
        elif cid == b"data" and payload is None:
            payload = chunk
    if fmt is None or payload is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")

    audio_format, channels, rate, _, block_align, bits = fmt
    if audio_format == 0xFFFE and len(data) >= 2:
        # WAVE_FORMAT_EXTENSIBLE: true format lives in the SubFormat GUID,
        # whose first two bytes match the classic format tag.
        for cid, chunk in _read_chunks(data):
            if cid == b"fmt " and len(chunk) >= 26:
                (audio_format,) = struct.unpack_from("<H", chunk, 24)
                break
    if audio_format not in (1, 3):
        raise UnsupportedFormat(f"{path}: format tag 0x{audio_format:04x} not PCM/float")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels (mono/stereo only)")
    if rate <= 0:
        raise CorruptHeader(f"{path}: sample rate {rate}")

    if audio_format == 3:
        if bits != 32:
            raise UnsupportedFormat(f"{path}: {bits}-bit float")
        raw = np.frombuffer(payload[:len(payload) // 4 * 4], dtype="<f4")
        samples = raw.astype(np.float64)
    elif bits == 16:
        raw = np.frombuffer(payload[:len(payload) // 2 * 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif bits == 32:
        raw = np.frombuffer(payload[:len(payload) // 4 * 4], dtype="<i4")
        samples = raw.astype(np.float64) / 2147483648.0
    elif bits == 24:
        trimmed = payload[:len(payload) // 3 * 3]
        b = np.frombuffer(trimmed, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        val = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        samples = val.astype(np.float64) / 8388608.0
    else:
        raise UnsupportedFormat(f"{path}: {bits}-bit PCM")

    if channels == 2:
        samples = samples[:len(samples) // 2 * 2].reshape(-1, 2).mean(axis=1)
    samples = np.clip(samples, -1.0, 1.0)
    return AudioBuffer(samples, int(rate), source_path=str(path))


def write_wav(buf: AudioBuffer, path, bits: int = 16) -> None:
    """Write an AudioBuffer as a mono PCM WAV file (16 or 24 bit)."""
    if bits not in (16, 24):
        raise ValueError("write_wav supports 16 or 24 bit PCM")
    x = np.clip(buf.samples, -1.0, 1.0)
    full = float(1 << (bits - 1))
    ints = np.clip(np.round(x * full), -full, full - 1).astype(np.int64)
    if bits == 16:
        payload = ints.astype("<i2").tobytes()
    else:
        u = ints.astype(np.int64) & 0xFFFFFF
        b = np.empty((len(u), 3), dtype=np.uint8)
        b[:, 0] = u & 0xFF
        b[:, 1] = (u >> 8) & 0xFF
        b[:, 2] = (u >> 16) & 0xFF
        payload = b.tobytes()
    block_align = bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, buf.sample_rate_hz,
        buf.sample_rate_hz * block_align, block_align, bits,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def _design_lowpass(num_phases: int, cutoff: float) -> np.ndarray:
    """Kaiser-windowed sinc, `_TAPS_PER_PHASE` taps per polyphase branch.

    `cutoff` is in Nyquist units of the upsampled rate. Each branch is
    normalized to unit DC gain so constants (and, to first order, ramps)
    pass through exactly.
    """
    half = _TAPS_PER_PHASE * num_phases // 2
    n = np.arange(-half, half + 1, dtype=np.float64)
    h = cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, 8.0)
    # per-branch DC normalization (partition of unity across phases)
    for p in range(num_phases):
        s = h[p::num_phases].sum()
        if s > 0:
            h[p::num_phases] /= s * num_phases
    return h * num_phases


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Resample with band-limited windowed-sinc interpolation.

    Identity (a bitwise-equal copy) when the rates already match. Output
    length is round(n * target/source), so duration is preserved to
    within one sample period.
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == buf.sample_rate_hz:
        return AudioBuffer(buf.samples.copy(), buf.sample_rate_hz, buf.source_path)
    x = buf.samples
    n_out = int(round(len(x) * target_hz / buf.sample_rate_hz))
    if len(x) == 0 or n_out == 0:
        return AudioBuffer(np.zeros(n_out), target_hz, buf.source_path)

    g = math.gcd(buf.sample_rate_hz, target_hz)
    up, down = target_hz // g, buf.sample_rate_hz // g
    h = _design_lowpass(up, min(1.0 / up, 1.0 / down))
    # pad the filter so its group delay lands on the decimation grid
    delay = (len(h) - 1) // 2
    pad = (-delay) % down
    out = upfirdn(np.concatenate([np.zeros(pad), h]), x, up=up, down=down)
    skip = (delay + pad) // down
    y = np.zeros(n_out)
    avail = out[skip:skip + n_out]
    y[:len(avail)] = avail
    return AudioBuffer(np.clip(y, -1.0, 1.0), target_hz, buf.source_path)

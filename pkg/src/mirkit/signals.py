"""Synthetic test signals with known musical ground truth.

These generators are the oracle side of the test suite: tones with known
frequencies, click tracks with exact beat times, scale/cadence clips with
a known key, and triad sequences with known chord boundaries.
"""

from __future__ import annotations

import numpy as np

from .audio import CANONICAL_RATE_HZ, AudioBuffer
from .errors import AliasedFrequency, BpmOutOfRange

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)

MAJOR_TRIAD = (0, 4, 7)
MINOR_TRIAD = (0, 3, 7)


def pitch_hz(midi_note: float, tuning_ref_hz: float = 440.0) -> float:
    """Equal-tempered frequency of a MIDI note number (A4 = 69)."""
    return tuning_ref_hz * 2.0 ** ((midi_note - 69) / 12.0)


def synth_tone(freqs, duration_sec, sample_rate_hz=CANONICAL_RATE_HZ,
               amplitudes=None, phases=None) -> AudioBuffer:
    """Sum of sinusoids, peak-normalized to 0.9.

    Raises AliasedFrequency if any component is at or above Nyquist.
    An empty frequency list yields silence.
    """
    nyquist = sample_rate_hz / 2.0
    for f in freqs:
        if f >= nyquist:
            raise AliasedFrequency(f"{f} Hz >= Nyquist {nyquist} Hz")
    n = int(round(duration_sec * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    x = np.zeros(n)
    if amplitudes is None:
        amplitudes = [1.0] * len(freqs)
    if phases is None:
        phases = [0.0] * len(freqs)
    for f, a, p in zip(freqs, amplitudes, phases):
        x += a * np.sin(2 * np.pi * f * t + p)
    peak = np.max(np.abs(x)) if n else 0.0
    if peak > 0:
        x *= 0.9 / peak
    return AudioBuffer(x, sample_rate_hz)


def synth_click_track(bpm, duration_sec, sample_rate_hz=CANONICAL_RATE_HZ,
                      meter=1, accent_gain=1.0, seed=0):
    """Click track with exact beat times; returns (buffer, beat_times).

    Clicks are 5 ms decaying noise bursts placed 60/bpm apart starting
    at t=0. Every meter-th click is scaled by accent_gain (>= 1), so
    accented and plain clicks keep the exact amplitude ratio.
    """
    if not 30 <= bpm <= 300:
        raise BpmOutOfRange(f"{bpm} BPM outside [30, 300]")
    if meter < 1:
        raise ValueError("meter must be a positive integer")
    if accent_gain < 1.0:
        raise ValueError("accent_gain must be >= 1")
    n = int(round(duration_sec * sample_rate_hz))
    period = 60.0 / bpm
    rng = np.random.default_rng(seed)
    burst_len = max(1, int(round(0.005 * sample_rate_hz)))
    burst = rng.standard_normal(burst_len) * np.exp(-np.arange(burst_len) / (burst_len / 4.0))
    burst /= np.max(np.abs(burst))

    x = np.zeros(n)
    beat_times = []
    base_amp = 0.9 / accent_gain
    k = 0
    while True:
        t = k * period
        start = int(round(t * sample_rate_hz))
        if start >= n:
            break
        amp = base_amp * (accent_gain if k % meter == 0 else 1.0)
        seg = burst[:n - start]
        x[start:start + len(seg)] += amp * seg
        beat_times.append(t)
        k += 1
    return AudioBuffer(x, sample_rate_hz), beat_times


def synth_key_clip(tonic, mode, duration_sec=8.0,
                   sample_rate_hz=CANONICAL_RATE_HZ) -> AudioBuffer:
    """Scale plus tonic-triad cadence in the requested key.

    Two octaves of the scale (natural minor for mode="minor") followed by
    a sustained tonic triad and a closing tonic octave. The tonal center
    is unambiguous by construction, which makes these clips a ground
    truth for key detection.
    """
    if mode not in ("major", "minor"):
        raise ValueError("mode must be 'major' or 'minor'")
    degrees = MAJOR_SCALE if mode == "major" else MINOR_SCALE
    base_midi = 48 + tonic  # C3..B3 tonic register
    notes = [base_midi + d for d in degrees]
    notes += [base_midi + 12 + d for d in degrees]
    notes.append(base_midi + 24)

    note_dur = 0.6 * duration_sec / len(notes)
    segments = []
    for m in notes:
        segments.append(_tone_segment([pitch_hz(m)], note_dur, sample_rate_hz))
    triad = MAJOR_TRIAD if mode == "major" else MINOR_TRIAD
    chord_freqs = [pitch_hz(base_midi + i) for i in triad]
    chord_freqs.append(pitch_hz(base_midi + 12))
    segments.append(_tone_segment(chord_freqs, 0.25 * duration_sec, sample_rate_hz))
    segments.append(_tone_segment([pitch_hz(base_midi), pitch_hz(base_midi + 12)],
                                  0.15 * duration_sec, sample_rate_hz))
    x = np.concatenate(segments)
    n = int(round(duration_sec * sample_rate_hz))
    if len(x) < n:
        x = np.concatenate([x, np.zeros(n - len(x))])
    x = x[:n]
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (0.9 / peak)
    return AudioBuffer(x, sample_rate_hz)


def _tone_segment(freqs, duration_sec, sample_rate_hz):
    n = int(round(duration_sec * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    x = np.zeros(n)
    for f in freqs:
        x += np.sin(2 * np.pi * f * t)
    # short fade at both ends to avoid clicks between segments
    fade = min(max(1, int(0.01 * sample_rate_hz)), n // 2)
    env = np.ones(n)
    env[:fade] = np.linspace(0, 1, fade)
    env[n - fade:] = np.linspace(1, 0, fade)
    x *= env
    peak = np.max(np.abs(x)) if n else 0.0
    if peak > 0:
        x *= 0.9 / peak
    return x


def synth_chord_sequence(chords, seconds_per_chord=2.0,
                         sample_rate_hz=CANONICAL_RATE_HZ):
    """Triad sequence; returns (buffer, [(start, end, label), ...]).

    `chords` is a list of (root_pc, quality) with quality "maj" or "min".
    Each chord is a four-sine complex (root, third, fifth, root+octave)
    in the octave-4/5 register, where semitones are well separated at
    the default analysis resolution. Labels use the "C:maj" text form.
    """
    from .harmony import PITCH_CLASS_NAMES

    segments = []
    truth = []
    t = 0.0
    for root, quality in chords:
        triad = MAJOR_TRIAD if quality == "maj" else MINOR_TRIAD
        base = 60 + root
        freqs = [pitch_hz(base + i) for i in triad] + [pitch_hz(base + 12)]
        segments.append(_tone_segment(freqs, seconds_per_chord, sample_rate_hz))
        truth.append((t, t + seconds_per_chord, f"{PITCH_CLASS_NAMES[root]}:{quality}"))
        t += seconds_per_chord
    x = np.concatenate(segments) if segments else np.zeros(0)
    return AudioBuffer(x, sample_rate_hz), truth


def synth_vocal_like(duration_sec=4.0, f0_hz=200.0, n_partials=10,
                     mod_hz=4.0, mod_depth=0.9,
                     sample_rate_hz=CANONICAL_RATE_HZ, seed=0) -> AudioBuffer:
    """Harmonic complex with syllable-rate amplitude modulation.

    Mimics the gross acoustics of a sung line: a pitched harmonic stack
    whose energy envelope pulses at a few Hz.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_sec * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    x = np.zeros(n)
    nyquist = sample_rate_hz / 2.0
    for k in range(1, n_partials + 1):
        f = k * f0_hz
        if f >= nyquist:
            break
        x += (1.0 / k) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    envelope = 1.0 - mod_depth * 0.5 * (1 + np.cos(2 * np.pi * mod_hz * t))
    x *= envelope
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.9 / peak
    return AudioBuffer(x, sample_rate_hz)


def synth_noise(duration_sec=4.0, sample_rate_hz=CANONICAL_RATE_HZ,
                seed=0) -> AudioBuffer:
    """White noise at 0.9 peak, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(int(round(duration_sec * sample_rate_hz)))
    x *= 0.9 / np.max(np.abs(x))
    return AudioBuffer(x, sample_rate_hz)

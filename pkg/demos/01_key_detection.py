"""Detect the key of synthesized scale/cadence clips.

Walks the chromagram front-end step by step: STFT, log-frequency
pooling, pitch-class folding, then Krumhansl-Kessler template matching.
"""

import numpy as np

from mirkit import chromagram, detect_key, logfreq_spectrogram, stft
from mirkit.harmony import PITCH_CLASS_NAMES
from mirkit.signals import synth_key_clip

for tonic, mode in [(0, "major"), (9, "minor"), (6, "major")]:
    clip = synth_key_clip(tonic, mode, duration_sec=6.0)
    spec = stft(clip)
    pooled = logfreq_spectrogram(spec)
    chroma = chromagram(pooled)

    label, confidence, scores = detect_key(chroma)
    truth = f"{PITCH_CLASS_NAMES[tonic]} {mode}"
    print(f"truth: {truth:10s} detected: {label.text():10s} confidence {confidence:.3f}")

    mean = chroma.energies.mean(axis=0)
    mean /= mean.max()
    bars = "  ".join(f"{name}:{'#' * int(round(v * 8))}"
                     for name, v in zip(PITCH_CLASS_NAMES, mean))
    print(f"  mean chroma  {bars}")

    runner_up = sorted(scores)[-2]
    print(f"  best correlation {scores.max():.3f}, runner-up {runner_up:.3f}\n")

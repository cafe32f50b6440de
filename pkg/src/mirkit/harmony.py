"""Key and chord detection from chromagrams.

Key: Pearson correlation of the mean chroma against the 24 rotations of
the Krumhansl-Kessler major/minor tone-hierarchy profiles. Chords: cosine
similarity of each frame against binary maj/min triad templates plus a
no-chord state, smoothed by Viterbi decoding with a sticky self-transition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .dsp import Chromagram, chromagram, logfreq_spectrogram, stft_shared
from .errors import SilentInput
from .framework import ExtractorDescriptor, Extractor, FeatureRecord

PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

# Krumhansl-Kessler tone-hierarchy profiles, C-rooted.
KK_MAJOR = np.array([6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88])
KK_MINOR = np.array([6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17])

NO_CHORD = 24  # state index of the no-chord label


@dataclass(frozen=True)
class KeyLabel:
    tonic: int  # pitch class, 0 = C
    mode: str  # "major" | "minor"

    def __post_init__(self):
        if not 0 <= self.tonic <= 11:
            raise ValueError("tonic must be a pitch class 0..11")
        if self.mode not in ("major", "minor"):
            raise ValueError("mode must be major or minor")

    def text(self) -> str:
        return f"{PITCH_CLASS_NAMES[self.tonic]} {self.mode}"


def parse_key(text: str) -> KeyLabel:
    name, mode = text.split()
    return KeyLabel(PITCH_CLASS_NAMES.index(name), mode)


@dataclass(frozen=True)
class ChordLabel:
    root: int | None  # pitch class or None for no-chord
    quality: str  # "maj" | "min" | "none"

    def __post_init__(self):
        if (self.root is None) != (self.quality == "none"):
            raise ValueError("no-chord has no root; triads need one")
        if self.root is not None and not 0 <= self.root <= 11:
            raise ValueError("root must be a pitch class 0..11")
        if self.quality not in ("maj", "min", "none"):
            raise ValueError("quality must be maj, min, or none")

    def text(self) -> str:
        if self.root is None:
            return "N"
        return f"{PITCH_CLASS_NAMES[self.root]}:{self.quality}"


def parse_chord(text: str) -> ChordLabel:
    if text == "N":
        return ChordLabel(None, "none")
    name, quality = text.split(":")
    return ChordLabel(PITCH_CLASS_NAMES.index(name), quality)


@dataclass(frozen=True)
class ChordSegment:
    start_sec: float
    end_sec: float
    label: ChordLabel
    confidence: float


def _profile_matrix() -> np.ndarray:
    """24 x 12 matrix: rows 0..11 major rotated to each tonic, 12..23 minor."""
    rows = [np.roll(KK_MAJOR, t) for t in range(12)]
    rows += [np.roll(KK_MINOR, t) for t in range(12)]
    return np.array(rows)


_PROFILES = _profile_matrix()


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return 0.0
    return float((a * b).sum() / denom)


def detect_key(chroma: Chromagram, major_profile=None, minor_profile=None):
    """Template-match the mean chroma; returns (KeyLabel, confidence, scores).

    scores has 24 entries: Pearson correlations for major tonics 0..11
    then minor tonics 0..11. Confidence is the margin between the two
    best correlations mapped to [0, 1]. Ties prefer the lower tonic,
    then major. Alternative 12-element tone-hierarchy profiles may be
    supplied in place of the Krumhansl-Kessler defaults.
    """
    energies = chroma.energies
    frame_energy = energies.sum(axis=1)
    voiced = frame_energy > 0
    if not np.any(voiced):
        raise SilentInput("chromagram has no voiced frames")
    mean_chroma = energies[voiced].mean(axis=0)

    if major_profile is None and minor_profile is None:
        profiles = _PROFILES
    else:
        major = np.asarray(KK_MAJOR if major_profile is None else major_profile)
        minor = np.asarray(KK_MINOR if minor_profile is None else minor_profile)
        if major.shape != (12,) or minor.shape != (12,):
            raise ValueError("key profiles need 12 elements")
        profiles = np.array([np.roll(major, t) for t in range(12)]
                            + [np.roll(minor, t) for t in range(12)])
    scores = np.array([_pearson(mean_chroma, prof) for prof in profiles])
    order = sorted(range(24), key=lambda i: (-scores[i], i % 12, i // 12))
    best, second = order[0], order[1]
    label = KeyLabel(tonic=best % 12, mode="major" if best < 12 else "minor")
    confidence = float(np.clip((scores[best] - scores[second]) / 2.0 + 0.5, 0.0, 1.0))
    return label, confidence, scores


def _chord_templates() -> np.ndarray:
    """25 x 12 emission templates: 12 maj, 12 min, then the silent no-chord row."""
    templates = np.zeros((25, 12))
    for root in range(12):
        for iv in (0, 4, 7):
            templates[root, (root + iv) % 12] = 1.0
        for iv in (0, 3, 7):
            templates[12 + root, (root + iv) % 12] = 1.0
    return templates


_TEMPLATES = _chord_templates()
_TEMPLATE_NORMS = np.linalg.norm(_TEMPLATES[:24], axis=1)


def _state_label(state: int) -> ChordLabel:
    if state == NO_CHORD:
        return ChordLabel(None, "none")
    if state < 12:
        return ChordLabel(state, "maj")
    return ChordLabel(state - 12, "min")


def chord_emissions(chroma: Chromagram, silence_ratio: float = 0.01,
                    no_chord_score: float = 1.0, floor: float = 1e-3) -> np.ndarray:
    """Per-frame emission scores for the 25 chord states.

    Triad scores are cosine similarities between the frame chroma and the
    binary templates. The no-chord state scores `no_chord_score` on frames
    whose energy falls below `silence_ratio` of the loudest frame and
    `floor` elsewhere. All scores are floored so Viterbi can work in logs.
    """
    energies = chroma.energies
    n = chroma.n_frames
    emissions = np.full((n, 25), floor)
    frame_energy = energies.sum(axis=1)
    silence_threshold = silence_ratio * frame_energy.max() if n else 0.0
    norms = np.linalg.norm(energies, axis=1)
    voiced = norms > 0
    if np.any(voiced):
        cos = (energies[voiced] @ _TEMPLATES[:24].T) / (
            norms[voiced, None] * _TEMPLATE_NORMS[None, :])
        emissions[voiced, :24] = np.maximum(cos, floor)
    emissions[frame_energy < silence_threshold, NO_CHORD] = no_chord_score
    if frame_energy.max() == 0:
        emissions[:, NO_CHORD] = no_chord_score
    return emissions


def viterbi_decode(emissions: np.ndarray, self_prob: float = 0.9):
    """Most likely state path under a sticky uniform transition model.

    Transitions: stay with probability self_prob, otherwise spread the
    remainder uniformly over the other states. Returns (path, log score).
    """
    n, n_states = emissions.shape
    log_e = np.log(emissions)
    if n_states == 1:
        return np.zeros(n, dtype=int), float(log_e.sum())
    log_stay = np.log(self_prob)
    log_switch = np.log((1.0 - self_prob) / (n_states - 1))
    delta = log_e[0].copy()
    backptr = np.zeros((n, n_states), dtype=int)
    states = np.arange(n_states)
    for t in range(1, n):
        # best off-diagonal predecessor per state: global top-2 of delta
        top2 = np.argpartition(delta, -2)[-2:]
        top2 = top2[np.argsort(delta[top2])[::-1]]
        best, second = int(top2[0]), int(top2[1])
        switch_from = np.full(n_states, best)
        switch_from[best] = second
        stay = delta + log_stay
        switch = delta[switch_from] + log_switch
        choose_stay = stay >= switch
        backptr[t] = np.where(choose_stay, states, switch_from)
        delta = np.where(choose_stay, stay, switch) + log_e[t]
    path = np.zeros(n, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(delta[path[-1]])


def state_posteriors(emissions: np.ndarray, self_prob: float = 0.9) -> np.ndarray:
    """Forward-backward posteriors under the same sticky transition model."""
    n, n_states = emissions.shape
    switch = (1.0 - self_prob) / (n_states - 1)
    alpha = np.zeros((n, n_states))
    beta = np.zeros((n, n_states))
    alpha[0] = emissions[0] / n_states
    alpha[0] /= alpha[0].sum()
    for t in range(1, n):
        prev = alpha[t - 1]
        pred = prev * self_prob + (prev.sum() - prev) * switch
        a = pred * emissions[t]
        alpha[t] = a / a.sum()
    beta[-1] = 1.0 / n_states
    for t in range(n - 2, -1, -1):
        nxt = beta[t + 1] * emissions[t + 1]
        b = nxt * self_prob + (nxt.sum() - nxt) * switch
        beta[t] = b / b.sum()
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    return gamma


def detect_chords(chroma: Chromagram, self_prob: float = 0.9,
                  silence_ratio: float = 0.01, no_chord_score: float = 1.0,
                  floor: float = 1e-3) -> list:
    """Viterbi-smoothed chord segmentation of a chromagram.

    Decoded frame labels are merged into maximal runs; each segment's
    confidence is the mean posterior margin of its decoded state over the
    runner-up, mapped to [0, 1]. Silence comes back as one "N" segment.
    """
    if chroma.n_frames == 0:
        raise SilentInput("chromagram has no frames")
    emissions = chord_emissions(chroma, silence_ratio, no_chord_score, floor)
    path, _ = viterbi_decode(emissions, self_prob)
    gamma = state_posteriors(emissions, self_prob)

    decoded = gamma[np.arange(len(path)), path]
    masked = gamma.copy()
    masked[np.arange(len(path)), path] = -np.inf
    runner_up = masked.max(axis=1)
    margins = (decoded - runner_up + 1.0) / 2.0

    hop = chroma.hop_sec
    t0 = chroma.t0_sec
    segments = []
    run_start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or path[t] != path[run_start]:
            start = 0.0 if run_start == 0 else t0 + (run_start - 0.5) * hop
            end = t0 + (t - 0.5) * hop if t < len(path) else t0 + (len(path) - 0.5) * hop
            confidence = float(np.clip(margins[run_start:t].mean(), 0.0, 1.0))
            segments.append(ChordSegment(start, max(end, start), _state_label(path[run_start]),
                                         confidence))
            run_start = t
    return segments


# --- framework extractors ---

KEY_EXTRACTOR_ID = "key-template-v1"
CHORD_EXTRACTOR_ID = "chord-template-v1"


def _parse_profile(value):
    """Comma-separated floats from a flat string param, or None."""
    if value is None:
        return None
    return np.array([float(v) for v in str(value).split(",")])


class KeyExtractor(Extractor):
    """Whole-file key estimate with the mean chroma as its latent vector.

    Params: window, hop, and optional major_profile/minor_profile as
    comma-separated 12-element vectors replacing the built-in ones.
    """

    descriptor = ExtractorDescriptor(KEY_EXTRACTOR_ID, ("key",), "builtin", "1")

    def __init__(self, params=None):
        params = params or {}
        self.window = int(params.get("window", 2048))
        self.hop = int(params.get("hop", 512))
        self.major_profile = _parse_profile(params.get("major_profile"))
        self.minor_profile = _parse_profile(params.get("minor_profile"))

    def analyze(self, buf: AudioBuffer) -> list:
        chroma = chromagram(logfreq_spectrogram(stft_shared(buf, self.window, self.hop)))
        label, confidence, scores = detect_key(chroma, self.major_profile,
                                               self.minor_profile)
        voiced = chroma.energies.sum(axis=1) > 0
        mean_chroma = chroma.energies[voiced].mean(axis=0)
        total = mean_chroma.sum()
        if total > 0:
            mean_chroma = mean_chroma / total
        top = np.sort(scores)[::-1]
        return [FeatureRecord(
            extractor_id=self.descriptor.id,
            feature="key",
            start_sec=0.0,
            end_sec=buf.duration_sec,
            label=label.text(),
            confidence=confidence,
            latent=[round(float(v), 6) for v in mean_chroma],
            metadata={
                "r_best": "%.6f" % top[0],
                "margin": "%.6f" % (top[0] - top[1]),
            },
        )]


class ChordExtractor(Extractor):
    """One record per decoded chord segment.

    Params: window, hop, self_prob (Viterbi stickiness), silence_ratio
    (no-chord energy threshold), no_chord_score, and floor (emission
    floor), so evaluation runs can sweep the smoothing constants.
    """

    descriptor = ExtractorDescriptor(CHORD_EXTRACTOR_ID, ("chord",), "builtin", "1")

    def __init__(self, params=None):
        params = params or {}
        self.window = int(params.get("window", 2048))
        self.hop = int(params.get("hop", 512))
        self.self_prob = float(params.get("self_prob", 0.9))
        self.silence_ratio = float(params.get("silence_ratio", 0.01))
        self.no_chord_score = float(params.get("no_chord_score", 1.0))
        self.floor = float(params.get("floor", 1e-3))

    def analyze(self, buf: AudioBuffer) -> list:
        chroma = chromagram(logfreq_spectrogram(stft_shared(buf, self.window, self.hop)))
        segments = detect_chords(chroma, self_prob=self.self_prob,
                                 silence_ratio=self.silence_ratio,
                                 no_chord_score=self.no_chord_score,
                                 floor=self.floor)
        duration = buf.duration_sec
        records = []
        for i, seg in enumerate(segments):
            start = 0.0 if i == 0 else seg.start_sec
            end = duration if i == len(segments) - 1 else seg.end_sec
            records.append(FeatureRecord(
                extractor_id=self.descriptor.id,
                feature="chord",
                start_sec=round(start, 6),
                end_sec=round(max(end, start), 6),
                label=seg.label.text(),
                confidence=round(seg.confidence, 6),
                metadata={},
            ))
        return records


def register_harmony_extractors(registry) -> None:
    registry.register(KeyExtractor.descriptor, KeyExtractor)
    registry.register(ChordExtractor.descriptor, ChordExtractor)

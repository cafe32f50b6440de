"""Evaluation metrics, ground-truth annotations, and the candidate catalog.

Metrics mirror the community conventions for each task: weighted key
scoring with fifth/relative/parallel credit, duration-weighted chord
symbol recall computed by exact segment intersection, one-to-one beat
matching inside a +/-70 ms window, and tempo accuracy with an optional
octave allowance. The catalog embeds the benchmark numbers of published
candidate systems per task for side-by-side comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import NoOverlap, OverlappingSegments
from .framework import PipelineReport, dumps_canonical
from .harmony import KeyLabel, parse_key


@dataclass
class Annotation:
    """Per-file ground truth; any subset of the features may be present."""

    path: str
    key: str | None = None
    chords: list = field(default_factory=list)  # (start, end, label) ascending
    beats: list = field(default_factory=list)
    tempo_bpm: float | None = None
    vocals: str | None = None


@dataclass(frozen=True)
class CandidateEntry:
    task: str
    approach: str
    dataset: str
    metric_name: str
    value: float
    source_table: str
    detail: str = ""

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("benchmark values are non-negative")
        if self.task not in ("key", "chord", "tempo-beat", "instrument", "mood"):
            raise ValueError(f"unknown task {self.task!r}")


# --- key ---

_RELATIVE_OF_MAJOR = 9  # A minor relative to C major
_RELATIVE_OF_MINOR = 3  # Eb major relative to C minor


def key_score(predicted: KeyLabel, truth: KeyLabel, weighted: bool = True) -> float:
    """Accuracy with partial credit for musically close errors.

    Exact 1.0; predicted tonic a perfect fifth above in the same mode
    0.5; relative major/minor 0.3; parallel (same tonic, other mode)
    0.2; anything else 0.0. With weighted=False only exact counts.
    """
    if predicted == truth:
        return 1.0
    if not weighted:
        return 0.0
    if predicted.mode == truth.mode and predicted.tonic == (truth.tonic + 7) % 12:
        return 0.5
    if truth.mode == "major" and predicted.mode == "minor" \
            and predicted.tonic == (truth.tonic + _RELATIVE_OF_MAJOR) % 12:
        return 0.3
    if truth.mode == "minor" and predicted.mode == "major" \
            and predicted.tonic == (truth.tonic + _RELATIVE_OF_MINOR) % 12:
        return 0.3
    if predicted.tonic == truth.tonic and predicted.mode != truth.mode:
        return 0.2
    return 0.0


# --- chords ---

def _check_segments(segments, name: str):
    last_end = None
    for start, end, _ in segments:
        if end < start:
            raise OverlappingSegments(f"{name}: segment ends before it starts")
        if last_end is not None and start < last_end - 1e-9:
            raise OverlappingSegments(f"{name}: segments overlap at {start:.3f}")
        last_end = end


def wcsr(predicted, truth, total_duration: float | None = None) -> float:
    """Weighted chord symbol recall by exact segment intersection.

    Segments are (start, end, label) triples sorted by start; the score
    is the truth-labeled duration (including "N") on which the predicted
    label agrees, divided by the total truth-labeled duration.
    """
    predicted = sorted(predicted, key=lambda s: s[0])
    truth = sorted(truth, key=lambda s: s[0])
    _check_segments(predicted, "predicted")
    _check_segments(truth, "truth")
    denom = sum(end - start for start, end, _ in truth)
    if denom <= 0:
        return 0.0
    if total_duration is not None:
        for name, segs in (("predicted", predicted), ("truth", truth)):
            if segs and segs[-1][1] > total_duration + 1e-6:
                raise OverlappingSegments(f"{name} extends past total_duration")
    matched = 0.0
    for t_start, t_end, t_label in truth:
        for p_start, p_end, p_label in predicted:
            if p_end <= t_start:
                continue
            if p_start >= t_end:
                break
            if p_label == t_label:
                matched += min(p_end, t_end) - max(p_start, t_start)
    return matched / denom


# --- beats ---

def beat_f_measure(predicted, truth, window_sec: float = 0.07) -> float:
    """F-measure of one-to-one greedy beat matching within +/-window.

    Both empty scores 1.0; exactly one empty scores 0.0.
    """
    predicted = sorted(predicted)
    truth = sorted(truth)
    if not predicted and not truth:
        return 1.0
    if not predicted or not truth:
        return 0.0
    used = [False] * len(predicted)
    hits = 0
    for t in truth:
        best = None
        best_dist = window_sec
        for i, p in enumerate(predicted):
            if used[i]:
                continue
            d = abs(p - t)
            if d <= best_dist:
                best, best_dist = i, d
            if p > t + window_sec:
                break
        if best is not None:
            used[best] = True
            hits += 1
    precision = hits / len(predicted)
    recall = hits / len(truth)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# --- tempo ---

def tempo_accuracy(predicted_bpm: float, truth_bpm: float,
                   tolerance: float = 0.04, allow_octave: bool = False) -> float:
    """1.0 when |pred - truth| / truth <= tolerance, else 0.0.

    With allow_octave, predictions matching 2x, 3x, 1/2, or 1/3 of the
    truth also count (the usual lenient variant).
    """
    candidates = [truth_bpm]
    if allow_octave:
        candidates += [truth_bpm * k for k in (2.0, 3.0, 0.5, 1.0 / 3.0)]
    for target in candidates:
        if abs(predicted_bpm - target) / target <= tolerance:
            return 1.0
    return 0.0


# --- catalog ---

def _load_catalog() -> list:
    raw = json.loads(resources.files("mirkit.data").joinpath("catalog.json").read_text())
    return [CandidateEntry(**entry) for entry in raw["entries"]]


_CATALOG = None


def catalog_entries() -> list:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _load_catalog()
    return list(_CATALOG)


def catalog_query(task: str) -> list:
    """Benchmark entries for one task, best value first."""
    return sorted((e for e in catalog_entries() if e.task == task),
                  key=lambda e: -e.value)


# --- annotations ---

def load_annotation(path) -> Annotation:
    raw = json.loads(Path(path).read_text())
    chords = [(float(s), float(e), str(label)) for s, e, label in raw.get("chords", [])]
    return Annotation(
        path=raw.get("path", Path(path).stem),
        key=raw.get("key"),
        chords=chords,
        beats=[float(b) for b in raw.get("beats", [])],
        tempo_bpm=float(raw["tempo_bpm"]) if raw.get("tempo_bpm") is not None else None,
        vocals=raw.get("vocals"),
    )


def load_annotations_dir(directory) -> list:
    return [load_annotation(p) for p in sorted(Path(directory).glob("*.json"))]


def parse_chord_lab(text: str) -> list:
    """Parse "start end label" lines (tab or space separated) into segments."""
    segments = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"bad lab line: {line!r}")
        segments.append((float(parts[0]), float(parts[1]), parts[2]))
    return segments


def load_chord_lab(path) -> list:
    return parse_chord_lab(Path(path).read_text())


# --- report scoring ---

def _annotation_for(path: str, annotations) -> Annotation | None:
    stem = Path(path).stem
    for ann in annotations:
        if ann.path == path or Path(ann.path).stem == stem:
            return ann
    return None


def evaluate_report(report: PipelineReport, annotations) -> dict:
    """Score every annotated file in a report; returns the score table.

    Result: {"files": {path: {metric: value}}, "aggregate":
    {metric: mean}, "skipped": [paths]}. Raises NoOverlap when no report
    file has an annotation.
    """
    files = {}
    skipped = []
    for fr in report.files:
        ann = _annotation_for(fr.path, annotations)
        if ann is None:
            skipped.append(fr.path)
            continue
        scores = {}
        by_feature = {}
        for rec in fr.records:
            by_feature.setdefault(rec.feature, []).append(rec)
        if ann.key and "key" in by_feature:
            predicted = parse_key(by_feature["key"][0].label)
            scores["key_exact"] = key_score(predicted, parse_key(ann.key), weighted=False)
            scores["key_weighted"] = key_score(predicted, parse_key(ann.key), weighted=True)
        if ann.chords and "chord" in by_feature:
            predicted = [(r.start_sec, r.end_sec, r.label) for r in by_feature["chord"]]
            scores["chord_wcsr"] = wcsr(predicted, ann.chords)
        if ann.beats and "beat" in by_feature:
            predicted = [r.start_sec for r in by_feature["beat"]]
            scores["beat_f_measure"] = beat_f_measure(predicted, ann.beats)
        if ann.tempo_bpm is not None and "tempo" in by_feature:
            predicted = float(by_feature["tempo"][0].label)
            scores["tempo_accuracy1"] = tempo_accuracy(predicted, ann.tempo_bpm)
            scores["tempo_accuracy2"] = tempo_accuracy(predicted, ann.tempo_bpm,
                                                       allow_octave=True)
        if ann.vocals and "vocals" in by_feature:
            scores["vocals_accuracy"] = 1.0 if by_feature["vocals"][0].label == ann.vocals else 0.0
        files[fr.path] = scores
    if not files:
        raise NoOverlap("no report file has a matching annotation")
    aggregate = {}
    for scores in files.values():
        for metric, value in scores.items():
            aggregate.setdefault(metric, []).append(value)
    aggregate = {metric: float(np.mean(values)) for metric, values in aggregate.items()}
    return {"files": files, "aggregate": aggregate, "skipped": sorted(skipped)}


def serialize_scores(scores: dict) -> str:
    return dumps_canonical(scores)

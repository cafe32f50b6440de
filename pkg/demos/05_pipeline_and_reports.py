"""End-to-end pipeline: synthesize a corpus, extract everything, score it.

Shows the deterministic JSON report and the evaluation module scoring
the report against ground-truth annotations.
"""

import json
import tempfile
from pathlib import Path

from mirkit.audio import write_wav
from mirkit.evaluation import Annotation, evaluate_report, serialize_scores
from mirkit.framework import PipelineConfig, default_registry, run_pipeline, serialize_report
from mirkit.signals import synth_chord_sequence, synth_click_track, synth_key_clip

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    annotations = []

    key_clip = synth_key_clip(7, "major", 6.0)
    write_wav(key_clip, tmp / "ballad.wav")
    annotations.append(Annotation(path=str(tmp / "ballad.wav"), key="G major"))

    chords, truth = synth_chord_sequence([(2, "min"), (7, "maj"), (0, "maj")])
    write_wav(chords, tmp / "progression.wav")
    annotations.append(Annotation(path=str(tmp / "progression.wav"), chords=truth))

    clicks, beat_times = synth_click_track(120.0, 8.0)
    write_wav(clicks, tmp / "metronome.wav")
    annotations.append(Annotation(path=str(tmp / "metronome.wav"),
                                  beats=beat_times, tempo_bpm=120.0))

    config = PipelineConfig(
        input_paths=[str(tmp / "ballad.wav"), str(tmp / "progression.wav"),
                     str(tmp / "metronome.wav")],
        extractors=[("key-template-v1", {}), ("chord-template-v1", {}),
                    ("rhythm-dp-v1", {}), ("vocals-heuristic-v1", {})],
        workers=2,
    )
    report = run_pipeline(config, default_registry())

    print(f"processed {report.processed} files, {report.failed} failed")
    for fr in report.files:
        kinds = {}
        for rec in fr.records:
            kinds[rec.feature] = kinds.get(rec.feature, 0) + 1
        summary = ", ".join(f"{n} {k}" for k, n in sorted(kinds.items()))
        print(f"  {Path(fr.path).name}: {summary}")

    text = serialize_report(report)
    print(f"\nreport is {len(text)} bytes of canonical JSON; first record:")
    first = json.loads(text)["files"][0]["records"][0]
    print(" ", json.dumps(first)[:120], "...")

    scores = evaluate_report(report, annotations)
    print("\nscores against ground truth:")
    print(serialize_scores(scores["aggregate"]))

"""Tempo, beat, and downbeat tracking on click tracks.

The onset envelope's autocorrelation gives the tempo; dynamic
programming places the beats; accent energy picks the bar phase.
"""

from mirkit.evaluation import beat_f_measure, tempo_accuracy
from mirkit.rhythm import estimate_tempo, infer_downbeats, rhythm_envelope, track_beats
from mirkit.signals import synth_click_track

for bpm in (90.0, 140.0, 240.0):
    buf, truth = synth_click_track(bpm, 10.0, meter=4, accent_gain=2.0)
    env = rhythm_envelope(buf)

    est = estimate_tempo(env)
    line = f"{bpm:5.0f} BPM truth -> estimated {est.bpm:6.1f} (strength {est.strength:.2f})"
    if est.octave_alternative_bpm:
        line += f", competing octave {est.octave_alternative_bpm:.1f}"
    print(line)

    beats = track_beats(env, est.bpm)
    f = beat_f_measure(beats, truth)
    a2 = tempo_accuracy(est.bpm, bpm, allow_octave=True)
    print(f"      beats recovered: {len(beats)}/{len(truth)}  F-measure {f:.3f}"
          f"  octave-tolerant accuracy {a2:.0f}")

    grid = infer_downbeats(beats, env, meter=4)
    downs = [f"{b:.2f}" for b, flag in zip(grid.beats, grid.downbeat_flags) if flag]
    print(f"      downbeats at {', '.join(downs[:5])}...  (truth: every 4th click)\n")

"""mirkit: a modular music feature extraction toolkit.

Decode audio, run a configurable pipeline of feature extractors (key,
chords, tempo/beats/downbeats, vocals), and emit post-processed labels
plus latent vectors as structured records. Includes evaluation metrics,
a benchmark catalog of published candidate systems, and a subprocess
protocol for integrating external extractors in any language.
"""

from .audio import CANONICAL_RATE_HZ, AudioBuffer, decode_wav, resample, write_wav
from .dsp import (
    Chromagram,
    OnsetEnvelope,
    Spectrogram,
    autocorrelate,
    chromagram,
    logfreq_spectrogram,
    onset_envelope,
    stft,
)
from .framework import (
    ExtractorDescriptor,
    Extractor,
    FeatureRecord,
    PipelineConfig,
    PipelineReport,
    Registry,
    default_registry,
    parse_report,
    run_pipeline,
    serialize_report,
)
from .harmony import (
    ChordLabel,
    ChordSegment,
    KeyLabel,
    detect_chords,
    detect_key,
    parse_chord,
    parse_key,
)
from .rhythm import BeatGrid, estimate_tempo, infer_downbeats, rhythm_envelope, track_beats
from .signals import synth_click_track, synth_tone
from .vocals import VocalsDecision, classify_vocals, vocal_features

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "CANONICAL_RATE_HZ", "decode_wav", "resample", "write_wav",
    "Spectrogram", "Chromagram", "OnsetEnvelope",
    "stft", "logfreq_spectrogram", "chromagram", "onset_envelope", "autocorrelate",
    "FeatureRecord", "ExtractorDescriptor", "Extractor", "Registry",
    "PipelineConfig", "PipelineReport",
    "default_registry", "run_pipeline", "serialize_report", "parse_report",
    "KeyLabel", "ChordLabel", "ChordSegment",
    "detect_key", "detect_chords", "parse_key", "parse_chord",
    "BeatGrid", "rhythm_envelope", "estimate_tempo", "track_beats", "infer_downbeats",
    "VocalsDecision", "vocal_features", "classify_vocals",
    "synth_tone", "synth_click_track",
    "__version__",
]

"""Extractor registry, pipeline runner, and report (de)serialization.

The pipeline decodes each input once, resamples to the canonical rate,
and hands the same immutable buffer to every enabled extractor. Failures
are data: a throwing extractor becomes a per-file error entry and never
disturbs other extractors or files. Serialized reports are byte-stable:
sorted keys, fixed 6-decimal floats, and totals that depend only on the
inputs, so identical configs produce identical bytes at any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audio import CANONICAL_RATE_HZ, AudioBuffer, decode_wav, resample
from .errors import (
    ConfigInvalid,
    DuplicateId,
    InvalidRecord,
    MirkitError,
    OutputUnwritable,
    UnknownExtractor,
)


@dataclass
class FeatureRecord:
    """One extracted feature: a labeled time span, optionally with a latent vector."""

    extractor_id: str
    feature: str
    start_sec: float
    end_sec: float
    label: str
    confidence: float
    latent: list | None = None
    metadata: dict = field(default_factory=dict)

    def validate(self) -> "FeatureRecord":
        """Check every invariant; raises InvalidRecord naming the bad field."""
        if not isinstance(self.extractor_id, str) or not self.extractor_id:
            raise InvalidRecord("extractor_id")
        if not isinstance(self.feature, str) or not self.feature:
            raise InvalidRecord("feature")
        for name in ("start_sec", "end_sec", "confidence"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InvalidRecord(name)
        if self.start_sec < 0:
            raise InvalidRecord("start_sec")
        if self.end_sec < self.start_sec:
            raise InvalidRecord("end_sec")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidRecord("confidence")
        if not isinstance(self.label, str):
            raise InvalidRecord("label")
        if not self.label and self.latent is None:
            raise InvalidRecord("label", "record needs a label or a latent vector")
        if self.latent is not None:
            if not isinstance(self.latent, list) or not self.latent:
                raise InvalidRecord("latent")
            for v in self.latent:
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise InvalidRecord("latent")
        if not isinstance(self.metadata, dict):
            raise InvalidRecord("metadata")
        for k, v in self.metadata.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise InvalidRecord("metadata")
        return self


@dataclass(frozen=True)
class ExtractorDescriptor:
    id: str
    features: tuple
    kind: str = "builtin"  # builtin | external
    version: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.id:
            raise ValueError("descriptor id must be non-empty")
        if not self.features:
            raise ValueError("descriptor needs at least one feature")
        if self.kind not in ("builtin", "external"):
            raise ValueError("kind must be builtin or external")


class Extractor:
    """Analysis unit: consumes a decoded buffer, emits FeatureRecords."""

    descriptor: ExtractorDescriptor

    def analyze(self, buf: AudioBuffer) -> list:
        raise NotImplementedError


class Registry:
    """Id -> (descriptor, factory) map, read-only once the pipeline starts."""

    def __init__(self):
        self._entries = {}

    def register(self, descriptor: ExtractorDescriptor, factory):
        if descriptor.id in self._entries:
            raise DuplicateId(descriptor.id)
        self._entries[descriptor.id] = (descriptor, factory)
        return descriptor.id

    def list(self) -> list:
        return [d for d, _ in sorted(self._entries.values(), key=lambda e: e[0].id)]

    def ids(self) -> list:
        return sorted(self._entries)

    def __contains__(self, extractor_id) -> bool:
        return extractor_id in self._entries

    def describe(self, extractor_id) -> ExtractorDescriptor:
        if extractor_id not in self._entries:
            raise UnknownExtractor(extractor_id)
        return self._entries[extractor_id][0]

    def create(self, extractor_id, params=None) -> Extractor:
        if extractor_id not in self._entries:
            raise UnknownExtractor(extractor_id)
        descriptor, factory = self._entries[extractor_id]
        instance = factory(dict(params or {}))
        instance.descriptor = descriptor
        return instance


def default_registry() -> Registry:
    """Registry with the four built-in extractors."""
    from .harmony import register_harmony_extractors
    from .rhythm import register_rhythm_extractor
    from .vocals import register_vocals_extractor

    registry = Registry()
    register_harmony_extractors(registry)
    register_rhythm_extractor(registry)
    register_vocals_extractor(registry)
    return registry


@dataclass
class PipelineConfig:
    input_paths: list
    extractors: list  # list of (id, params dict)
    output_path: str | None = None
    workers: int = 1

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        extractors = []
        for entry in raw.get("enabled_extractors", raw.get("extractors", [])):
            if isinstance(entry, str):
                extractors.append((entry, {}))
            else:
                extractors.append((entry["id"], dict(entry.get("params", {}))))
        return PipelineConfig(
            input_paths=list(raw.get("input_paths", [])),
            extractors=extractors,
            output_path=raw.get("output_path"),
            workers=int(raw.get("workers", 1)),
        )


@dataclass
class FileResult:
    path: str
    duration_sec: float
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)  # (extractor_id, message)


@dataclass
class PipelineReport:
    files: list = field(default_factory=list)
    processed: int = 0
    failed: int = 0
    wall_sec: float = 0.0


def validate_config(config: PipelineConfig, registry: Registry) -> None:
    if not config.input_paths:
        raise ConfigInvalid("no input paths")
    if not config.extractors:
        raise ConfigInvalid("no extractors enabled")
    if config.workers < 1:
        raise ConfigInvalid("workers must be >= 1")
    for ext_id, _ in config.extractors:
        if ext_id not in registry:
            raise ConfigInvalid(
                f"unknown extractor {ext_id!r}; available: {', '.join(registry.ids())}")


def _process_file(path, extractors) -> FileResult:
    result = FileResult(path=str(path), duration_sec=0.0)
    try:
        buf = decode_wav(path)
        buf = resample(buf, CANONICAL_RATE_HZ)
    except (MirkitError, OSError) as exc:
        result.errors.append(("audio-io", f"{type(exc).__name__}: {exc}"))
        return result
    result.duration_sec = buf.duration_sec
    ordered = []
    for order, (ext_id, extractor) in enumerate(extractors):
        try:
            records = extractor.analyze(buf)
            for rec in records:
                rec.validate()
            ordered.extend((order, rec.start_sec, i, rec) for i, rec in enumerate(records))
        except Exception as exc:  # noqa: BLE001 - extractor isolation is the contract
            result.errors.append((ext_id, f"{type(exc).__name__}: {exc}"))
    ordered.sort(key=lambda item: (item[0], item[1], item[2]))
    result.records = [rec for _, _, _, rec in ordered]
    return result


def run_pipeline(config: PipelineConfig, registry: Registry | None = None) -> PipelineReport:
    """Decode each input once and run every enabled extractor on it.

    Per-file and per-extractor failures are recorded, never raised. The
    report is a pure function of (config, file bytes): files appear in
    input order and totals.wall_sec is the audio duration processed, so
    output does not depend on the worker count.
    """
    registry = registry if registry is not None else default_registry()
    validate_config(config, registry)

    def make_extractors():
        return [(ext_id, registry.create(ext_id, params))
                for ext_id, params in config.extractors]

    report = PipelineReport()
    if config.workers == 1:
        extractors = make_extractors()
        results = [_process_file(p, extractors) for p in config.input_paths]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_process_file, p, make_extractors())
                       for p in config.input_paths]
            results = [f.result() for f in futures]
    for res in results:
        report.files.append(res)
        decode_failed = any(ext_id == "audio-io" for ext_id, _ in res.errors)
        if decode_failed:
            report.failed += 1
        else:
            report.processed += 1
        report.wall_sec += res.duration_sec
    return report


# --- serialization: sorted keys, %.6f floats, byte-stable ---

def _write_value(value, out):
    if isinstance(value, bool):
        raise TypeError("booleans are not part of the report schema")
    if isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append("%.6f" % (value + 0.0 if value != 0 else 0.0))
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _write_value(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _write_value(item, out)
        out.append("]")
    else:
        raise TypeError(f"unserializable value: {type(value)}")


def dumps_canonical(value) -> str:
    """JSON text with sorted keys and fixed 6-decimal floats."""
    out = []
    _write_value(value, out)
    return "".join(out)


def _record_to_dict(rec: FeatureRecord) -> dict:
    d = {
        "extractor_id": rec.extractor_id,
        "feature": rec.feature,
        "start_sec": float(rec.start_sec),
        "end_sec": float(rec.end_sec),
        "label": rec.label,
        "confidence": float(rec.confidence),
        "metadata": dict(rec.metadata),
    }
    if rec.latent is not None:
        d["latent"] = [float(v) for v in rec.latent]
    return d


def report_to_dict(report: PipelineReport) -> dict:
    return {
        "files": [
            {
                "path": fr.path,
                "duration_sec": float(fr.duration_sec),
                "records": [_record_to_dict(r) for r in fr.records],
                "errors": [{"extractor_id": e, "message": m} for e, m in fr.errors],
            }
            for fr in report.files
        ],
        "totals": {
            "processed": report.processed,
            "failed": report.failed,
            "wall_sec": float(report.wall_sec),
        },
    }


def serialize_report(report: PipelineReport) -> str:
    return dumps_canonical(report_to_dict(report))


def parse_report(text: str) -> PipelineReport:
    raw = json.loads(text)
    report = PipelineReport(
        processed=raw["totals"]["processed"],
        failed=raw["totals"]["failed"],
        wall_sec=raw["totals"]["wall_sec"],
    )
    for f in raw["files"]:
        fr = FileResult(path=f["path"], duration_sec=f["duration_sec"])
        for r in f["records"]:
            fr.records.append(FeatureRecord(
                extractor_id=r["extractor_id"],
                feature=r["feature"],
                start_sec=r["start_sec"],
                end_sec=r["end_sec"],
                label=r["label"],
                confidence=r["confidence"],
                latent=r.get("latent"),
                metadata=dict(r["metadata"]),
            ))
        fr.errors = [(e["extractor_id"], e["message"]) for e in f["errors"]]
        report.files.append(fr)
    return report


def write_report(report: PipelineReport, path) -> None:
    try:
        Path(path).write_text(serialize_report(report) + "\n")
    except OSError as exc:
        raise OutputUnwritable(f"{path}: {exc}") from exc

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirkit.audio import write_wav
from mirkit.errors import ConfigInvalid, DuplicateId, InvalidRecord
from mirkit.framework import (
    ExtractorDescriptor,
    Extractor,
    FeatureRecord,
    FileResult,
    PipelineConfig,
    PipelineReport,
    Registry,
    default_registry,
    parse_report,
    run_pipeline,
    serialize_report,
)
from mirkit.signals import synth_click_track, synth_key_clip, synth_noise, synth_tone


class StubExtractor(Extractor):
    def __init__(self, descriptor, records=None, error=None):
        self.descriptor = descriptor
        self._records = records or []
        self._error = error

    def analyze(self, buf):
        if self._error:
            raise self._error
        return [FeatureRecord(self.descriptor.id, r["feature"], r["start"], r["end"],
                              r["label"], r["confidence"]) for r in self._records]


def stub_registry(*specs):
    """specs: (id, records|None, error|None)"""
    registry = Registry()
    for ext_id, records, error in specs:
        descriptor = ExtractorDescriptor(ext_id, ("stub",), "builtin", "1")
        registry.register(
            descriptor,
            lambda params, d=descriptor, r=records, e=error: StubExtractor(d, r, e))
    return registry


@pytest.fixture
def corpus(tmp_path):
    paths = []
    for i, buf in enumerate([synth_tone([330.0], 1.0), synth_tone([440.0], 1.0)]):
        p = tmp_path / f"clip{i}.wav"
        write_wav(buf, p)
        paths.append(str(p))
    return paths


class TestRecordValidation:
    def test_valid_record(self):
        FeatureRecord("x", "key", 0.0, 1.0, "C major", 0.5).validate()

    @pytest.mark.parametrize("field,kwargs", [
        ("confidence", dict(confidence=1.7)),
        ("confidence", dict(confidence=-0.1)),
        ("end_sec", dict(start_sec=2.0, end_sec=1.0)),
        ("start_sec", dict(start_sec=-1.0)),
        ("start_sec", dict(start_sec=float("nan"))),
        ("latent", dict(latent=[])),
        ("latent", dict(latent=[float("inf")])),
        ("metadata", dict(metadata={"k": 3})),
    ])
    def test_invalid_fields(self, field, kwargs):
        base = dict(extractor_id="x", feature="key", start_sec=0.0, end_sec=1.0,
                    label="C major", confidence=0.5)
        base.update(kwargs)
        with pytest.raises(InvalidRecord) as err:
            FeatureRecord(**base).validate()
        assert err.value.field == field

    def test_label_or_latent_required(self):
        with pytest.raises(InvalidRecord):
            FeatureRecord("x", "key", 0.0, 1.0, "", 0.5).validate()
        FeatureRecord("x", "emb", 0.0, 1.0, "", 0.5, latent=[0.1, 0.2]).validate()


class TestRegistry:
    def test_register_and_list(self):
        registry = default_registry()
        ids = [d.id for d in registry.list()]
        assert "key-template-v1" in ids
        assert ids == sorted(ids)

    def test_duplicate_id(self):
        registry = default_registry()
        with pytest.raises(DuplicateId):
            registry.register(ExtractorDescriptor("key-template-v1", ("key",)),
                              lambda params: None)

    def test_external_kind_listed(self):
        registry = Registry()
        registry.register(ExtractorDescriptor("plug", ("echo",), "external"),
                          lambda params: None)
        assert registry.list()[0].kind == "external"


class TestRunPipeline:
    def test_failing_extractor_is_isolated(self, corpus):
        registry = stub_registry(
            ("good-a", [dict(feature="f", start=0.0, end=1.0, label="a", confidence=0.5)], None),
            ("bad", None, RuntimeError("boom")),
            ("good-b", [dict(feature="f", start=0.0, end=1.0, label="b", confidence=0.5)], None),
        )
        config = PipelineConfig(corpus, [("good-a", {}), ("bad", {}), ("good-b", {})])
        report = run_pipeline(config, registry)
        assert report.processed == 2
        assert report.failed == 0
        for fr in report.files:
            assert [e for e, _ in fr.errors] == ["bad"]
            assert sorted(r.label for r in fr.records) == ["a", "b"]

        # isolation: the surviving records match a run without the bad extractor
        solo = run_pipeline(PipelineConfig(corpus, [("good-a", {}), ("good-b", {})]),
                            registry)
        for fr_all, fr_solo in zip(report.files, solo.files):
            assert [(r.extractor_id, r.label) for r in fr_all.records] == \
                   [(r.extractor_id, r.label) for r in fr_solo.records]

    def test_empty_extractors_rejected(self, corpus):
        with pytest.raises(ConfigInvalid):
            run_pipeline(PipelineConfig(corpus, []), default_registry())

    def test_unknown_extractor_rejected_fast(self, corpus):
        with pytest.raises(ConfigInvalid) as err:
            run_pipeline(PipelineConfig(corpus, [("nope", {})]), default_registry())
        assert "key-template-v1" in str(err.value)

    def test_unreadable_file_is_reported_not_raised(self, tmp_path, corpus):
        bad = tmp_path / "broken.wav"
        bad.write_bytes(b"not audio at all")
        config = PipelineConfig(corpus + [str(bad)], [("key-template-v1", {})])
        report = run_pipeline(config, default_registry())
        assert report.processed == 2
        assert report.failed == 1
        assert report.files[-1].errors[0][0] == "audio-io"
        assert report.files[-1].records == []

    def test_worker_counts_agree(self, tmp_path):
        paths = []
        for i, buf in enumerate([synth_tone([262.0], 1.0), synth_key_clip(4, "minor", 2.0),
                                 synth_noise(1.0), synth_click_track(120.0, 2.0)[0],
                                 synth_tone([440.0, 660.0], 1.0)]):
            p = tmp_path / f"f{i}.wav"
            write_wav(buf, p)
            paths.append(str(p))
        extractors = [("key-template-v1", {}), ("vocals-heuristic-v1", {})]
        texts = set()
        for workers in (1, 4):
            config = PipelineConfig(paths, extractors, workers=workers)
            texts.add(serialize_report(run_pipeline(config, default_registry())))
        assert len(texts) == 1

    def test_records_ordered_by_extractor_then_time(self, corpus):
        registry = stub_registry(
            ("late", [dict(feature="f", start=5.0, end=6.0, label="late", confidence=0.5)], None),
            ("early", [dict(feature="f", start=0.0, end=1.0, label="early", confidence=0.5)], None),
        )
        config = PipelineConfig(corpus[:1], [("late", {}), ("early", {})])
        report = run_pipeline(config, registry)
        assert [r.label for r in report.files[0].records] == ["late", "early"]

    def test_config_accepts_enabled_extractors_key(self):
        config = PipelineConfig.from_dict({
            "input_paths": ["a.wav"],
            "enabled_extractors": ["key-template-v1",
                                   {"id": "chord-template-v1", "params": {"self_prob": 0.95}}],
        })
        assert config.extractors == [("key-template-v1", {}),
                                     ("chord-template-v1", {"self_prob": 0.95})]

    def test_every_record_in_fuzzed_reports_is_valid(self, tmp_path):
        # random audio through all four extractors: whatever comes out
        # must satisfy the record invariants and the report contract
        rng = np.random.default_rng(99)
        paths = []
        for i in range(4):
            kind = i % 4
            n = int(rng.integers(2050, 22050 * 4))
            if kind == 0:
                x = rng.uniform(-0.9, 0.9, n)
            elif kind == 1:
                t = np.arange(n) / 22050
                x = 0.8 * np.sin(2 * np.pi * rng.uniform(100, 2000) * t)
            elif kind == 2:
                x = np.zeros(n)
            else:
                x = np.clip(rng.standard_normal(n) * rng.uniform(0.001, 0.3), -1, 1)
            from mirkit.audio import AudioBuffer
            p = tmp_path / f"fuzz{i}.wav"
            write_wav(AudioBuffer(x, 22050), p)
            paths.append(str(p))
        extractors = [("key-template-v1", {}), ("chord-template-v1", {}),
                      ("rhythm-dp-v1", {}), ("vocals-heuristic-v1", {})]
        report = run_pipeline(PipelineConfig(paths, extractors), default_registry())
        enabled = {e for e, _ in extractors}
        for fr in report.files:
            failed_here = {e for e, _ in fr.errors}
            for rec in fr.records:
                rec.validate()
                assert rec.extractor_id in enabled
                assert rec.extractor_id not in failed_here


class TestWriteReport:
    def test_unwritable_destination(self, tmp_path):
        from mirkit.errors import OutputUnwritable
        from mirkit.framework import write_report
        target = tmp_path / "dir_not_file"
        target.mkdir()
        with pytest.raises(OutputUnwritable):
            write_report(PipelineReport(), target)


class TestSerialization:
    def test_empty_report_schema(self):
        assert serialize_report(PipelineReport()) == \
            '{"files":[],"totals":{"failed":0,"processed":0,"wall_sec":0.000000}}'

    def test_confidence_six_decimals(self):
        report = PipelineReport(files=[FileResult(
            path="a.wav", duration_sec=1.0,
            records=[FeatureRecord("x", "key", 0.0, 1.0, "C major", 0.5)])],
            processed=1)
        assert '"confidence":0.500000' in serialize_report(report)

    def test_latent_absent_when_none(self):
        report = PipelineReport(files=[FileResult(
            path="a.wav", duration_sec=1.0,
            records=[FeatureRecord("x", "key", 0.0, 1.0, "C major", 0.5)])],
            processed=1)
        assert '"latent"' not in serialize_report(report)

    def test_keys_sorted(self):
        report = PipelineReport(files=[FileResult(path="a.wav", duration_sec=1.0)],
                                processed=1)
        text = serialize_report(report)
        obj = json.loads(text)
        assert list(obj) == ["files", "totals"]
        assert list(obj["files"][0]) == ["duration_sec", "errors", "path", "records"]


def _quantized(lo, hi):
    return st.integers(int(lo * 1e6), int(hi * 1e6)).map(lambda n: n / 1e6)


_record_strategy = st.builds(
    lambda start_us, len_us, conf, label, latent, meta: FeatureRecord(
        "ext-1", "key", start_us / 1e6, (start_us + len_us) / 1e6, label, conf,
        latent=latent, metadata=meta),
    start_us=st.integers(0, 100_000_000),
    len_us=st.integers(0, 10_000_000),
    conf=_quantized(0, 1),
    label=st.text(min_size=1, max_size=8),
    latent=st.one_of(st.none(), st.lists(_quantized(-5, 5), min_size=1, max_size=4)),
    meta=st.dictionaries(st.text(max_size=4), st.text(max_size=6), max_size=3),
)

_report_strategy = st.builds(
    lambda files: PipelineReport(
        files=files, processed=len(files), failed=0,
        wall_sec=round(sum(f.duration_sec for f in files), 6)),
    files=st.lists(
        st.builds(
            lambda path, dur, recs, errs: FileResult(
                path=path, duration_sec=dur, records=recs, errors=errs),
            path=st.text(min_size=1, max_size=12),
            dur=_quantized(0, 300),
            recs=st.lists(_record_strategy, max_size=4),
            errs=st.lists(st.tuples(st.text(min_size=1, max_size=6),
                                    st.text(max_size=20)), max_size=2),
        ),
        max_size=4,
    ),
)


@given(_report_strategy)
@settings(max_examples=60, deadline=None)
def test_serialization_roundtrip(report):
    assert parse_report(serialize_report(report)) == report

import sys
import time
from pathlib import Path

import pytest

from mirkit.audio import write_wav
from mirkit.errors import (
    BrokenPipe,
    DeadHandle,
    HandshakeTimeout,
    PluginBadRecord,
    PluginError,
    ProtocolViolation,
    SpawnFailed,
)
from mirkit.framework import PipelineConfig, default_registry, run_pipeline
from mirkit.plugins import analyze, register_plugin, shutdown, spawn_plugin
from mirkit.signals import synth_tone

FIXTURES = Path(__file__).parent / "plugin_fixtures"
ECHO = [sys.executable, str(FIXTURES / "echo_plugin.py")]


def misbehaving(mode):
    return [sys.executable, str(FIXTURES / "misbehaving_plugins.py"), mode]


@pytest.fixture
def tone_wav(tmp_path):
    p = tmp_path / "tone.wav"
    write_wav(synth_tone([440.0], 1.0), p)
    return str(p)


@pytest.fixture
def echo_handle():
    handle = spawn_plugin(ECHO, timeout_sec=10.0)
    yield handle
    shutdown(handle, grace_sec=2.0)


class TestSpawn:
    def test_echo_handshake(self, echo_handle):
        assert echo_handle.descriptor.id == "echo-plugin"
        assert echo_handle.descriptor.features == ("echo",)
        assert echo_handle.descriptor.kind == "external"
        assert echo_handle.state == "idle"

    def test_missing_executable(self):
        with pytest.raises(SpawnFailed):
            spawn_plugin(["/nonexistent/binary"], timeout_sec=2.0)

    def test_garbage_first_line(self):
        with pytest.raises(ProtocolViolation) as err:
            spawn_plugin(misbehaving("garbage"), timeout_sec=10.0)
        assert "not json" in str(err.value)

    def test_never_replies(self):
        started = time.monotonic()
        with pytest.raises(HandshakeTimeout):
            spawn_plugin(misbehaving("silent"), timeout_sec=1.0)
        assert time.monotonic() - started < 5.0

    def test_wrong_first_message(self):
        with pytest.raises(ProtocolViolation):
            spawn_plugin(misbehaving("wrong-first"), timeout_sec=10.0)

    def test_version_mismatch_rejected(self):
        with pytest.raises(ProtocolViolation):
            spawn_plugin(misbehaving("bad-version"), timeout_sec=10.0)


class TestAnalyze:
    def test_echo_record(self, echo_handle, tone_wav):
        records = analyze(echo_handle, tone_wav, 22050, {"x": "1"})
        assert len(records) == 1
        rec = records[0]
        assert rec.label == "echo"
        assert rec.extractor_id == "echo-plugin"
        assert rec.start_sec == 0.0
        assert rec.end_sec == pytest.approx(1.0)
        assert echo_handle.state == "idle"

    def test_bad_record_names_field(self, tone_wav):
        handle = spawn_plugin(misbehaving("bad-record"), timeout_sec=10.0)
        try:
            with pytest.raises(PluginBadRecord) as err:
                analyze(handle, tone_wav, 22050)
            assert err.value.field == "confidence"
        finally:
            shutdown(handle, grace_sec=2.0)

    def test_wrong_id_is_violation(self, tone_wav):
        handle = spawn_plugin(misbehaving("wrong-id"), timeout_sec=10.0)
        with pytest.raises(ProtocolViolation):
            analyze(handle, tone_wav, 22050)
        assert handle.state == "dead"

    def test_plugin_error_reply(self, tone_wav):
        handle = spawn_plugin(misbehaving("error-reply"), timeout_sec=10.0)
        try:
            with pytest.raises(PluginError) as err:
                analyze(handle, tone_wav, 22050)
            assert "deliberate failure" in str(err.value)
            # handle survives a clean error reply
            assert handle.state == "idle"
        finally:
            shutdown(handle, grace_sec=2.0)

    def test_missing_file_reported_by_plugin(self, echo_handle):
        with pytest.raises(PluginError) as err:
            analyze(echo_handle, "/no/such/file.wav", 22050)
        assert "/no/such/file.wav" in str(err.value)

    def test_crash_mid_request_then_dead(self, tone_wav):
        handle = spawn_plugin(misbehaving("crash-mid"), timeout_sec=10.0)
        with pytest.raises(BrokenPipe):
            analyze(handle, tone_wav, 22050)
        assert handle.state == "dead"
        with pytest.raises(DeadHandle):
            analyze(handle, tone_wav, 22050)

    def test_timeout_kills_handle(self, tone_wav):
        handle = spawn_plugin(misbehaving("slow-analyze"), timeout_sec=1.0)
        from mirkit.errors import PluginTimeout
        with pytest.raises(PluginTimeout):
            analyze(handle, tone_wav, 22050)
        assert handle.state == "dead"


class TestShutdown:
    def test_idempotent(self):
        handle = spawn_plugin(ECHO, timeout_sec=10.0)
        shutdown(handle, grace_sec=2.0)
        assert handle.state == "dead"
        shutdown(handle, grace_sec=2.0)  # no-op
        assert handle.state == "dead"

    def test_force_kill_on_ignore(self):
        handle = spawn_plugin(misbehaving("ignore-shutdown"), timeout_sec=10.0)
        started = time.monotonic()
        shutdown(handle, grace_sec=1.0)
        assert time.monotonic() - started < 6.0
        assert handle.state == "dead"
        assert handle.process.poll() is not None


class TestPipelineIntegration:
    def test_plugin_runs_inside_pipeline(self, tmp_path, tone_wav):
        registry = default_registry()
        handle = spawn_plugin(ECHO, timeout_sec=10.0)
        try:
            register_plugin(registry, handle)
            config = PipelineConfig([tone_wav], [("echo-plugin", {}),
                                                 ("key-template-v1", {})])
            report = run_pipeline(config, registry)
            assert report.processed == 1
            features = {r.feature for r in report.files[0].records}
            assert features == {"echo", "key"}
        finally:
            shutdown(handle, grace_sec=2.0)

    def test_dead_plugin_surfaces_as_file_error(self, tone_wav):
        registry = default_registry()
        handle = spawn_plugin(misbehaving("crash-mid"), timeout_sec=5.0)
        register_plugin(registry, handle)
        config = PipelineConfig([tone_wav], [("misbehaving", {}),
                                             ("key-template-v1", {})])
        report = run_pipeline(config, registry)
        assert report.processed == 1
        fr = report.files[0]
        assert [e for e, _ in fr.errors] == ["misbehaving"]
        assert {r.feature for r in fr.records} == {"key"}

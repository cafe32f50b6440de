"""Host side of the external-extractor protocol.

Wire format: one JSON object per line over the plugin's stdin/stdout
(stderr passes through to the host's). Protocol version 1:

  host -> plugin   {"type": "hello", "version": 1}
  plugin -> host   {"type": "capabilities", "version": 1,
                    "features": [...], "id_prefix": "..."}
  host -> plugin   {"type": "analyze", "id": n, "audio_path": "...",
                    "sample_rate": 22050, "params": {...}}
  plugin -> host   {"type": "result", "id": n, "records": [...]} |
                   {"type": "error", "id": n, "message": "..."}
  host -> plugin   {"type": "shutdown"}

Audio is handed over by file path, never inline. Every analyze id is
answered exactly once; anything else is a protocol violation. A handle
is single-request-at-a-time and goes dead permanently on timeout or a
broken pipe.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass, field

from .errors import (
    BrokenPipe,
    DeadHandle,
    HandshakeTimeout,
    InvalidRecord,
    PluginBadRecord,
    PluginError,
    PluginTimeout,
    ProtocolViolation,
    SpawnFailed,
)
from .framework import ExtractorDescriptor, Extractor, FeatureRecord

PROTOCOL_VERSION = 1

_EOF = object()


@dataclass
class PluginHandle:
    descriptor: ExtractorDescriptor
    command: list
    process: subprocess.Popen = field(repr=False)
    lines: queue.Queue = field(repr=False)
    timeout_sec: float = 60.0
    state: str = "idle"  # idle | busy | dead
    _next_id: int = 1
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _reader(stream, out: queue.Queue):
    for line in stream:
        out.put(line)
    out.put(_EOF)


def _kill(handle: PluginHandle):
    handle.state = "dead"
    if handle.process.poll() is None:
        handle.process.kill()
        try:
            handle.process.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            pass


def _send(handle: PluginHandle, message: dict):
    try:
        handle.process.stdin.write(json.dumps(message) + "\n")
        handle.process.stdin.flush()
    except (BrokenPipeError, OSError) as exc:
        _kill(handle)
        raise BrokenPipe(f"plugin stdin closed: {exc}") from exc


def _next_line(handle: PluginHandle, timeout: float) -> str:
    try:
        line = handle.lines.get(timeout=timeout)
    except queue.Empty:
        _kill(handle)
        raise PluginTimeout(f"no reply within {timeout} s") from None
    if line is _EOF:
        _kill(handle)
        raise BrokenPipe("plugin closed its stdout")
    return line


def _next_message(handle: PluginHandle, timeout: float) -> dict:
    line = _next_line(handle, timeout)
    try:
        message = json.loads(line)
    except json.JSONDecodeError:
        _kill(handle)
        raise ProtocolViolation(f"not a JSON object: {line.strip()!r}") from None
    if not isinstance(message, dict) or "type" not in message:
        _kill(handle)
        raise ProtocolViolation(f"message without a type: {line.strip()!r}")
    return message


def spawn_plugin(command, timeout_sec: float = 60.0) -> PluginHandle:
    """Launch a plugin, run the hello/capabilities handshake, build its descriptor.

    The first message on the plugin's stdout must be a capabilities reply
    carrying protocol version 1, a non-empty feature list, and an
    id_prefix that becomes the registry id.
    """
    command = list(command)
    try:
        process = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=None, text=True, bufsize=1,
        )
    except OSError as exc:
        raise SpawnFailed(f"{command}: {exc}") from exc
    lines = queue.Queue()
    threading.Thread(target=_reader, args=(process.stdout, lines), daemon=True).start()
    handle = PluginHandle(
        descriptor=ExtractorDescriptor("pending", ("pending",), "external"),
        command=command, process=process, lines=lines, timeout_sec=timeout_sec,
    )
    try:
        _send(handle, {"type": "hello", "version": PROTOCOL_VERSION})
        try:
            message = _next_message(handle, timeout_sec)
        except PluginTimeout as exc:
            raise HandshakeTimeout(str(exc)) from None
        if message.get("type") != "capabilities":
            _kill(handle)
            raise ProtocolViolation(f"first message must be capabilities, got {message!r}")
        if message.get("version") != PROTOCOL_VERSION:
            _kill(handle)
            raise ProtocolViolation(f"unsupported protocol version {message.get('version')!r}")
        features = message.get("features") or []
        prefix = message.get("id_prefix") or ""
        if not features or not prefix:
            _kill(handle)
            raise ProtocolViolation("capabilities needs features and id_prefix")
        handle.descriptor = ExtractorDescriptor(
            id=str(prefix), features=tuple(str(f) for f in features),
            kind="external", version=str(message.get("plugin_version", "1")),
        )
        return handle
    except Exception:
        if handle.state != "dead":
            _kill(handle)
        raise


def _parse_record(raw: dict, extractor_id: str) -> FeatureRecord:
    if not isinstance(raw, dict):
        raise PluginBadRecord("record", "record must be a JSON object")
    record = FeatureRecord(
        extractor_id=extractor_id,
        feature=raw.get("feature", ""),
        start_sec=raw.get("start_sec", -1.0),
        end_sec=raw.get("end_sec", -1.0),
        label=raw.get("label", ""),
        confidence=raw.get("confidence", -1.0),
        latent=raw.get("latent"),
        metadata=raw.get("metadata", {}),
    )
    try:
        record.validate()
    except InvalidRecord as exc:
        raise PluginBadRecord(exc.field) from None
    return record


def analyze(handle: PluginHandle, audio_path, sample_rate_hz: int,
            params: dict | None = None) -> list:
    """Forward one analysis request; returns validated FeatureRecords.

    The reply must carry the request's id. Plugin-reported errors raise
    PluginError; invalid records raise PluginBadRecord naming the field;
    timeouts and broken pipes kill the handle for good.
    """
    with handle._lock:
        if handle.state == "dead":
            raise DeadHandle(" ".join(handle.command))
        if handle.state == "busy":
            raise ProtocolViolation("handle is busy with another request")
        handle.state = "busy"
        request_id = handle._next_id
        handle._next_id += 1
        try:
            _send(handle, {
                "type": "analyze", "id": request_id, "audio_path": str(audio_path),
                "sample_rate": int(sample_rate_hz), "params": dict(params or {}),
            })
            message = _next_message(handle, handle.timeout_sec)
            if message.get("id") != request_id:
                _kill(handle)
                raise ProtocolViolation(
                    f"reply id {message.get('id')!r} does not match request {request_id}")
            if message.get("type") == "error":
                raise PluginError(str(message.get("message", "unspecified plugin error")))
            if message.get("type") != "result":
                _kill(handle)
                raise ProtocolViolation(f"expected result, got {message.get('type')!r}")
            records_raw = message.get("records")
            if not isinstance(records_raw, list):
                _kill(handle)
                raise ProtocolViolation("result without a records array")
            return [_parse_record(r, handle.descriptor.id) for r in records_raw]
        finally:
            if handle.state == "busy":
                handle.state = "idle"


def shutdown(handle: PluginHandle, grace_sec: float = 5.0) -> None:
    """Ask the plugin to exit; force-kill after the grace period. Idempotent."""
    with handle._lock:
        if handle.state == "dead":
            return
        try:
            _send(handle, {"type": "shutdown"})
        except BrokenPipe:
            return  # already gone
        try:
            handle.process.wait(timeout=grace_sec)
        except subprocess.TimeoutExpired:
            pass
        _kill(handle)


class ExternalExtractor(Extractor):
    """Adapter running a plugin handle inside the pipeline.

    Requests are serialized per handle; the pipeline may run other
    extractors concurrently. The plugin reads the original file itself.
    """

    def __init__(self, handle: PluginHandle, params: dict | None = None):
        self.handle = handle
        self.descriptor = handle.descriptor
        self.params = dict(params or {})

    def analyze(self, buf) -> list:
        if buf.source_path is None:
            raise PluginError("external extractors need a file-backed buffer")
        return analyze(self.handle, buf.source_path, buf.sample_rate_hz, self.params)


def register_plugin(registry, handle: PluginHandle) -> str:
    """Register a live plugin handle as an external extractor."""
    return registry.register(handle.descriptor,
                             lambda params, h=handle: ExternalExtractor(h, params))

"""Command-line interface: extract, eval, catalog, and plugins subcommands.

Exit codes: 0 success, 1 partial failures present in a report,
2 usage or configuration errors. Machine-readable output goes to
stdout, human logs to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

from . import plugins as bridge
from .audio import CANONICAL_RATE_HZ, write_wav
from .errors import ConfigInvalid, MirkitError, OutputUnwritable
from .evaluation import (
    catalog_query,
    evaluate_report,
    load_annotations_dir,
    serialize_scores,
)
from .framework import (
    PipelineConfig,
    default_registry,
    parse_report,
    run_pipeline,
    serialize_report,
    write_report,
)
from .signals import synth_tone

DEFAULT_PLUGIN_REGISTRY = "./mirkit-plugins.json"


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_plugin_registry(path) -> list:
    p = Path(path)
    if not p.exists():
        return []
    return json.loads(p.read_text()).get("plugins", [])


def _save_plugin_registry(path, entries) -> None:
    Path(path).write_text(json.dumps({"plugins": entries}, indent=2, sort_keys=True) + "\n")


def _registry_with_plugins(registry_path, timeout_sec=60.0):
    """Default registry plus any plugins recorded in the registry file."""
    registry = default_registry()
    handles = []
    for entry in _load_plugin_registry(registry_path):
        handle = bridge.spawn_plugin(entry["command"], timeout_sec=timeout_sec)
        bridge.register_plugin(registry, handle)
        handles.append(handle)
    return registry, handles


def cmd_extract(args) -> int:
    config_raw = {}
    if args.config:
        config_raw = json.loads(Path(args.config).read_text())
    if args.input:
        config_raw["input_paths"] = args.input
    if args.extractors:
        config_raw["extractors"] = args.extractors
    if args.output:
        config_raw["output_path"] = args.output
    if args.workers:
        config_raw["workers"] = args.workers
    config = PipelineConfig.from_dict(config_raw)

    registry, handles = _registry_with_plugins(args.registry)
    try:
        started = time.perf_counter()
        try:
            report = run_pipeline(config, registry)
        except ConfigInvalid as exc:
            _log(f"config error: {exc}")
            return 2
        elapsed = time.perf_counter() - started
        for fr in report.files:
            status = "FAILED" if any(e == "audio-io" for e, _ in fr.errors) else "ok"
            _log(f"{fr.path}: {status}, {len(fr.records)} records, "
                 f"{len(fr.errors)} errors")
        _log(f"{report.processed} processed, {report.failed} failed "
             f"in {elapsed:.2f} s")
        text = serialize_report(report)
        if config.output_path:
            try:
                write_report(report, config.output_path)
            except OutputUnwritable as exc:
                _log(str(exc))
                return 2
        else:
            print(text)
        has_errors = report.failed > 0 or any(fr.errors for fr in report.files)
        return 1 if has_errors else 0
    finally:
        for handle in handles:
            bridge.shutdown(handle)


def cmd_eval(args) -> int:
    report = parse_report(Path(args.report).read_text())
    annotations = load_annotations_dir(args.annotations)
    try:
        scores = evaluate_report(report, annotations)
    except MirkitError as exc:
        _log(f"evaluation error: {exc}")
        return 2
    text = serialize_scores(scores)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    for metric, value in sorted(scores["aggregate"].items()):
        _log(f"{metric}: {value:.4f}")
    return 0


def cmd_catalog(args) -> int:
    entries = catalog_query(args.task) if args.task else [
        e for task in ("key", "chord", "tempo-beat", "instrument", "mood")
        for e in catalog_query(task)
    ]
    if args.format == "json":
        print(json.dumps([{
            "task": e.task, "approach": e.approach, "dataset": e.dataset,
            "metric_name": e.metric_name, "value": e.value,
            "source_table": e.source_table, "detail": e.detail,
        } for e in entries], indent=2, sort_keys=True))
    else:
        width = max((len(e.approach) for e in entries), default=10)
        for e in entries:
            print(f"{e.task:<11} {e.approach:<{width}} {e.dataset:<40} "
                  f"{e.metric_name:<10} {e.value:g}")
    return 0


def _conformance_test(command, timeout_sec: float) -> bool:
    """Handshake + one analyze on a synthetic tone; prints pass/fail per rule."""
    ok = True

    def check(rule: str, passed: bool, detail: str = ""):
        nonlocal ok
        ok = ok and passed
        suffix = f" ({detail})" if detail and not passed else ""
        print(f"{'PASS' if passed else 'FAIL'}: {rule}{suffix}")

    handle = None
    try:
        handle = bridge.spawn_plugin(command, timeout_sec=timeout_sec)
        check("handshake: capabilities reply with version 1", True)
        check("handshake: non-empty features and id_prefix", bool(handle.descriptor.features))
    except MirkitError as exc:
        check("handshake: capabilities reply with version 1", False, str(exc))
        return False
    try:
        with tempfile.TemporaryDirectory() as tmp:
            tone = synth_tone([440.0], 1.0, CANONICAL_RATE_HZ)
            wav_path = str(Path(tmp) / "conformance-tone.wav")
            write_wav(tone, wav_path)
            try:
                records = bridge.analyze(handle, wav_path, CANONICAL_RATE_HZ, {})
                check("analyze: result with matching id", True)
                check("analyze: records validate", True)
                check("analyze: at least one record", len(records) > 0)
            except MirkitError as exc:
                check("analyze: result with matching id", False, str(exc))
        bridge.shutdown(handle)
        check("shutdown: process exits", handle.process.poll() is not None)
    finally:
        if handle is not None:
            bridge.shutdown(handle)
    return ok


def cmd_plugins(args) -> int:
    if args.plugin_action == "register":
        try:
            handle = bridge.spawn_plugin(args.command, timeout_sec=args.timeout)
        except MirkitError as exc:
            _log(f"plugin rejected: {exc}")
            return 2
        descriptor = handle.descriptor
        bridge.shutdown(handle)
        entries = [e for e in _load_plugin_registry(args.registry)
                   if e.get("id") != descriptor.id]
        entries.append({
            "id": descriptor.id,
            "features": list(descriptor.features),
            "command": list(args.command),
            "version": descriptor.version,
        })
        _save_plugin_registry(args.registry, entries)
        _log(f"registered {descriptor.id} ({', '.join(descriptor.features)})")
        return 0
    if args.plugin_action == "list":
        builtin = default_registry()
        for descriptor in builtin.list():
            print(f"{descriptor.id:<24} {descriptor.kind:<8} "
                  f"{','.join(descriptor.features)}")
        for entry in _load_plugin_registry(args.registry):
            print(f"{entry['id']:<24} external {','.join(entry['features'])}")
        return 0
    if args.plugin_action == "test":
        return 0 if _conformance_test(args.command, args.timeout) else 1
    _log("unknown plugins action")
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirkit",
                                     description="music feature extraction toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_extract = sub.add_parser("extract", help="run the extraction pipeline")
    p_extract.add_argument("--config", help="pipeline config JSON (flags override)")
    p_extract.add_argument("--input", nargs="+", help="input WAV files")
    p_extract.add_argument("--extractors", nargs="+", help="extractor ids to enable")
    p_extract.add_argument("--output", help="report JSON destination")
    p_extract.add_argument("--workers", type=int, help="parallel file workers")
    p_extract.add_argument("--registry", default=DEFAULT_PLUGIN_REGISTRY,
                           help="plugin registry JSON path")
    p_extract.set_defaults(func=cmd_extract)

    p_eval = sub.add_parser("eval", help="score a report against annotations")
    p_eval.add_argument("--report", required=True)
    p_eval.add_argument("--annotations", required=True, help="directory of JSON annotations")
    p_eval.add_argument("--output", help="score table destination (stdout otherwise)")
    p_eval.set_defaults(func=cmd_eval)

    p_catalog = sub.add_parser("catalog", help="show benchmark candidates per task")
    p_catalog.add_argument("--task", choices=["key", "chord", "tempo-beat",
                                              "instrument", "mood"])
    p_catalog.add_argument("--format", choices=["table", "json"], default="table")
    p_catalog.set_defaults(func=cmd_catalog)

    p_plugins = sub.add_parser("plugins", help="manage external extractor plugins")
    plugin_sub = p_plugins.add_subparsers(dest="plugin_action", required=True)
    p_register = plugin_sub.add_parser("register")
    p_register.add_argument("--command", nargs="+", required=True)
    p_register.add_argument("--registry", default=DEFAULT_PLUGIN_REGISTRY)
    p_register.add_argument("--timeout", type=float, default=60.0)
    p_register.set_defaults(func=cmd_plugins)
    p_list = plugin_sub.add_parser("list")
    p_list.add_argument("--registry", default=DEFAULT_PLUGIN_REGISTRY)
    p_list.set_defaults(func=cmd_plugins)
    p_test = plugin_sub.add_parser("test")
    p_test.add_argument("--command", nargs="+", required=True)
    p_test.add_argument("--timeout", type=float, default=30.0)
    p_test.set_defaults(func=cmd_plugins)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        _log(f"config error: {exc}")
        return 2
    except FileNotFoundError as exc:
        _log(f"not found: {exc}")
        return 2
    except MirkitError as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Secondary acceptance: the external reference plugin against the core.

Skipped cleanly when the plugin has not been built (primary suite must
pass without it); run `npm run build` in refplugin/ to enable.
"""

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from mirkit.audio import decode_wav, write_wav
from mirkit.cli import main
from mirkit.dsp import chromagram, logfreq_spectrogram, stft
from mirkit.harmony import detect_key
from mirkit.plugins import analyze, shutdown, spawn_plugin
from mirkit.signals import synth_key_clip

PLUGIN_MAIN = Path(__file__).parent.parent / "refplugin" / "dist" / "src" / "main.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not PLUGIN_MAIN.exists(),
    reason="reference plugin not built (run npm run build in refplugin/)",
)


def plugin_command():
    return ["node", str(PLUGIN_MAIN)]


@pytest.fixture(scope="module")
def key_suite_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("secondary_keys")
    files = []
    for tonic in range(12):
        for mode in ("major", "minor"):
            path = root / f"key_{tonic:02d}_{mode}.wav"
            write_wav(synth_key_clip(tonic, mode, duration_sec=8.0), path)
            files.append((str(path), tonic, mode))
    return files


def test_passes_cli_conformance(capsys):
    code = main(["plugins", "test", "--command", *plugin_command()])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "FAIL" not in out
    print("PASS: reference plugin passes `plugins test` conformance")


def test_key_alt_agreement_with_core(key_suite_files):
    handle = spawn_plugin(plugin_command(), timeout_sec=30.0)
    try:
        agree = 0
        disagreements = []
        for path, tonic, mode in key_suite_files:
            records = analyze(handle, path, 22050, {})
            by_feature = {r.feature: r for r in records}
            alt_label = by_feature["key-alt"].label

            buf = decode_wav(path)
            core_label, _, scores = detect_key(chromagram(logfreq_spectrogram(stft(buf))))
            if alt_label == core_label.text():
                agree += 1
            else:
                core_margin = sorted(scores)[-1] - sorted(scores)[-2]
                alt_margin = float(by_feature["key-alt"].metadata["margin"])
                disagreements.append((path, alt_label, core_label.text(),
                                      core_margin, alt_margin))
        assert agree >= 23, f"agreement {agree}/24: {disagreements}"
        # any disagreement must be a near-tie on both sides
        for _, _, _, core_margin, alt_margin in disagreements:
            assert core_margin < 0.02
            assert alt_margin < 0.02
        print(f"PASS: key-alt agrees with core on {agree}/24 key-suite files")
    finally:
        shutdown(handle, grace_sec=3.0)


def test_vocals_gender_stub(key_suite_files, tmp_path):
    handle = spawn_plugin(plugin_command(), timeout_sec=30.0)
    try:
        path, _, _ = key_suite_files[0]
        records = analyze(handle, path, 22050, {})
        gender = [r for r in records if r.feature == "vocals-gender"]
        assert len(gender) == 1
        assert gender[0].label == "unknown"
        assert gender[0].confidence == 0.0
        print("PASS: vocals-gender stub returns unknown with confidence 0")
    finally:
        shutdown(handle, grace_sec=3.0)


def test_registered_via_cli_and_used_in_extract(tmp_path, key_suite_files):
    registry = tmp_path / "plugins.json"
    code = main(["plugins", "register", "--registry", str(registry),
                 "--command", *plugin_command()])
    assert code == 0
    out = tmp_path / "report.json"
    path, _, _ = key_suite_files[0]
    code = main(["extract", "--input", path, "--extractors", "refplugin",
                 "--output", str(out), "--registry", str(registry)])
    assert code == 0
    from mirkit.framework import parse_report
    report = parse_report(out.read_text())
    features = {r.feature for r in report.files[0].records}
    assert features == {"key-alt", "vocals-gender"}

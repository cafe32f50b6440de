"""The subprocess plugin protocol, from both sides.

Writes a tiny conforming plugin to disk, spawns it through the host
bridge, runs one analysis, and shuts it down. Any language that can
read and write JSON lines can do what this plugin does.
"""

import sys
import tempfile
from pathlib import Path

from mirkit.audio import write_wav
from mirkit.plugins import analyze, shutdown, spawn_plugin
from mirkit.signals import synth_tone

TINY_PLUGIN = '''\
import json, sys

def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\\n")
    sys.stdout.flush()

for line in sys.stdin:
    msg = json.loads(line)
    if msg["type"] == "hello":
        if msg.get("version") != 1:
            emit({"type": "error", "id": 0, "message": "wrong version"})
            sys.exit(1)
        emit({"type": "capabilities", "version": 1,
              "features": ["loudness"], "id_prefix": "demo-loudness"})
    elif msg["type"] == "analyze":
        emit({"type": "result", "id": msg["id"], "records": [{
            "feature": "loudness", "start_sec": 0.0, "end_sec": 1.0,
            "label": "quiet", "confidence": 0.75, "metadata": {}}]})
    elif msg["type"] == "shutdown":
        break
'''

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    plugin_path = tmp / "tiny_plugin.py"
    plugin_path.write_text(TINY_PLUGIN)
    wav_path = tmp / "tone.wav"
    write_wav(synth_tone([440.0], 1.0), wav_path)

    handle = spawn_plugin([sys.executable, str(plugin_path)], timeout_sec=10.0)
    print(f"handshake ok: id={handle.descriptor.id} features={handle.descriptor.features}")

    records = analyze(handle, str(wav_path), 22050, {"gain": "1.0"})
    for rec in records:
        print(f"record: feature={rec.feature} label={rec.label} "
              f"confidence={rec.confidence}")

    shutdown(handle)
    print(f"plugin state after shutdown: {handle.state}")

print("\nthe reference plugin under refplugin/ serves key-alt and vocals-gender;")
print("build it with `npm run build` and try:")
print("  mirkit plugins test --command node refplugin/dist/src/main.js")

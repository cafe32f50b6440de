#!/usr/bin/env python3
"""Well-behaved fixture plugin: one 'echo' record spanning the whole file."""
import json
import sys
import wave


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def duration_of(path):
    try:
        with wave.open(path, "rb") as w:
            return w.getnframes() / w.getframerate()
    except (OSError, wave.Error):
        return None


def main():
    for line in sys.stdin:
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "hello":
            if msg.get("version") != 1:
                emit({"type": "error", "id": 0,
                      "message": f"unsupported version {msg.get('version')}"})
                sys.exit(1)
            emit({"type": "capabilities", "version": 1,
                  "features": ["echo"], "id_prefix": "echo-plugin"})
        elif kind == "analyze":
            duration = duration_of(msg["audio_path"])
            if duration is None:
                emit({"type": "error", "id": msg["id"],
                      "message": f"cannot read {msg['audio_path']}"})
                continue
            emit({"type": "result", "id": msg["id"], "records": [{
                "feature": "echo", "start_sec": 0.0, "end_sec": duration,
                "label": "echo", "confidence": 1.0,
                "metadata": {"params": json.dumps(msg.get("params", {}), sort_keys=True)},
            }]})
        elif kind == "shutdown":
            return


if __name__ == "__main__":
    main()

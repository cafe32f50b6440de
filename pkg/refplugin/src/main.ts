#!/usr/bin/env node
/**
 * Reference external extractor speaking wire protocol v1 over stdio.
 *
 * Serves two features per analyze request:
 *   key-alt        independent chromagram key estimate (own WAV reader,
 *                  Goertzel chroma, Krumhansl-Kessler correlation)
 *   vocals-gender  stub that always answers "unknown" with confidence 0
 *
 * Malformed host input never crashes the loop: the plugin replies with
 * an error message and keeps serving. A hello with any version other
 * than 1 gets an error reply and a non-zero exit.
 */

import * as fs from "fs";
import * as readline from "readline";

import { estimateKey, meanChroma } from "./chroma";
import { decodeWav } from "./wav";

const PROTOCOL_VERSION = 1;

function emit(message: unknown): void {
  process.stdout.write(JSON.stringify(message) + "\n");
}

function analyzeFile(path: string) {
  const bytes = fs.readFileSync(path);
  const audio = decodeWav(bytes);
  const durationSec = audio.samples.length / audio.sampleRateHz;
  const chroma = meanChroma(audio.samples, audio.sampleRateHz);
  const key = estimateKey(chroma);
  return [
    {
      feature: "key-alt",
      start_sec: 0.0,
      end_sec: durationSec,
      label: key.label,
      confidence: key.confidence,
      metadata: { margin: key.margin.toFixed(6) },
    },
    {
      feature: "vocals-gender",
      start_sec: 0.0,
      end_sec: durationSec,
      label: "unknown",
      confidence: 0.0,
      metadata: {},
    },
  ];
}

function main(): void {
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    let message: any;
    try {
      message = JSON.parse(line);
    } catch {
      emit({ type: "error", id: 0, message: `unparseable message: ${line.slice(0, 80)}` });
      return;
    }
    const id = typeof message.id === "number" ? message.id : 0;
    switch (message.type) {
      case "hello":
        if (message.version !== PROTOCOL_VERSION) {
          emit({ type: "error", id, message: `unsupported protocol version ${message.version}` });
          process.exit(1);
        }
        emit({
          type: "capabilities",
          version: PROTOCOL_VERSION,
          features: ["key-alt", "vocals-gender"],
          id_prefix: "refplugin",
        });
        break;
      case "analyze": {
        if (typeof message.audio_path !== "string") {
          emit({ type: "error", id, message: "analyze without audio_path" });
          return;
        }
        try {
          emit({ type: "result", id, records: analyzeFile(message.audio_path) });
        } catch (err) {
          emit({ type: "error", id, message: `cannot analyze ${message.audio_path}: ${err}` });
        }
        break;
      }
      case "shutdown":
        process.exit(0);
        break;
      default:
        emit({ type: "error", id, message: `unknown message type ${message.type}` });
    }
  });
  rl.on("close", () => process.exit(0));
}

main();

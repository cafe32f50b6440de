/**
 * Minimal RIFF/WAVE reader: PCM 16/24/32-bit integer and 32-bit float,
 * mono or stereo (downmixed by per-sample mean).
 */

export interface AudioData {
  samples: Float64Array;
  sampleRateHz: number;
}

export class WavError extends Error {}

export function decodeWav(bytes: Buffer): AudioData {
  if (bytes.length < 12 || bytes.toString("ascii", 0, 4) !== "RIFF" ||
      bytes.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE file");
  }
  let fmt: { format: number; channels: number; rate: number; bits: number } | null = null;
  let data: Buffer | null = null;
  let pos = 12;
  while (pos + 8 <= bytes.length) {
    const id = bytes.toString("ascii", pos, pos + 4);
    const size = bytes.readUInt32LE(pos + 4);
    const body = bytes.subarray(pos + 8, pos + 8 + size);
    if (body.length < size) {
      throw new WavError(`chunk ${id} truncated`);
    }
    if (id === "fmt " && fmt === null) {
      if (size < 16) throw new WavError("fmt chunk too short");
      let format = body.readUInt16LE(0);
      if (format === 0xfffe && size >= 26) {
        format = body.readUInt16LE(24); // extensible: first GUID bytes
      }
      fmt = {
        format,
        channels: body.readUInt16LE(2),
        rate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (id === "data" && data === null) {
      data = body;
    }
    pos += 8 + size + (size & 1);
  }
  if (fmt === null || data === null) throw new WavError("missing fmt or data chunk");
  if (fmt.format !== 1 && fmt.format !== 3) {
    throw new WavError(`unsupported format tag 0x${fmt.format.toString(16)}`);
  }
  if (fmt.channels !== 1 && fmt.channels !== 2) {
    throw new WavError(`${fmt.channels} channels unsupported`);
  }

  let raw: Float64Array;
  if (fmt.format === 3) {
    if (fmt.bits !== 32) throw new WavError(`${fmt.bits}-bit float unsupported`);
    const n = Math.floor(data.length / 4);
    raw = new Float64Array(n);
    for (let i = 0; i < n; i++) raw[i] = data.readFloatLE(i * 4);
  } else if (fmt.bits === 16) {
    const n = Math.floor(data.length / 2);
    raw = new Float64Array(n);
    for (let i = 0; i < n; i++) raw[i] = data.readInt16LE(i * 2) / 32768;
  } else if (fmt.bits === 24) {
    const n = Math.floor(data.length / 3);
    raw = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      let v = data[i * 3] | (data[i * 3 + 1] << 8) | (data[i * 3 + 2] << 16);
      if (v >= 1 << 23) v -= 1 << 24;
      raw[i] = v / 8388608;
    }
  } else if (fmt.bits === 32) {
    const n = Math.floor(data.length / 4);
    raw = new Float64Array(n);
    for (let i = 0; i < n; i++) raw[i] = data.readInt32LE(i * 4) / 2147483648;
  } else {
    throw new WavError(`${fmt.bits}-bit PCM unsupported`);
  }

  let samples = raw;
  if (fmt.channels === 2) {
    const n = Math.floor(raw.length / 2);
    samples = new Float64Array(n);
    for (let i = 0; i < n; i++) samples[i] = (raw[2 * i] + raw[2 * i + 1]) / 2;
  }
  return { samples, sampleRateHz: fmt.rate };
}

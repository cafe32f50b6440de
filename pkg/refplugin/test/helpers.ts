/** Shared test helpers: in-memory tone synthesis and WAV encoding. */

export function synthTone(freqs: number[], durationSec: number,
                          sampleRateHz = 22050): Float64Array {
  const n = Math.round(durationSec * sampleRateHz);
  const x = new Float64Array(n);
  for (const f of freqs) {
    for (let i = 0; i < n; i++) {
      x[i] += Math.sin((2 * Math.PI * f * i) / sampleRateHz);
    }
  }
  let peak = 0;
  for (let i = 0; i < n; i++) peak = Math.max(peak, Math.abs(x[i]));
  if (peak > 0) {
    for (let i = 0; i < n; i++) x[i] *= 0.9 / peak;
  }
  return x;
}

/**
 * Scale plus tonic triad cadence, proportioned like the host's key
 * suite: two scale octaves (60% of the clip), a sustained tonic triad
 * (25%), and a closing tonic octave (15%) so the tonal center dominates.
 */
export function synthKeyClip(tonic: number, mode: "major" | "minor",
                             durationSec = 6.0, sampleRateHz = 22050): Float64Array {
  const degrees = mode === "major" ? [0, 2, 4, 5, 7, 9, 11] : [0, 2, 3, 5, 7, 8, 10];
  const triad = mode === "major" ? [0, 4, 7] : [0, 3, 7];
  const baseMidi = 48 + tonic;
  const pitch = (m: number) => 440 * Math.pow(2, (m - 69) / 12);

  const events: { freqs: number[]; seconds: number }[] = [];
  const scaleNotes: number[] = [];
  for (const d of degrees) scaleNotes.push(baseMidi + d);
  for (const d of degrees) scaleNotes.push(baseMidi + 12 + d);
  scaleNotes.push(baseMidi + 24);
  const noteSec = (0.6 * durationSec) / scaleNotes.length;
  for (const m of scaleNotes) events.push({ freqs: [pitch(m)], seconds: noteSec });
  events.push({
    freqs: triad.map((i) => pitch(baseMidi + i)).concat([pitch(baseMidi + 12)]),
    seconds: 0.25 * durationSec,
  });
  events.push({
    freqs: [pitch(baseMidi), pitch(baseMidi + 12)],
    seconds: 0.15 * durationSec,
  });

  const n = Math.round(durationSec * sampleRateHz);
  const x = new Float64Array(n);
  let cursor = 0;
  for (const event of events) {
    const start = Math.round(cursor * sampleRateHz);
    const end = Math.min(n, Math.round((cursor + event.seconds) * sampleRateHz));
    for (const f of event.freqs) {
      for (let i = start; i < end; i++) {
        x[i] += Math.sin((2 * Math.PI * f * (i - start)) / sampleRateHz) / event.freqs.length;
      }
    }
    cursor += event.seconds;
  }
  let peak = 0;
  for (let i = 0; i < n; i++) peak = Math.max(peak, Math.abs(x[i]));
  if (peak > 0) {
    for (let i = 0; i < n; i++) x[i] *= 0.9 / peak;
  }
  return x;
}

export function encodeWav16(samples: Float64Array, sampleRateHz = 22050,
                            channels = 1): Buffer {
  const payload = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    const v = Math.max(-1, Math.min(1, samples[i]));
    payload.writeInt16LE(Math.max(-32768, Math.min(32767, Math.round(v * 32768))), i * 2);
  }
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + payload.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20);
  header.writeUInt16LE(channels, 22);
  header.writeUInt32LE(sampleRateHz, 24);
  header.writeUInt32LE(sampleRateHz * 2 * channels, 28);
  header.writeUInt16LE(2 * channels, 32);
  header.writeUInt16LE(16, 34);
  header.write("data", 36, "ascii");
  header.writeUInt32LE(payload.length, 40);
  return Buffer.concat([header, payload]);
}

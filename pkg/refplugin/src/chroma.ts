/**
 * Independent chromagram + key estimate.
 *
 * Deliberately a different signal path from any host implementation:
 * per-frame Goertzel filters at 72 log-spaced frequencies (C2 upward,
 * A4 = 440 Hz), energies folded into 12 pitch classes, then Pearson
 * correlation of the mean chroma against the 24 rotations of the
 * Krumhansl-Kessler tone-hierarchy profiles.
 */

export const PITCH_CLASS_NAMES =
  ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

const KK_MAJOR = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
const KK_MINOR = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

const C2_HZ = 440 * Math.pow(2, (36 - 69) / 12);
const N_BINS = 72;

export interface KeyEstimate {
  label: string;
  tonic: number;
  mode: "major" | "minor";
  confidence: number;
  margin: number;
}

/** Power of one frequency in one frame via the Goertzel recurrence. */
function goertzelPower(x: Float64Array, start: number, len: number,
                       freqHz: number, sampleRateHz: number): number {
  const w = (2 * Math.PI * freqHz) / sampleRateHz;
  const coeff = 2 * Math.cos(w);
  let s0 = 0, s1 = 0, s2 = 0;
  const end = Math.min(start + len, x.length);
  for (let i = start; i < end; i++) {
    s0 = x[i] + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - coeff * s1 * s2;
}

export function meanChroma(samples: Float64Array, sampleRateHz: number,
                           frameLen = 4096, hop = 2048): number[] {
  const chroma = new Array(12).fill(0);
  const freqs: number[] = [];
  for (let k = 0; k < N_BINS; k++) freqs.push(C2_HZ * Math.pow(2, k / 12));
  const nyquist = sampleRateHz / 2;
  let frames = 0;
  for (let start = 0; start + frameLen <= samples.length || start === 0; start += hop) {
    const len = Math.min(frameLen, samples.length - start);
    if (len < frameLen / 4) break;
    for (let k = 0; k < N_BINS; k++) {
      if (freqs[k] >= nyquist) break;
      chroma[k % 12] += goertzelPower(samples, start, len, freqs[k], sampleRateHz);
    }
    frames += 1;
    if (start + hop >= samples.length) break;
  }
  if (frames > 0) {
    for (let p = 0; p < 12; p++) chroma[p] /= frames;
  }
  return chroma;
}

function pearson(a: number[], b: number[]): number {
  const n = a.length;
  const ma = a.reduce((s, v) => s + v, 0) / n;
  const mb = b.reduce((s, v) => s + v, 0) / n;
  let num = 0, da = 0, db = 0;
  for (let i = 0; i < n; i++) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) ** 2;
    db += (b[i] - mb) ** 2;
  }
  const denom = Math.sqrt(da * db);
  return denom === 0 ? 0 : num / denom;
}

function rotate(profile: number[], tonic: number): number[] {
  const out = new Array(12);
  for (let i = 0; i < 12; i++) out[(i + tonic) % 12] = profile[i];
  return out;
}

export function estimateKey(chroma: number[]): KeyEstimate {
  const candidates: { score: number; tonic: number; mode: "major" | "minor" }[] = [];
  for (let tonic = 0; tonic < 12; tonic++) {
    candidates.push({ score: pearson(chroma, rotate(KK_MAJOR, tonic)), tonic, mode: "major" });
    candidates.push({ score: pearson(chroma, rotate(KK_MINOR, tonic)), tonic, mode: "minor" });
  }
  // ties: lower tonic first, then major before minor
  candidates.sort((a, b) =>
    b.score - a.score || a.tonic - b.tonic ||
    (a.mode === "major" ? -1 : 1) - (b.mode === "major" ? -1 : 1));
  const best = candidates[0];
  const margin = best.score - candidates[1].score;
  const confidence = Math.min(1, Math.max(0, margin / 2 + 0.5));
  return {
    label: `${PITCH_CLASS_NAMES[best.tonic]} ${best.mode}`,
    tonic: best.tonic,
    mode: best.mode,
    confidence,
    margin,
  };
}

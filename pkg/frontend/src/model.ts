/**
 * Tiny feed-forward classifier loaded from a JSON checkpoint.
 *
 * The checkpoint carries one hidden layer over k-mer count features:
 * probs = softmax(W2 relu(W1 x + b1) + b2). Inference is plain float64
 * arithmetic, so repeated calls on the same input are bit-identical.
 */

import { readFileSync } from "node:fs";

import type { Modality } from "./protocol.js";

export interface Checkpoint {
  format: string;
  modality: Modality;
  classes: string[];
  k: number;
  w1: number[][]; // hidden x features
  b1: number[];
  w2: number[][]; // classes x hidden
  b2: number[];
  generation?: { length: number };
}

const BASE_CODE: Record<string, number> = { A: 0, C: 1, G: 2, T: 3 };

export function kmerFeatures(seq: string, k: number): Float64Array {
  const dim = 4 ** k;
  const counts = new Float64Array(dim);
  const upper = seq.toUpperCase();
  let idx = 0;
  let run = 0;
  const mask = dim - 1; // 4**k is a power of 4, so this is the 2k-bit mask
  let total = 0;
  for (const ch of upper) {
    const code = BASE_CODE[ch];
    if (code === undefined) {
      // N or stray characters break the current window, as in the tokenizer
      run = 0;
      idx = 0;
      continue;
    }
    idx = ((idx << 2) | code) & mask;
    run = Math.min(run + 1, k);
    if (run === k) {
      counts[idx]! += 1;
      total += 1;
    }
  }
  if (total > 0) {
    for (let i = 0; i < dim; i++) counts[i]! /= total;
  }
  return counts;
}

/** Bag of lowercased word hashes folded into the same feature width. */
export function textFeatures(text: string, k: number): Float64Array {
  const dim = 4 ** k;
  const counts = new Float64Array(dim);
  const words = text.toLowerCase().split(/\s+/).filter((w) => w.length > 0);
  for (const word of words) {
    let h = 2166136261 >>> 0;
    for (let i = 0; i < word.length; i++) {
      h = Math.imul(h ^ word.charCodeAt(i), 16777619) >>> 0;
    }
    counts[h % dim]! += 1;
  }
  if (words.length > 0) {
    for (let i = 0; i < dim; i++) counts[i]! /= words.length;
  }
  return counts;
}

function matVec(w: number[][], x: ArrayLike<number>, b: number[]): Float64Array {
  const out = new Float64Array(w.length);
  for (let r = 0; r < w.length; r++) {
    const row = w[r]!;
    let acc = b[r]!;
    for (let c = 0; c < row.length; c++) {
      acc += row[c]! * (x[c] ?? 0);
    }
    out[r] = acc;
  }
  return out;
}

export function softmax(logits: Float64Array): number[] {
  let max = -Infinity;
  for (const v of logits) max = Math.max(max, v);
  const exps = Array.from(logits, (v) => Math.exp(v - max));
  const sum = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / sum);
}

export class TinyModel {
  constructor(readonly ckpt: Checkpoint) {}

  get classes(): string[] {
    return this.ckpt.classes;
  }

  get modality(): Modality {
    return this.ckpt.modality;
  }

  features(input: string): Float64Array {
    return this.ckpt.modality === "sequence"
      ? kmerFeatures(input, this.ckpt.k)
      : textFeatures(input, this.ckpt.k);
  }

  predictOne(input: string): number[] {
    const x = this.features(input);
    const h = matVec(this.ckpt.w1, x, this.ckpt.b1);
    for (let i = 0; i < h.length; i++) h[i] = Math.max(0, h[i]!);
    return softmax(matVec(this.ckpt.w2, h, this.ckpt.b2));
  }

  predict(inputs: string[]): number[][] {
    return inputs.map((s) => this.predictOne(s));
  }
}

function expectMatrix(m: unknown, rows: number, cols: number, name: string): number[][] {
  if (!Array.isArray(m) || m.length !== rows) {
    throw new Error(`checkpoint ${name} must have ${rows} rows`);
  }
  for (const row of m) {
    if (!Array.isArray(row) || row.length !== cols || !row.every((v) => Number.isFinite(v))) {
      throw new Error(`checkpoint ${name} rows must be ${cols} finite numbers`);
    }
  }
  return m as number[][];
}

export function loadCheckpoint(path: string): TinyModel {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new Error(`cannot load checkpoint ${path}: ${(err as Error).message}`);
  }
  const c = raw as Partial<Checkpoint>;
  if (c.format !== "tiny-mlp-v1") {
    throw new Error(`unknown checkpoint format ${String(c.format)}`);
  }
  if (c.modality !== "sequence" && c.modality !== "text") {
    throw new Error("checkpoint modality must be sequence or text");
  }
  if (!Array.isArray(c.classes) || c.classes.length < 2 || !c.classes.every((s) => typeof s === "string" && s)) {
    throw new Error("checkpoint needs at least two class names");
  }
  if (typeof c.k !== "number" || !Number.isInteger(c.k) || c.k < 1 || c.k > 6) {
    throw new Error("checkpoint k must be an integer in 1..6");
  }
  const features = 4 ** c.k;
  const hidden = Array.isArray(c.b1) ? c.b1.length : 0;
  if (hidden < 1) throw new Error("checkpoint b1 must be a non-empty vector");
  expectMatrix(c.w1, hidden, features, "w1");
  expectMatrix(c.w2, c.classes.length, hidden, "w2");
  if (!Array.isArray(c.b2) || c.b2.length !== c.classes.length) {
    throw new Error("checkpoint b2 length must match classes");
  }
  if (c.generation !== undefined) {
    const len = c.generation?.length;
    if (typeof len !== "number" || !Number.isInteger(len) || len < 1) {
      throw new Error("checkpoint generation.length must be a positive integer");
    }
  }
  return new TinyModel(c as Checkpoint);
}

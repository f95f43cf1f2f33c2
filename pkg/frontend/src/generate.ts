/**
 * Deterministic sequence sampler: output depends only on (prompt, index),
 * never on call order or clock, so repeated GENERATE requests agree.
 */

const ALPHABET = "ACGT";

function fnv1a(text: string): number {
  let h = 2166136261 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h = Math.imul(h ^ text.charCodeAt(i), 16777619) >>> 0;
  }
  return h;
}

/** splitmix-style scrambler over 32-bit state */
function scramble(x: number): number {
  x = (x + 0x9e3779b9) >>> 0;
  x = Math.imul(x ^ (x >>> 16), 0x21f0aaad) >>> 0;
  x = Math.imul(x ^ (x >>> 15), 0x735a2d97) >>> 0;
  return (x ^ (x >>> 15)) >>> 0;
}

export function generateOne(prompt: string, index: number, length: number): string {
  const seedBase = scramble(fnv1a(prompt) ^ Math.imul(index + 1, 0x85ebca6b));
  const out: string[] = [];
  for (let pos = 0; pos < length; pos++) {
    const r = scramble(seedBase ^ Math.imul(pos + 1, 0xc2b2ae35));
    out.push(ALPHABET[r & 3]!);
  }
  return out.join("");
}

export function generate(prompt: string, n: number, length: number): string[] {
  const samples: string[] = [];
  for (let i = 0; i < n; i++) {
    samples.push(generateOne(prompt, i, length));
  }
  return samples;
}

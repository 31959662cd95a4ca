/**
 * Deterministic stub encoder/classifier.
 *
 * Token counts are hashed (FNV-1a) into a fixed-size feature vector,
 * square-root damped, L2-normalized, and projected through a seed-derived
 * Gaussian matrix; a linear head on top produces per-label logits. Only
 * the head trains (full-batch sigmoid cross-entropy), with an experience
 * buffer so sequential updates converge toward a joint fit. Everything is
 * a pure function of (seed, inputs).
 */

const TOKEN_RE = /[a-z0-9]+/g;

export function fnv1a(data: Uint8Array): number {
  let h = 0x811c9dc5;
  for (const byte of data) {
    h ^= byte;
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/** Small deterministic PRNG (mulberry32). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianPairs(next: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const value = spare;
      spare = null;
      return value;
    }
    let u = 0;
    let v = 0;
    do {
      u = next();
    } while (u <= 1e-12);
    v = next();
    const radius = Math.sqrt(-2.0 * Math.log(u));
    spare = radius * Math.sin(2 * Math.PI * v);
    return radius * Math.cos(2 * Math.PI * v);
  };
}

export interface StubOptions {
  seed?: number;
  dim?: number;
  hashDim?: number;
  lr?: number;
  stepsPerUpdate?: number;
  frozen?: boolean;
}

export interface Sample {
  text: string;
  labels: string[];
}

export class StubModel {
  readonly labels: string[];
  readonly seed: number;
  readonly dim: number;
  readonly hashDim: number;
  readonly lr: number;
  readonly stepsPerUpdate: number;
  frozen: boolean;
  version = 0;

  private projection: Float64Array; // hashDim * dim, row-major
  private weights: Float64Array; // dim * L
  private bias: Float64Array; // L
  private labelIndex = new Map<string, number>();
  private buffer: Sample[] = [];
  private encoder = new TextEncoder();

  constructor(labels: string[], options: StubOptions = {}) {
    if (labels.length === 0) throw new Error("label vocabulary is empty");
    this.labels = [...labels];
    this.seed = options.seed ?? 0;
    this.dim = options.dim ?? 256;
    this.hashDim = options.hashDim ?? 8192;
    this.lr = options.lr ?? 5.0;
    this.stepsPerUpdate = options.stepsPerUpdate ?? 50;
    this.frozen = options.frozen ?? false;
    labels.forEach((label, i) => this.labelIndex.set(label, i));

    const gauss = gaussianPairs(mulberry32(this.seed));
    const scale = 1.0 / Math.sqrt(this.dim);
    this.projection = new Float64Array(this.hashDim * this.dim);
    for (let i = 0; i < this.projection.length; i++) {
      this.projection[i] = gauss() * scale;
    }
    this.weights = new Float64Array(this.dim * labels.length);
    this.bias = new Float64Array(labels.length);
  }

  private hashCounts(text: string): Map<number, number> {
    const counts = new Map<number, number>();
    for (const match of text.toLowerCase().matchAll(TOKEN_RE)) {
      const slot = fnv1a(this.encoder.encode(match[0])) % this.hashDim;
      counts.set(slot, (counts.get(slot) ?? 0) + 1);
    }
    return counts;
  }

  embed(text: string): Float64Array {
    const counts = this.hashCounts(text);
    let squared = 0;
    const damped: Array<[number, number]> = [];
    for (const [slot, count] of counts) {
      const value = Math.sqrt(count);
      damped.push([slot, value]);
      squared += value * value;
    }
    const norm = Math.sqrt(squared);
    const out = new Float64Array(this.dim);
    if (norm === 0) return out;
    for (const [slot, value] of damped) {
      const weight = value / norm;
      const base = slot * this.dim;
      for (let d = 0; d < this.dim; d++) {
        out[d] += weight * this.projection[base + d];
      }
    }
    return out;
  }

  logits(emb: Float64Array): Float64Array {
    const L = this.labels.length;
    const out = new Float64Array(L);
    for (let l = 0; l < L; l++) {
      let acc = this.bias[l];
      for (let d = 0; d < this.dim; d++) {
        acc += emb[d] * this.weights[d * L + l];
      }
      out[l] = acc;
    }
    return out;
  }

  encode(texts: string[]): { embeddings: Float32Array; logits: Float32Array } {
    const L = this.labels.length;
    const embeddings = new Float32Array(texts.length * this.dim);
    const logitRows = new Float32Array(texts.length * L);
    texts.forEach((text, i) => {
      const emb = this.embed(text);
      embeddings.set(Float32Array.from(emb), i * this.dim);
      logitRows.set(Float32Array.from(this.logits(emb)), i * L);
    });
    return { embeddings, logits: logitRows };
  }

  predict(texts: string[]): number[][] {
    return texts.map((text) => {
      const z = this.logits(this.embed(text));
      return Array.from(z, (value) => 1 / (1 + Math.exp(-Math.max(-30, Math.min(30, value)))));
    });
  }

  private train(samples: Sample[], steps: number): void {
    const n = samples.length;
    const L = this.labels.length;
    const embs = samples.map((s) => this.embed(s.text));
    const targets = new Float64Array(n * L);
    samples.forEach((sample, i) => {
      for (const label of sample.labels) {
        const index = this.labelIndex.get(label);
        if (index === undefined) throw new Error(`label ${label} outside the vocabulary`);
        targets[i * L + index] = 1;
      }
    });
    for (let step = 0; step < steps; step++) {
      const gradW = new Float64Array(this.dim * L);
      const gradB = new Float64Array(L);
      for (let i = 0; i < n; i++) {
        const z = this.logits(embs[i]);
        for (let l = 0; l < L; l++) {
          const p = 1 / (1 + Math.exp(-Math.max(-30, Math.min(30, z[l]))));
          const g = p - targets[i * L + l];
          gradB[l] += g;
          const emb = embs[i];
          for (let d = 0; d < this.dim; d++) {
            gradW[d * L + l] += emb[d] * g;
          }
        }
      }
      for (let j = 0; j < gradW.length; j++) {
        this.weights[j] -= (this.lr * gradW[j]) / n;
      }
      for (let l = 0; l < L; l++) {
        this.bias[l] -= (this.lr * gradB[l]) / n;
      }
    }
  }

  /** Pretrain the head on gold-labeled source documents (stays version 0). */
  fitSource(samples: Sample[], steps: number): void {
    if (samples.length > 0) this.train(samples, steps);
  }

  update(samples: Sample[]): number {
    if (!this.frozen && samples.length > 0) {
      this.buffer.push(...samples);
      this.train(this.buffer, this.stepsPerUpdate);
    }
    this.version += 1;
    return this.version;
  }

  info(): Record<string, unknown> {
    return {
      model: "driftforge-bridge-stub",
      labels: [...this.labels],
      dim: this.dim,
      n_labels: this.labels.length,
      version: this.version,
      protocol: 1,
      pooling: "hashed-count random projection",
    };
  }
}

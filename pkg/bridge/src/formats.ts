/**
 * Binary matrix files shared with the pipeline.
 *
 * Layout (all integers little-endian):
 *   magic     6 ASCII bytes ("DFEMB1" embeddings, "DFLGT1" logits)
 *   n, d      u32 row and column counts
 *   payload   n*d float32, row-major
 *   id table  n entries of (u32 byte length, UTF-8 bytes), row-aligned
 */

import { readFileSync, writeFileSync } from "node:fs";

export const EMBEDDING_MAGIC = "DFEMB1";
export const LOGIT_MAGIC = "DFLGT1";

export interface Matrix {
  ids: string[];
  rows: Float32Array; // n * d, row-major
  n: number;
  d: number;
}

export function encodeMatrix(magic: string, ids: string[], rows: Float32Array, d: number): Buffer {
  const n = ids.length;
  if (rows.length !== n * d) {
    throw new Error(`payload length ${rows.length} != n*d = ${n * d}`);
  }
  for (const v of rows) {
    if (!Number.isFinite(v)) throw new Error("matrix contains non-finite values");
  }
  const idBytes = ids.map((id) => Buffer.from(id, "utf-8"));
  const idTableSize = idBytes.reduce((acc, b) => acc + 4 + b.length, 0);
  const buffer = Buffer.alloc(6 + 8 + 4 * n * d + idTableSize);
  buffer.write(magic, 0, "ascii");
  buffer.writeUInt32LE(n, 6);
  buffer.writeUInt32LE(d, 10);
  let offset = 14;
  for (const v of rows) {
    buffer.writeFloatLE(v, offset);
    offset += 4;
  }
  for (const raw of idBytes) {
    buffer.writeUInt32LE(raw.length, offset);
    offset += 4;
    raw.copy(buffer, offset);
    offset += raw.length;
  }
  return buffer;
}

export function decodeMatrix(magic: string, buffer: Buffer): Matrix {
  if (buffer.length < 14) throw new Error("truncated header");
  const found = buffer.toString("ascii", 0, 6);
  if (found !== magic) throw new Error(`bad magic ${found}, expected ${magic}`);
  const n = buffer.readUInt32LE(6);
  const d = buffer.readUInt32LE(10);
  let offset = 14;
  if (buffer.length < offset + 4 * n * d) throw new Error("truncated payload");
  const rows = new Float32Array(n * d);
  for (let i = 0; i < n * d; i++) {
    rows[i] = buffer.readFloatLE(offset);
    offset += 4;
  }
  const ids: string[] = [];
  for (let i = 0; i < n; i++) {
    if (buffer.length < offset + 4) throw new Error(`truncated id length ${i}`);
    const length = buffer.readUInt32LE(offset);
    offset += 4;
    if (buffer.length < offset + length) throw new Error(`truncated id ${i}`);
    ids.push(buffer.toString("utf-8", offset, offset + length));
    offset += length;
  }
  if (offset !== buffer.length) throw new Error("trailing bytes after id table");
  return { ids, rows, n, d };
}

export function writeMatrixFile(path: string, magic: string, ids: string[], rows: Float32Array, d: number): void {
  writeFileSync(path, encodeMatrix(magic, ids, rows, d));
}

export function readMatrixFile(path: string, magic: string): Matrix {
  return decodeMatrix(magic, readFileSync(path));
}

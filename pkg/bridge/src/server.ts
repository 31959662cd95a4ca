/**
 * Trainer bridge server: answers encode/update/predict/info requests over
 * stdio (default) or a local TCP socket, one JSON object per line, exactly
 * one request in flight. Embeddings and logits are written as binary
 * sidecar files and returned by path. Malformed requests produce
 * {"ok": false, ...} and the session continues.
 *
 *   node dist/server.js --labels labels.json [--seed 7] [--dim 256]
 *        [--fit source.jsonl --fit-steps 200] [--frozen] [--port 8791]
 */

import { mkdirSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { createInterface } from "node:readline";

import { EMBEDDING_MAGIC, LOGIT_MAGIC, encodeMatrix } from "./formats.js";
import { parseBatchFile, requestSchema, type Reply } from "./protocol.js";
import { StubModel, type Sample } from "./stub.js";

export interface ServerOptions {
  labels: string[];
  seed?: number;
  dim?: number;
  stepsPerUpdate?: number;
  frozen?: boolean;
  fitCorpus?: Sample[];
  fitSteps?: number;
}

export class BridgeSession {
  readonly model: StubModel;
  private scratch: string;
  private counter = 0;

  constructor(options: ServerOptions) {
    this.model = new StubModel(options.labels, {
      seed: options.seed,
      dim: options.dim,
      stepsPerUpdate: options.stepsPerUpdate,
      frozen: options.frozen,
    });
    if (options.fitCorpus && options.fitCorpus.length > 0) {
      this.model.fitSource(options.fitCorpus, options.fitSteps ?? 200);
    }
    this.scratch = mkdtempSync(join(tmpdir(), "driftforge-bridge-"));
  }

  handle(rawLine: string): Reply {
    let parsed: unknown;
    try {
      parsed = JSON.parse(rawLine);
    } catch {
      return { ok: false, error: "request is not valid JSON" };
    }
    const request = requestSchema.safeParse(parsed);
    if (!request.success) {
      return { ok: false, error: `bad request: ${request.error.issues[0]?.message}` };
    }
    try {
      switch (request.data.op) {
        case "info":
          return { ok: true, ...this.model.info() };
        case "encode": {
          const { docs, out_dir } = request.data;
          const dir = out_dir ?? this.scratch;
          mkdirSync(dir, { recursive: true });
          this.counter += 1;
          const ids = docs.map((d) => d.id);
          const { embeddings, logits } = this.model.encode(docs.map((d) => d.text));
          const embPath = join(dir, `encode${this.counter}.dfemb`);
          const logitPath = join(dir, `encode${this.counter}.dflgt`);
          writeFileSync(embPath, encodeMatrix(EMBEDDING_MAGIC, ids, embeddings, this.model.dim));
          writeFileSync(
            logitPath,
            encodeMatrix(LOGIT_MAGIC, ids, logits, this.model.labels.length)
          );
          return { ok: true, embeddings: embPath, logits: logitPath, version: this.model.version };
        }
        case "update": {
          const samples = parseBatchFile(readFileSync(request.data.batch_path, "utf-8"));
          const version = this.model.update(
            samples.map((s) => ({ text: s.text, labels: s.labels }))
          );
          return { ok: true, version };
        }
        case "predict": {
          const { docs } = request.data;
          const probs = this.model.predict(docs.map((d) => d.text));
          return {
            ok: true,
            version: this.model.version,
            predictions: docs.map((doc, i) => ({ id: doc.id, probs: probs[i] })),
          };
        }
      }
    } catch (error) {
      return { ok: false, error: `${(error as Error).message}` };
    }
  }
}

export function loadCorpusJsonl(path: string): Sample[] {
  const samples: Sample[] = [];
  for (const raw of readFileSync(path, "utf-8").split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const record = JSON.parse(line);
    if ("_meta" in record) continue;
    samples.push({ text: record.text, labels: record.labels });
  }
  return samples;
}

function parseArgs(argv: string[]): Map<string, string | boolean> {
  const args = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      args.set(key, argv[++i]);
    } else {
      args.set(key, true);
    }
  }
  return args;
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const labelsPath = args.get("labels");
  if (typeof labelsPath !== "string") {
    process.stderr.write("usage: server --labels labels.json [--seed N] [--dim N] [--fit corpus.jsonl] [--port N]\n");
    process.exit(1);
  }
  const session = new BridgeSession({
    labels: JSON.parse(readFileSync(labelsPath, "utf-8")),
    seed: args.has("seed") ? Number(args.get("seed")) : 0,
    dim: args.has("dim") ? Number(args.get("dim")) : 256,
    stepsPerUpdate: args.has("steps-per-update") ? Number(args.get("steps-per-update")) : 50,
    frozen: args.get("frozen") === true,
    fitCorpus: typeof args.get("fit") === "string" ? loadCorpusJsonl(args.get("fit") as string) : undefined,
    fitSteps: args.has("fit-steps") ? Number(args.get("fit-steps")) : 200,
  });

  if (args.has("port")) {
    const port = Number(args.get("port"));
    const server = createServer((socket) => {
      const lines = createInterface({ input: socket });
      lines.on("line", (line) => {
        if (line.trim()) socket.write(JSON.stringify(session.handle(line)) + "\n");
      });
    });
    server.listen(port, "127.0.0.1");
    return;
  }

  const lines = createInterface({ input: process.stdin });
  lines.on("line", (line) => {
    if (line.trim()) process.stdout.write(JSON.stringify(session.handle(line)) + "\n");
  });
}

const invokedDirectly =
  process.argv[1]?.endsWith("server.js") || process.argv[1]?.endsWith("server.ts");
if (invokedDirectly) main();

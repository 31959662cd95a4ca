import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { createServer, type Server } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterEach, describe, expect, it } from "vitest";

import {
  buildPrompt,
  entitiesToLexiconJson,
  generateLexicon,
  mergeEntities,
  parseLexiconReply,
} from "../src/genlexicon.js";

function chatReply(content: unknown): string {
  return JSON.stringify({
    choices: [{ message: { content: JSON.stringify(content) } }],
  });
}

let server: Server | null = null;

function mockEndpoint(handler: (body: string, hits: number) => string): Promise<string> {
  let hits = 0;
  return new Promise((resolve) => {
    server = createServer((req, res) => {
      let body = "";
      req.on("data", (chunk) => (body += chunk));
      req.on("end", () => {
        hits += 1;
        res.setHeader("content-type", "application/json");
        res.end(handler(body, hits));
      });
    });
    server.listen(0, "127.0.0.1", () => {
      const addr = server!.address() as { port: number };
      resolve(`http://127.0.0.1:${addr.port}/v1/chat/completions`);
    });
  });
}

afterEach(() => {
  server?.close();
  server = null;
});

describe("prompt and schema", () => {
  it("prompt embeds dataset name, labels, and text", () => {
    const prompt = buildPrompt("cs-abstracts", ["cs.LG", "cs.CV"], "a document");
    expect(prompt).toContain("dataset: cs-abstracts");
    expect(prompt).toContain("cs.LG\ncs.CV");
    expect(prompt.trim().endsWith("a document")).toBe(true);
    expect(prompt).toContain("EXACTLY this structure");
  });

  it("accepts exactly the required shape and nothing else", () => {
    const good = '{"entities": [{"term": "x", "synonyms": ["y"]}]}';
    expect(parseLexiconReply(good)).toEqual([{ term: "x", synonyms: ["y"] }]);
    expect(() => parseLexiconReply('{"entities": [], "extra": 1}')).toThrow();
    expect(() =>
      parseLexiconReply('{"entities": [{"term": "x", "synonyms": ["y"], "note": "z"}]}')
    ).toThrow();
    expect(() => parseLexiconReply('{"entities": [{"term": "x"}]}')).toThrow();
  });
});

describe("generation", () => {
  it("valid mocked reply produces a lexicon the primary can ingest", async () => {
    const endpoint = await mockEndpoint(() =>
      chatReply({
        entities: [{ term: "neural network", synonyms: ["connectionist model"] }],
      })
    );
    const entities = await generateLexicon(
      [{ id: "d1", text: "a paper on neural networks" }],
      ["cs.LG"],
      "cs-abstracts",
      { endpoint }
    );
    const dir = mkdtempSync(join(tmpdir(), "genlex-"));
    const path = join(dir, "lexicon.json");
    writeFileSync(path, entitiesToLexiconJson(entities));
    const loaded = execFileSync(
      "python3",
      [
        "-c",
        "import sys, json; from driftforge.lexicon import load_lexicon;" +
          "lex = load_lexicon(sys.argv[1]);" +
          "print(json.dumps({c.preferred: list(c.synonyms) for c in lex.concepts.values()}))",
        path,
      ],
      { encoding: "utf-8" }
    );
    expect(JSON.parse(loaded)).toEqual({ "neural network": ["connectionist model"] });
  });

  it("empty document list produces an empty entities file", async () => {
    const entities = await generateLexicon([], ["L"], "x", { endpoint: "http://unused" });
    expect(entities).toEqual([]);
    expect(JSON.parse(entitiesToLexiconJson(entities))).toEqual({ concepts: [] });
  });

  it("schema violation retries once then fails with the raw reply saved", async () => {
    const endpoint = await mockEndpoint(() =>
      chatReply({ entities: [], comment: "sorry, extra key" })
    );
    const dir = mkdtempSync(join(tmpdir(), "genlex-fail-"));
    const rawPath = join(dir, "raw.txt");
    await expect(
      generateLexicon(
        [{ id: "d1", text: "t" }],
        ["L"],
        "x",
        { endpoint },
        rawPath
      )
    ).rejects.toThrow(/schema validation twice/);
    expect(existsSync(rawPath)).toBe(true);
    expect(readFileSync(rawPath, "utf-8")).toContain("extra key");
  });

  it("bad first reply is retried and the second accepted", async () => {
    const endpoint = await mockEndpoint((_body, hits) =>
      hits === 1
        ? chatReply({ wrong: true })
        : chatReply({ entities: [{ term: "alpha", synonyms: [] }] })
    );
    const entities = await generateLexicon(
      [{ id: "d1", text: "t" }],
      ["L"],
      "x",
      { endpoint }
    );
    expect(entities).toEqual([{ term: "alpha", synonyms: [] }]);
  });

  it("ten-document run merges to the per-document union", async () => {
    const endpoint = await mockEndpoint((body) => {
      const prompt = JSON.parse(body).messages[0].content as string;
      const doc = prompt.slice(prompt.lastIndexOf("doc-"));
      const index = Number(doc.replace("doc-", ""));
      return chatReply({
        entities: [
          { term: "shared term", synonyms: [`variant ${index % 3}`] },
          { term: `unique ${index}`, synonyms: [] },
        ],
      });
    });
    const docs = Array.from({ length: 10 }, (_, i) => ({ id: `d${i}`, text: `doc-${i}` }));
    const entities = await generateLexicon(docs, ["L"], "x", { endpoint });
    const shared = entities.find((e) => e.term === "shared term");
    expect(shared?.synonyms.sort()).toEqual(["variant 0", "variant 1", "variant 2"]);
    expect(entities).toHaveLength(11); // union: 1 shared + 10 unique
    // oracle: union of all mocked replies
    expect(mergeEntities([[{ term: "a", synonyms: ["x"] }], [{ term: "A", synonyms: ["y"] }]]))
      .toEqual([{ term: "a", synonyms: ["x", "y"] }]);
  });
});

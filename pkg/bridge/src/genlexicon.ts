/**
 * Terminology lexicon generation through an LLM endpoint.
 *
 * For every document, posts the lexicon-building prompt (document text
 * plus the full label set) to an OpenAI-compatible chat endpoint and
 * expects a single JSON object {"entities": [{"term", "synonyms"}]} with
 * no extra keys. Replies are validated strictly; one retry per document,
 * after which the raw reply is saved next to the output and the run
 * fails. Per-document entity lists are merged by normalized term and the
 * result is written in the pipeline's lexicon JSON schema.
 *
 *   node dist/genlexicon.js --docs docs.jsonl --labels labels.json \
 *        --dataset cs-abstracts --out lexicon.json [--endpoint URL]
 *
 * The endpoint defaults to $LLM_ENDPOINT; $LLM_API_KEY, when set, is sent
 * as a bearer token.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { z } from "zod";

const entitySchema = z
  .object({ term: z.string(), synonyms: z.array(z.string()) })
  .strict();
const lexiconReplySchema = z.object({ entities: z.array(entitySchema) }).strict();

export type Entity = z.infer<typeof entitySchema>;

export const PROMPT_TEMPLATE = `You are helping to build a terminology lexicon for a multi-label
text classification task on the dataset: {dataset_name}.
You will receive:
- One document text.
- The full list of possible labels for this dataset.
Your tasks:
1. Read the document text carefully.
2. Choose 3-10 words or short phrases ("terms") that are especially
informative for deciding which labels to assign from the given label set.
These terms should:
- Be specific to the subject or content of the document, not generic words
like "data", "paper", "regulation", "method", "result", etc.
- Strongly indicate one or more labels when they appear.

2. For each selected term, generate:
- "synonyms": close paraphrases, especially earlier phrasings that could appear in older literature or legal/technical writing, preferred terms if applicable,
You MUST return a SINGLE JSON object with EXACTLY this structure:
{
"entities": [
{
"term": "...",
"synonyms": ["...", "..."]
}
]
}
No extra keys. No comments. No explanations outside JSON.
--------------------
DATASET NAME: {dataset_name}
FULL LABEL SET:
{label_block}
--------------------
DOCUMENT TEXT:
{text}`;

export function buildPrompt(datasetName: string, labels: string[], text: string): string {
  return PROMPT_TEMPLATE.replace(/\{dataset_name\}/g, datasetName)
    .replace("{label_block}", labels.join("\n"))
    .replace("{text}", text);
}

export function normalizeTerm(term: string): string {
  return term
    .normalize("NFC")
    .toLowerCase()
    .replace(/^[\W_]+|[\W_]+$/g, "")
    .split(/\s+/)
    .filter(Boolean)
    .join(" ");
}

/** Strictly parse one LLM reply; throws on any schema deviation. */
export function parseLexiconReply(raw: string): Entity[] {
  return lexiconReplySchema.parse(JSON.parse(raw)).entities;
}

export function mergeEntities(perDoc: Entity[][]): Entity[] {
  const merged = new Map<string, { term: string; synonyms: string[]; seen: Set<string> }>();
  for (const entities of perDoc) {
    for (const entity of entities) {
      const key = normalizeTerm(entity.term);
      if (!key) continue;
      let slot = merged.get(key);
      if (!slot) {
        slot = { term: entity.term, synonyms: [], seen: new Set() };
        merged.set(key, slot);
      }
      for (const synonym of entity.synonyms) {
        const norm = normalizeTerm(synonym);
        if (!norm || norm === key || slot.seen.has(norm)) continue;
        slot.seen.add(norm);
        slot.synonyms.push(synonym);
      }
    }
  }
  return [...merged.values()].map(({ term, synonyms }) => ({ term, synonyms }));
}

export function entitiesToLexiconJson(entities: Entity[]): string {
  const concepts = entities.map((entity, index) => ({
    concept_id: `llm${String(index + 1).padStart(6, "0")}`,
    preferred: entity.term,
    synonyms: entity.synonyms,
  }));
  return JSON.stringify({ concepts }, null, 1) + "\n";
}

interface LlmClientOptions {
  endpoint: string;
  apiKey?: string;
  model?: string;
}

async function callLlm(options: LlmClientOptions, prompt: string): Promise<string> {
  const headers: Record<string, string> = { "content-type": "application/json" };
  if (options.apiKey) headers.authorization = `Bearer ${options.apiKey}`;
  const response = await fetch(options.endpoint, {
    method: "POST",
    headers,
    body: JSON.stringify({
      model: options.model ?? "gpt-4o-mini",
      messages: [{ role: "user", content: prompt }],
      response_format: { type: "json_object" },
    }),
  });
  if (!response.ok) throw new Error(`LLM endpoint returned ${response.status}`);
  const payload = (await response.json()) as {
    choices?: Array<{ message?: { content?: string } }>;
  };
  const content = payload.choices?.[0]?.message?.content;
  if (typeof content !== "string") throw new Error("LLM reply carries no content");
  return content;
}

export async function generateLexicon(
  docs: Array<{ id: string; text: string }>,
  labels: string[],
  datasetName: string,
  options: LlmClientOptions,
  rawFailurePath?: string
): Promise<Entity[]> {
  const perDoc: Entity[][] = [];
  for (const doc of docs) {
    const prompt = buildPrompt(datasetName, labels, doc.text);
    let lastRaw = "";
    let entities: Entity[] | null = null;
    for (let attempt = 0; attempt < 2 && entities === null; attempt++) {
      lastRaw = await callLlm(options, prompt);
      try {
        entities = parseLexiconReply(lastRaw);
      } catch {
        entities = null; // retry once, then give up with the raw reply saved
      }
    }
    if (entities === null) {
      if (rawFailurePath) writeFileSync(rawFailurePath, lastRaw);
      throw new Error(`document ${doc.id}: LLM reply failed schema validation twice`);
    }
    perDoc.push(entities);
  }
  return mergeEntities(perDoc);
}

async function main(): Promise<void> {
  const argv = process.argv.slice(2);
  const get = (flag: string): string | undefined => {
    const index = argv.indexOf(`--${flag}`);
    return index >= 0 ? argv[index + 1] : undefined;
  };
  const docsPath = get("docs");
  const labelsPath = get("labels");
  const outPath = get("out");
  if (!docsPath || !labelsPath || !outPath) {
    process.stderr.write(
      "usage: genlexicon --docs docs.jsonl --labels labels.json --out lexicon.json [--dataset NAME] [--endpoint URL]\n"
    );
    process.exit(1);
  }
  const endpoint = get("endpoint") ?? process.env.LLM_ENDPOINT;
  if (!endpoint) {
    process.stderr.write("no LLM endpoint configured (--endpoint or $LLM_ENDPOINT)\n");
    process.exit(1);
  }
  const docs = readFileSync(docsPath, "utf-8")
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line))
    .filter((record) => !("_meta" in record));
  const labels: string[] = JSON.parse(readFileSync(labelsPath, "utf-8"));
  const entities = await generateLexicon(
    docs,
    labels,
    get("dataset") ?? "corpus",
    { endpoint, apiKey: process.env.LLM_API_KEY, model: get("model") },
    outPath + ".failed-reply.txt"
  );
  writeFileSync(outPath, entitiesToLexiconJson(entities));
  process.stdout.write(`${entities.length} terms -> ${outPath}\n`);
}

const invokedDirectly =
  process.argv[1]?.endsWith("genlexicon.js") || process.argv[1]?.endsWith("genlexicon.ts");
if (invokedDirectly) {
  main().catch((error) => {
    process.stderr.write(`${error.message}\n`);
    process.exit(1);
  });
}

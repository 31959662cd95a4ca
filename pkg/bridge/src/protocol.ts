/** Request/reply schemas for the line-delimited JSON trainer protocol. */

import { z } from "zod";

export const docSchema = z.object({ id: z.string(), text: z.string() }).strict();

export const requestSchema = z.discriminatedUnion("op", [
  z.object({ op: z.literal("info") }).strict(),
  z
    .object({
      op: z.literal("encode"),
      docs: z.array(docSchema),
      out_dir: z.string().optional(),
    })
    .strict(),
  z.object({ op: z.literal("update"), batch_path: z.string() }).strict(),
  z.object({ op: z.literal("predict"), docs: z.array(docSchema) }).strict(),
]);

export type Request = z.infer<typeof requestSchema>;

export interface ErrorReply {
  ok: false;
  error: string;
}

export type Reply = ({ ok: true } & Record<string, unknown>) | ErrorReply;

/** Augmented-batch JSONL row as produced by the pipeline's augment stage. */
export const batchSampleSchema = z
  .object({
    origin_id: z.string(),
    variant_index: z.number().int(),
    text: z.string(),
    labels: z.array(z.string()),
    substitutions: z.array(
      z
        .object({
          start: z.number().int(),
          end: z.number().int(),
          original: z.string(),
          replacement: z.string(),
          concept_id: z.string(),
        })
        .strict()
    ),
  })
  .strict();

export type BatchSample = z.infer<typeof batchSampleSchema>;

export function parseBatchFile(content: string): BatchSample[] {
  const samples: BatchSample[] = [];
  for (const raw of content.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    const parsed = JSON.parse(line);
    if (parsed && typeof parsed === "object" && "_meta" in parsed) continue;
    samples.push(batchSampleSchema.parse(parsed));
  }
  return samples;
}

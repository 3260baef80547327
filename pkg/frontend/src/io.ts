import { readFileSync, writeFileSync } from "node:fs";

import type { Post, PredictionRecord } from "./types.js";

/**
 * Read a JSONL corpus. Only `id` and `text` are used, so both raw corpora
 * and the pipeline's cleaned-post files are accepted.
 */
export function readCorpus(path: string): Post[] {
  const posts: Post[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, "utf8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (line === "") continue;
    let rec: unknown;
    try {
      rec = JSON.parse(line);
    } catch {
      throw new Error(`${path}:${i + 1}: not valid JSON`);
    }
    const { id, text } = rec as { id?: unknown; text?: unknown };
    if ((typeof id !== "string" && typeof id !== "number") || typeof text !== "string") {
      throw new Error(`${path}:${i + 1}: record needs string id and text`);
    }
    const postId = String(id);
    if (seen.has(postId)) {
      throw new Error(`${path}:${i + 1}: duplicate post id ${postId}`);
    }
    seen.add(postId);
    posts.push({ id: postId, text });
  }
  return posts;
}

export function writeJsonl(path: string, records: object[]): void {
  const body = records.map((r) => JSON.stringify(r)).join("\n");
  writeFileSync(path, records.length > 0 ? body + "\n" : "");
}

/** Prediction record with a stable key order for byte-reproducible files. */
export function predictionLine(rec: PredictionRecord): PredictionRecord {
  const out: PredictionRecord = {
    post_id: rec.post_id,
    model_id: rec.model_id,
    prompt_schema: rec.prompt_schema,
  };
  if (rec.labels !== undefined) out.labels = rec.labels;
  if (rec.refusal) out.refusal = true;
  if (rec.error !== undefined) out.error = rec.error;
  return out;
}

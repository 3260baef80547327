import { toPrimary } from "./taxonomy.js";

export type Parsed =
  | { kind: "labels"; labels: string[] }
  | { kind: "refusal" };

/**
 * Turn a model completion into primary-emotion labels.
 *
 * Accepted shapes: comma- or newline-separated emotion names, optionally as
 * one bracketed list; items may carry quotes, list dashes, or a trailing
 * period. Matching is case-insensitive and goes through the taxonomy, so
 * "Annoyance" maps to anger. Anything else, including an empty completion or
 * a list with an unknown item, is a refusal.
 */
export function parseCompletion(raw: string): Parsed {
  let s = raw.trim();
  if (s.startsWith("[") && s.endsWith("]")) {
    s = s.slice(1, -1);
  }
  if (s === "") return { kind: "refusal" };
  const labels = new Set<string>();
  for (const part of s.split(/[,\n]+/)) {
    const item = part.trim().replace(/^["'`\-\s]+/, "").replace(/["'`.\s]+$/, "");
    if (item === "") continue;
    const primary = toPrimary(item);
    if (primary === undefined) return { kind: "refusal" };
    labels.add(primary);
  }
  if (labels.size === 0) return { kind: "refusal" };
  return { kind: "labels", labels: [...labels].sort() };
}

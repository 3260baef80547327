/** Emotion label space shared with the audit pipeline's default taxonomy. */

export const PRIMARIES = [
  "anger",
  "disgust",
  "fear",
  "joy",
  "love",
  "sadness",
  "surprise",
  "neutral",
] as const;

export type Primary = (typeof PRIMARIES)[number];

/**
 * source label -> primary emotion. Covers the eight primaries (identity),
 * the GoEmotions-27 labels, and the two extra Plutchik labels, mirroring
 * the default mapping shipped with the audit pipeline.
 */
export const LABEL_TO_PRIMARY: Readonly<Record<string, Primary>> = {
  anger: "anger",
  disgust: "disgust",
  fear: "fear",
  joy: "joy",
  love: "love",
  sadness: "sadness",
  surprise: "surprise",
  neutral: "neutral",
  admiration: "love",
  amusement: "joy",
  annoyance: "anger",
  approval: "joy",
  caring: "love",
  confusion: "surprise",
  curiosity: "surprise",
  desire: "love",
  disappointment: "sadness",
  disapproval: "anger",
  embarrassment: "sadness",
  excitement: "joy",
  gratitude: "joy",
  grief: "sadness",
  nervousness: "fear",
  optimism: "joy",
  pride: "joy",
  realization: "surprise",
  relief: "joy",
  remorse: "sadness",
  anticipation: "joy",
  trust: "love",
};

export function toPrimary(label: string): Primary | undefined {
  return LABEL_TO_PRIMARY[label.trim().toLowerCase()];
}

export type PromptSchema = "zero" | "few" | "cot";

export const PROMPT_SCHEMAS: readonly PromptSchema[] = ["zero", "few", "cot"];

export interface Post {
  id: string;
  text: string;
}

/** One line of the predictions file the audit pipeline ingests. */
export interface PredictionRecord {
  post_id: string;
  model_id: string;
  prompt_schema: PromptSchema;
  labels?: string[];
  refusal?: boolean;
  /** Set only when the refusal was manufactured from a transport failure. */
  error?: string;
}

export interface PromptExample {
  text: string;
  labels: string[];
  reasoning: string;
}

export interface PromptBundle {
  variants: string[];
  examples: PromptExample[];
}

import { parseCompletion } from "./parse.js";
import { buildPrompt, loadDefaultBundle, pickVariant } from "./prompts.js";
import type { Provider } from "./providers.js";
import type {
  Post,
  PredictionRecord,
  PromptBundle,
  PromptSchema,
} from "./types.js";

export interface RunOptions {
  modelId: string;
  schema: PromptSchema;
  seed: number;
  temperature?: number;
  /** Bounded in-flight requests. */
  concurrency?: number;
  /** Attempts per post before the failure becomes a refusal. */
  maxAttempts?: number;
  /** Base backoff, doubled per retry. */
  backoffMs?: number;
  /** Minimum spacing between request starts (per-provider rate limit). */
  minIntervalMs?: number;
  bundle?: PromptBundle;
  /** Injectable for tests. */
  sleep?: (ms: number) => Promise<void>;
  now?: () => number;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

function resolved(opts: RunOptions) {
  return {
    temperature: opts.temperature ?? 0.7,
    concurrency: Math.max(1, opts.concurrency ?? 4),
    maxAttempts: Math.max(1, opts.maxAttempts ?? 3),
    backoffMs: opts.backoffMs ?? 250,
    minIntervalMs: opts.minIntervalMs ?? 0,
    bundle: opts.bundle ?? loadDefaultBundle(),
    sleep: opts.sleep ?? defaultSleep,
    now: opts.now ?? Date.now,
  };
}

/** Serializes request starts so consecutive starts are >= minIntervalMs apart. */
function makeRateGate(
  minIntervalMs: number,
  sleep: (ms: number) => Promise<void>,
  now: () => number,
): () => Promise<void> {
  if (minIntervalMs <= 0) {
    return async () => {};
  }
  let nextSlot = -Infinity;
  return () => {
    const current = now();
    const slot = Math.max(current, nextSlot);
    nextSlot = slot + minIntervalMs;
    const wait = slot - current;
    return wait > 0 ? sleep(wait) : Promise.resolve();
  };
}

/** Render every prompt without touching a provider. */
export function dryRun(
  posts: Post[],
  schema: PromptSchema,
  seed: number,
  bundle: PromptBundle = loadDefaultBundle(),
): { post_id: string; prompt: string }[] {
  return posts.map((post) => ({
    post_id: post.id,
    prompt: buildPrompt(
      post,
      schema,
      pickVariant(seed, post.id, bundle.variants.length),
      bundle,
    ),
  }));
}

/**
 * Query the provider for every post and return one prediction record per
 * post, in input order. Transport failures are retried with exponential
 * backoff; a post whose attempts are exhausted becomes a refusal tagged
 * with the error, never a dropped record.
 */
export async function runModel(
  posts: Post[],
  provider: Provider,
  options: RunOptions,
): Promise<PredictionRecord[]> {
  const opts = resolved(options);
  const gate = makeRateGate(opts.minIntervalMs, opts.sleep, opts.now);
  const results: PredictionRecord[] = new Array(posts.length);
  let nextIndex = 0;

  const completeOne = async (post: Post): Promise<PredictionRecord> => {
    const prompt = buildPrompt(
      post,
      options.schema,
      pickVariant(options.seed, post.id, opts.bundle.variants.length),
      opts.bundle,
    );
    const base = {
      post_id: post.id,
      model_id: options.modelId,
      prompt_schema: options.schema,
    };
    for (let attempt = 1; attempt <= opts.maxAttempts; attempt++) {
      try {
        await gate();
        const output = await provider.complete(prompt, {
          model: options.modelId,
          temperature: opts.temperature,
        });
        const parsed = parseCompletion(output);
        return parsed.kind === "labels"
          ? { ...base, labels: parsed.labels }
          : { ...base, refusal: true };
      } catch {
        if (attempt < opts.maxAttempts) {
          await opts.sleep(opts.backoffMs * 2 ** (attempt - 1));
        }
      }
    }
    return { ...base, refusal: true, error: "transport" };
  };

  const worker = async () => {
    while (true) {
      const i = nextIndex++;
      if (i >= posts.length) return;
      results[i] = await completeOne(posts[i]!);
    }
  };

  const workers = Array.from(
    { length: Math.min(opts.concurrency, posts.length) },
    worker,
  );
  await Promise.all(workers);
  return results;
}

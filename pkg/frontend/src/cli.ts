#!/usr/bin/env node
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { predictionLine, readCorpus, writeJsonl } from "./io.js";
import { HttpProvider, MockProvider, type Provider } from "./providers.js";
import { dryRun, runModel } from "./runner.js";
import { PROMPT_SCHEMAS, type PromptSchema } from "./types.js";

const USAGE = `usage: model-adapters --corpus posts.jsonl --out predictions.jsonl [options]

options:
  --corpus <path>           JSONL posts with id and text (required)
  --out <path>              output file (required)
  --provider <mock|http>    completion backend (default mock)
  --model <id>              model identifier written to every record (default mock)
  --schema <zero|few|cot>   prompt schema (default zero)
  --seed <int>              fixes the instruction-variant assignment (default 0)
  --temperature <float>     sampling temperature (default 0.70)
  --dry-run                 write prompts instead of calling any model
  --base-url <url>          http provider endpoint (or MODEL_ADAPTERS_BASE_URL)
  --concurrency <n>         max in-flight requests (default 4)
  --max-attempts <n>        attempts per post before refusal (default 3)
  --backoff-ms <n>          base retry backoff (default 250)
  --min-interval-ms <n>     minimum spacing between request starts (default 0)
  --help                    show this message

The http provider reads its API key from MODEL_ADAPTERS_API_KEY.`;

function intFlag(raw: string | undefined, name: string, fallback: number): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v) || v < 0) {
    throw new Error(`${name} must be a non-negative integer`);
  }
  return v;
}

export async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: false,
      options: {
        corpus: { type: "string" },
        out: { type: "string" },
        provider: { type: "string", default: "mock" },
        model: { type: "string", default: "mock" },
        schema: { type: "string", default: "zero" },
        seed: { type: "string", default: "0" },
        temperature: { type: "string", default: "0.70" },
        "dry-run": { type: "boolean", default: false },
        "base-url": { type: "string" },
        concurrency: { type: "string" },
        "max-attempts": { type: "string" },
        "backoff-ms": { type: "string" },
        "min-interval-ms": { type: "string" },
        help: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
  const v = parsed.values;
  if (v.help) {
    console.log(USAGE);
    return 0;
  }

  try {
    if (!v.corpus || !v.out) {
      throw new Error("--corpus and --out are required (see --help)");
    }
    const schema = v.schema as PromptSchema;
    if (!PROMPT_SCHEMAS.includes(schema)) {
      throw new Error(`--schema must be one of ${PROMPT_SCHEMAS.join(", ")}`);
    }
    const seed = intFlag(v.seed, "--seed", 0);
    const temperature = Number(v.temperature);
    if (!Number.isFinite(temperature) || temperature < 0) {
      throw new Error("--temperature must be a non-negative number");
    }

    const posts = readCorpus(v.corpus);

    if (v["dry-run"]) {
      writeJsonl(v.out, dryRun(posts, schema, seed));
      console.log(`dry-run: ok (${posts.length} prompts -> ${v.out})`);
      return 0;
    }

    let provider: Provider;
    if (v.provider === "mock") {
      provider = new MockProvider();
    } else if (v.provider === "http") {
      const baseUrl = v["base-url"] ?? process.env.MODEL_ADAPTERS_BASE_URL;
      if (!baseUrl) {
        throw new Error("http provider needs --base-url or MODEL_ADAPTERS_BASE_URL");
      }
      provider = new HttpProvider({
        baseUrl,
        apiKey: process.env.MODEL_ADAPTERS_API_KEY,
      });
    } else {
      throw new Error(`unknown provider ${v.provider!}`);
    }

    const records = await runModel(posts, provider, {
      modelId: v.model!,
      schema,
      seed,
      temperature,
      concurrency: intFlag(v.concurrency, "--concurrency", 4),
      maxAttempts: intFlag(v["max-attempts"], "--max-attempts", 3),
      backoffMs: intFlag(v["backoff-ms"], "--backoff-ms", 250),
      minIntervalMs: intFlag(v["min-interval-ms"], "--min-interval-ms", 0),
    });
    writeJsonl(v.out, records.map(predictionLine));
    const refusals = records.filter((r) => r.refusal).length;
    console.log(
      `run: ok (${records.length} predictions, ${refusals} refusals -> ${v.out})`,
    );
    return 0;
  } catch (err) {
    const e = err as NodeJS.ErrnoException;
    console.error(`error: ${e.message}`);
    return e.code === "ENOENT" ? 2 : 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}

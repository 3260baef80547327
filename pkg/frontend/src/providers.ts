import { postTextFromPrompt } from "./prompts.js";

export interface CompletionOptions {
  model: string;
  temperature: number;
}

export interface Provider {
  readonly name: string;
  complete(prompt: string, opts: CompletionOptions): Promise<string>;
}

/** A request that failed in transit (to be retried, then given up on). */
export class TransportError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "TransportError";
  }
}

/** Cue word in the post -> label the fake model answers with. The labels are
 * deliberately non-primary where possible so parsing exercises the taxonomy. */
const MOCK_CUES: ReadonlyArray<readonly [string, string]> = [
  ["furious", "annoyance"],
  ["queasy", "disgust"],
  ["terrified", "fear"],
  ["delighted", "optimism"],
  ["beloved", "admiration"],
  ["heartbroken", "grief"],
  ["astonished", "curiosity"],
];

const MOCK_REFUSAL_CUE = "classified";

/**
 * Deterministic stand-in for a hosted model: recognizes obvious emotion
 * words in the post, declines posts that look off-limits, and answers
 * "neutral" otherwise. Only the post block of the prompt is read, so
 * few-shot examples cannot leak into the answer.
 */
export class MockProvider implements Provider {
  readonly name = "mock";

  async complete(prompt: string, _opts: CompletionOptions): Promise<string> {
    const text = postTextFromPrompt(prompt).toLowerCase();
    if (text.includes(MOCK_REFUSAL_CUE)) {
      return "I cannot help with that request.";
    }
    const found = MOCK_CUES.filter(([cue]) => text.includes(cue)).map(
      ([, label]) => label,
    );
    return found.length > 0 ? found.join(", ") : "neutral";
  }
}

export interface HttpProviderConfig {
  baseUrl: string;
  apiKey?: string;
  fetchImpl?: typeof fetch;
}

/** OpenAI-compatible chat-completions client. */
export class HttpProvider implements Provider {
  readonly name = "http";
  private readonly baseUrl: string;
  private readonly apiKey?: string;
  private readonly fetchImpl: typeof fetch;

  constructor(config: HttpProviderConfig) {
    this.baseUrl = config.baseUrl.replace(/\/+$/, "");
    this.apiKey = config.apiKey;
    this.fetchImpl = config.fetchImpl ?? fetch;
  }

  async complete(prompt: string, opts: CompletionOptions): Promise<string> {
    const headers: Record<string, string> = {
      "content-type": "application/json",
    };
    if (this.apiKey) {
      headers.authorization = `Bearer ${this.apiKey}`;
    }
    const res = await this.fetchImpl(`${this.baseUrl}/chat/completions`, {
      method: "POST",
      headers,
      body: JSON.stringify({
        model: opts.model,
        temperature: opts.temperature,
        messages: [{ role: "user", content: prompt }],
      }),
    });
    if (!res.ok) {
      throw new TransportError(`provider returned ${res.status}`, res.status);
    }
    let body: unknown;
    try {
      body = await res.json();
    } catch {
      throw new TransportError("provider returned a non-JSON body");
    }
    const content = (body as { choices?: { message?: { content?: unknown } }[] })
      ?.choices?.[0]?.message?.content;
    if (typeof content !== "string") {
      throw new TransportError("provider response has no message content");
    }
    return content;
  }
}

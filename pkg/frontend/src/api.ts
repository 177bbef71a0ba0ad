/**
 * Typed client for the serving endpoint.
 *
 * Every request/response pair lands in `log`, so tests (and curious users)
 * can trace any number on screen back to exactly one service response --
 * the UI itself never does probability arithmetic.
 */
import type {
  ErrorBody,
  ModelPayload,
  PredictResponse,
  WhatIfResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(body.error ?? `service error ${status}`);
  }
}

/** The service could not be reached at all (distinct from an API error). */
export class ServiceUnreachableError extends Error {}

export interface RequestLogEntry {
  sequence: number;
  path: string;
  request: unknown;
  status: number;
  response: unknown;
}

export class ApiClient {
  readonly log: RequestLogEntry[] = [];
  private sequence = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async call<T>(path: string, body?: unknown): Promise<T> {
    const sequence = ++this.sequence;
    let response: Response;
    try {
      response = await this.fetchImpl(
        this.baseUrl + path,
        body === undefined
          ? undefined
          : {
              method: "POST",
              headers: { "Content-Type": "application/json" },
              body: JSON.stringify(body),
            },
      );
    } catch (cause) {
      throw new ServiceUnreachableError(`service unreachable: ${String(cause)}`);
    }
    let parsed: unknown;
    try {
      parsed = await response.json();
    } catch {
      parsed = { error: "service returned invalid JSON" };
    }
    this.log.push({ sequence, path, request: body ?? null, status: response.status, response: parsed });
    if (!response.ok) {
      throw new ApiError(response.status, parsed as ErrorBody);
    }
    return parsed as T;
  }

  fetchModel(): Promise<ModelPayload> {
    return this.call<ModelPayload>("/model");
  }

  predict(evidence: Record<string, string>, target?: string): Promise<PredictResponse> {
    return this.call<PredictResponse>(
      "/predict",
      target === undefined ? { evidence } : { evidence, target },
    );
  }

  whatif(
    evidence: Record<string, string>,
    interventions: Record<string, string>[],
    target?: string,
  ): Promise<WhatIfResponse> {
    return this.call<WhatIfResponse>(
      "/whatif",
      target === undefined ? { evidence, interventions } : { evidence, interventions, target },
    );
  }
}

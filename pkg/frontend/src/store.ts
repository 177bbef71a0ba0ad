/**
 * Application state and service interaction.
 *
 * Evidence edits trigger a debounced /predict; responses carry the
 * sequence number of the request that produced them and anything
 * superseded is discarded, so at most one prediction is ever applied per
 * round of edits. Displayed numbers are service responses run through the
 * formatting helpers -- nothing else.
 */
import { ApiClient, ApiError, ServiceUnreachableError } from "./api.js";
import {
  DisplayedDistribution,
  displayDelta,
  displayPosterior,
} from "./format.js";
import type { ErrorBody, ModelPayload } from "./types.js";

export const CONDITIONAL_CAPTION =
  "Scenario estimates are conditional (computed by evidence substitution), not interventional effects.";

export const DEBOUNCE_MS = 250;

export interface ScenarioDisplay {
  assignment: Record<string, string>;
  posterior: DisplayedDistribution;
  delta: DisplayedDistribution;
}

export interface WhatIfDisplay {
  base: DisplayedDistribution;
  scenarios: ScenarioDisplay[];
}

export type Connection = "loading" | "ok" | "down";

export interface AppState {
  connection: Connection;
  model: ModelPayload | null;
  target: string | null;
  evidence: Record<string, string>;
  posterior: DisplayedDistribution | null;
  /** Inline explanation for rejected evidence (e.g. probability-zero). */
  evidenceError: string | null;
  /** Client-side display threshold for the strength plot. */
  threshold: number;
  alternatives: Record<string, string>[];
  whatIf: WhatIfDisplay | null;
  whatIfError: string | null;
}

function explainApiError(error: ApiError): string {
  const body: ErrorBody = error.body;
  if (error.status === 422 && body.evidence && typeof body.evidence === "object") {
    const pairs = Object.entries(body.evidence as Record<string, string>)
      .map(([name, state]) => `${name}=${state}`)
      .join(", ");
    return `${body.error} (conflicting evidence: ${pairs})`;
  }
  return body.error;
}

export class WhatIfStore {
  state: AppState = {
    connection: "loading",
    model: null,
    target: null,
    evidence: {},
    posterior: null,
    evidenceError: null,
    threshold: 0,
    alternatives: [],
    whatIf: null,
    whatIfError: null,
  };

  private listeners: Array<(state: AppState) => void> = [];
  private predictSequence = 0;
  private pending: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly api: ApiClient,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  subscribe(listener: (state: AppState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(partial: Partial<AppState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  async initialize(): Promise<void> {
    try {
      const model = await this.api.fetchModel();
      const fallback = model.nodes.length ? model.nodes[model.nodes.length - 1]!.name : null;
      this.patch({ connection: "ok", model, target: model.target ?? fallback });
      await this.refreshPosterior();
    } catch {
      this.patch({ connection: "down", model: null, posterior: null, whatIf: null });
    }
  }

  /** Variables offered as evidence: every schema variable except the target. */
  evidenceVariables(): ModelPayload["nodes"] {
    if (!this.state.model) return [];
    return this.state.model.nodes.filter((node) => node.name !== this.state.target);
  }

  setEvidence(name: string, state: string | null): void {
    if (name === this.state.target) return; // the target is never evidence
    const evidence = { ...this.state.evidence };
    if (state === null) {
      delete evidence[name];
    } else {
      evidence[name] = state;
    }
    this.patch({ evidence });
    this.scheduleRefresh();
  }

  private scheduleRefresh(): void {
    if (this.pending !== null) clearTimeout(this.pending);
    this.pending = setTimeout(() => {
      this.pending = null;
      void this.refreshPosterior();
    }, this.debounceMs);
  }

  /** Run any pending debounced refresh immediately (used by tests). */
  async flush(): Promise<void> {
    if (this.pending !== null) {
      clearTimeout(this.pending);
      this.pending = null;
    }
    await this.refreshPosterior();
  }

  async refreshPosterior(): Promise<void> {
    if (this.state.target === null) return;
    const sequence = ++this.predictSequence;
    try {
      const response = await this.api.predict(this.state.evidence, this.state.target);
      if (sequence !== this.predictSequence) return; // superseded
      this.patch({
        connection: "ok",
        posterior: displayPosterior(response.posterior),
        evidenceError: null,
      });
    } catch (error) {
      if (sequence !== this.predictSequence) return;
      if (error instanceof ApiError) {
        this.patch({ posterior: null, evidenceError: explainApiError(error) });
      } else if (error instanceof ServiceUnreachableError) {
        this.patch({ connection: "down", posterior: null, whatIf: null });
      } else {
        throw error;
      }
    }
  }

  setThreshold(value: number): void {
    this.patch({ threshold: value });
  }

  addAlternative(assignment: Record<string, string>): void {
    if (this.state.target !== null && this.state.target in assignment) return;
    this.patch({ alternatives: [...this.state.alternatives, assignment] });
  }

  removeAlternative(index: number): void {
    this.patch({ alternatives: this.state.alternatives.filter((_, i) => i !== index) });
  }

  async runScenarios(): Promise<void> {
    if (this.state.target === null) return;
    if (this.state.alternatives.length === 0) {
      this.patch({ whatIf: null, whatIfError: "define at least one alternative first" });
      return;
    }
    try {
      const response = await this.api.whatif(
        this.state.evidence,
        this.state.alternatives,
        this.state.target,
      );
      this.patch({
        whatIf: {
          base: displayPosterior(response.base.posterior),
          scenarios: response.scenarios.map((scenario) => ({
            assignment: scenario.assignment,
            posterior: displayPosterior(scenario.posterior),
            delta: displayDelta(scenario.delta),
          })),
        },
        whatIfError: null,
      });
    } catch (error) {
      if (error instanceof ApiError) {
        this.patch({ whatIf: null, whatIfError: explainApiError(error) });
      } else if (error instanceof ServiceUnreachableError) {
        this.patch({ connection: "down", whatIf: null, posterior: null });
      } else {
        throw error;
      }
    }
  }
}

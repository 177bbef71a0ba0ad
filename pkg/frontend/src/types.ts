/** Wire types of the riskbn serving endpoint (the UI's only backend). */

export interface NodePayload {
  name: string;
  states: string[];
}

export interface EdgePayload {
  source: string;
  target: string;
  strength: number;
}

export interface ModelPayload {
  nodes: NodePayload[];
  edges: EdgePayload[];
  target: string | null;
}

/** Posterior distribution: state label -> probability. */
export type Posterior = Record<string, number>;

export interface PredictResponse {
  target: string;
  posterior: Posterior;
}

export interface WhatIfScenarioResponse {
  assignment: Record<string, string>;
  posterior: Posterior;
  /** Service-computed difference vs. the base posterior, per state. */
  delta: Posterior;
}

export interface WhatIfResponse {
  target: string;
  semantics: string;
  base: { posterior: Posterior };
  scenarios: WhatIfScenarioResponse[];
}

export interface ErrorBody {
  error: string;
  [key: string]: unknown;
}

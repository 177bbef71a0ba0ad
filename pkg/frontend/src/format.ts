/**
 * Number rendering. Formatting is the only arithmetic the UI is allowed
 * to do with probabilities: three decimals on screen, the raw service
 * value on hover.
 */
import type { Posterior } from "./types.js";

export interface DisplayedValue {
  /** The untouched service value. */
  raw: number;
  /** Three-decimal on-screen text. */
  text: string;
  /** Full-precision hover text (title attribute). */
  title: string;
}

export type DisplayedDistribution = Record<string, DisplayedValue>;

export function formatProbability(value: number): string {
  return value.toFixed(3);
}

/** Signed three-decimal rendering for scenario deltas ("+0.124", "-0.031"). */
export function formatDelta(value: number): string {
  return value < 0 ? value.toFixed(3) : `+${value.toFixed(3)}`;
}

export function rawTitle(value: number): string {
  return String(value);
}

export function displayPosterior(posterior: Posterior): DisplayedDistribution {
  const out: DisplayedDistribution = {};
  for (const [state, value] of Object.entries(posterior)) {
    out[state] = { raw: value, text: formatProbability(value), title: rawTitle(value) };
  }
  return out;
}

export function displayDelta(delta: Posterior): DisplayedDistribution {
  const out: DisplayedDistribution = {};
  for (const [state, value] of Object.entries(delta)) {
    out[state] = { raw: value, text: formatDelta(value), title: rawTitle(value) };
  }
  return out;
}

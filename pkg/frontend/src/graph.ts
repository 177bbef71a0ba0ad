/**
 * Strength-plot rendering: the learned graph as SVG, edge thickness
 * proportional to edge confidence, with a client-side threshold slider
 * that only filters what is drawn (the model itself is never touched).
 */
import type { EdgePayload, ModelPayload } from "./types.js";

export const MAX_EDGE_WIDTH = 6;

export function visibleEdges(edges: EdgePayload[], threshold: number): EdgePayload[] {
  return edges.filter((edge) => edge.strength >= threshold);
}

/** Stroke width proportional to strength; strength 1.0 gets MAX_EDGE_WIDTH. */
export function edgeWidth(strength: number, maxWidth: number = MAX_EDGE_WIDTH): number {
  return strength * maxWidth;
}

export interface PositionedNode {
  name: string;
  x: number;
  y: number;
}

/** Longest-path depth per node; roots sit at depth 0. */
export function nodeDepths(model: ModelPayload): Map<string, number> {
  const parents = new Map<string, string[]>();
  for (const node of model.nodes) parents.set(node.name, []);
  for (const edge of model.edges) parents.get(edge.target)?.push(edge.source);

  const depths = new Map<string, number>();
  const resolve = (name: string, seen: Set<string>): number => {
    const known = depths.get(name);
    if (known !== undefined) return known;
    if (seen.has(name)) return 0; // defensive: the service only sends DAGs
    seen.add(name);
    const above = (parents.get(name) ?? []).map((p) => resolve(p, seen));
    const depth = above.length ? Math.max(...above) + 1 : 0;
    depths.set(name, depth);
    return depth;
  };
  for (const node of model.nodes) resolve(node.name, new Set());
  return depths;
}

/** Layered layout: one column per depth, nodes spread vertically. */
export function layoutGraph(model: ModelPayload, width: number, height: number): PositionedNode[] {
  const depths = nodeDepths(model);
  const columns = new Map<number, string[]>();
  for (const node of model.nodes) {
    const depth = depths.get(node.name) ?? 0;
    const column = columns.get(depth) ?? [];
    column.push(node.name);
    columns.set(depth, column);
  }
  const nColumns = Math.max(...columns.keys()) + 1;
  const positioned: PositionedNode[] = [];
  for (const [depth, names] of columns) {
    names.forEach((name, row) => {
      positioned.push({
        name,
        x: ((depth + 0.5) / nColumns) * width,
        y: ((row + 0.5) / names.length) * height,
      });
    });
  }
  return positioned;
}

const escape = (text: string): string =>
  text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

/** Pure SVG markup for the filtered strength plot (no DOM required). */
export function renderGraphSvg(
  model: ModelPayload,
  threshold: number,
  width = 900,
  height = 520,
): string {
  const nodes = layoutGraph(model, width, height);
  const at = new Map(nodes.map((n) => [n.name, n]));
  const parts: string[] = [
    `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">`,
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" ` +
      `markerHeight="7" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="#51617a"/></marker></defs>`,
  ];
  for (const edge of visibleEdges(model.edges, threshold)) {
    const from = at.get(edge.source);
    const to = at.get(edge.target);
    if (!from || !to) continue;
    // shorten toward the target so the arrowhead clears the node circle
    const dx = to.x - from.x;
    const dy = to.y - from.y;
    const length = Math.hypot(dx, dy) || 1;
    const tipX = to.x - (dx / length) * 26;
    const tipY = to.y - (dy / length) * 26;
    parts.push(
      `<line x1="${from.x.toFixed(1)}" y1="${from.y.toFixed(1)}" x2="${tipX.toFixed(1)}" ` +
        `y2="${tipY.toFixed(1)}" stroke="#51617a" stroke-width="${edgeWidth(edge.strength).toFixed(2)}" ` +
        `marker-end="url(#arrow)" opacity="0.85"><title>${escape(edge.source)} → ` +
        `${escape(edge.target)} (strength ${edge.strength.toFixed(3)})</title></line>`,
    );
  }
  for (const node of nodes) {
    parts.push(
      `<circle cx="${node.x.toFixed(1)}" cy="${node.y.toFixed(1)}" r="22" fill="#eef2f8" stroke="#51617a"/>`,
      `<text x="${node.x.toFixed(1)}" y="${(node.y + 34).toFixed(1)}" text-anchor="middle" ` +
        `font-size="11">${escape(node.name)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

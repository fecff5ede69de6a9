/** Figure builders: one report kind per function, CSV + manifest in, SVG out.
 *
 * The builders never reinterpret numbers: every plotted value is read from the
 * CSV verbatim, and titles carry the grid metadata recorded in the manifest.
 */

import { Table, numbers } from "./csv.js";
import {
  Axis, DEFAULT_FRAME, Figure, extent, fmt, heatColor, pad, plotArea, seriesColor,
} from "./svg.js";

export interface Manifest {
  pipeline?: string;
  meta?: Record<string, unknown>;
  checks?: Array<{ name: string; passed: boolean; value: unknown; tolerance: unknown }>;
  seed?: number;
}

function metaLine(manifest: Manifest): string {
  const meta = manifest.meta ?? {};
  const parts = Object.entries(meta).map(([k, v]) => `${k}=${JSON.stringify(v)}`);
  if (manifest.seed !== undefined) parts.push(`seed=${manifest.seed}`);
  return parts.join("  ");
}

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

export function convergenceFigures(table: Table, manifest: Manifest): Map<string, string> {
  const eps = numbers(table, "eps");
  const delta = numbers(table, "delta");
  const D = numbers(table, "D");
  const epsLevels = uniqueSorted(eps);
  const deltaLevels = uniqueSorted(delta);

  // heatmap of D(eps, delta)
  const heat = new Figure(DEFAULT_FRAME, "mollified two-scale distance D(eps, delta)", metaLine(manifest));
  const area = plotArea(DEFAULT_FRAME);
  const [dLo, dHi] = extent(D);
  const cw = (area.x1 - area.x0) / epsLevels.length;
  const ch = (area.y0 - area.y1) / deltaLevels.length;
  for (let k = 0; k < D.length; k++) {
    const i = epsLevels.indexOf(eps[k]);
    const j = deltaLevels.indexOf(delta[k]);
    const t = dHi === dLo ? 0.5 : (Math.log(D[k]) - Math.log(dLo)) / (Math.log(dHi) - Math.log(dLo));
    const x = area.x0 + i * cw;
    const y = area.y0 - (j + 1) * ch;
    heat.rect(x, y, cw, ch, heatColor(t), "#ffffff");
    heat.text(x + cw / 2, y + ch / 2 + 4, fmt(D[k]), 10, "middle", t > 0.6 ? "#fff" : "#123");
  }
  epsLevels.forEach((e, i) => heat.text(area.x0 + (i + 0.5) * cw, area.y0 + 20, fmt(e), 11, "middle"));
  deltaLevels.forEach((d, j) =>
    heat.text(area.x0 - 8, area.y0 - (j + 0.5) * ch + 4, fmt(d), 11, "end"));
  heat.text((area.x0 + area.x1) / 2, DEFAULT_FRAME.height - 16, "eps", 13, "middle");
  heat.add(`<text x="18" y="${(area.y0 + area.y1) / 2}" font-size="13" text-anchor="middle" font-family="sans-serif" fill="#222" transform="rotate(-90 18 ${(area.y0 + area.y1) / 2})">delta</text>`);
  heat.text(area.x1, DEFAULT_FRAME.top - 6, `D in [${fmt(dLo)}, ${fmt(dHi)}], log color ramp`, 11, "end");

  // line plot of D(., delta*) against eps, log-log
  const dStar = deltaLevels[0];
  const line = new Figure(DEFAULT_FRAME, `D(eps, delta*=${fmt(dStar)}) against eps (log-log)`, metaLine(manifest));
  const pts: Array<[number, number]> = [];
  for (let k = 0; k < D.length; k++) {
    if (delta[k] === dStar) pts.push([eps[k], D[k]]);
  }
  pts.sort((a, b) => a[0] - b[0]);
  const xA = new Axis(...pad(extent(pts.map((p) => p[0])), "log"), area.x0, area.x1, "log");
  const yA = new Axis(...pad(extent(pts.map((p) => p[1])), "log"), area.y0, area.y1, "log");
  line.axes(xA, yA, "eps", "D");
  line.line(pts.map(([x, y]) => [xA.map(x), yA.map(y)]), seriesColor(0));
  pts.forEach(([x, y]) => line.marker(xA.map(x), yA.map(y), seriesColor(0)));
  pts.forEach(([x, y]) => line.text(xA.map(x) + 6, yA.map(y) - 6, fmt(y), 10));

  return new Map([
    ["convergence_heatmap.svg", heat.render()],
    ["convergence_lines.svg", line.render()],
  ]);
}

export function contractionFigure(table: Table, manifest: Manifest): Map<string, string> {
  const time = numbers(table, "time");
  const margin = numbers(table, "margin");
  const kinds = table.rows.map((r) => r["kind"] ?? "margin");
  const groups = [...new Set(kinds)];
  const fig = new Figure(DEFAULT_FRAME, "contraction margins over time", metaLine(manifest));
  const area = plotArea(DEFAULT_FRAME);
  const xA = new Axis(...pad(extent(time), "linear"), area.x0, area.x1, "linear");
  const [mLo, mHi] = extent(margin.concat([0]));
  const yA = new Axis(...pad([mLo, mHi], "linear"), area.y0, area.y1, "linear");
  fig.axes(xA, yA, "time", "margin");
  fig.line([[xA.map(xA.lo), yA.map(0)], [xA.map(xA.hi), yA.map(0)]], "#999", 1, "4 3");
  groups.forEach((g, gi) => {
    const pts: Array<[number, number]> = [];
    for (let k = 0; k < time.length; k++) {
      if (kinds[k] === g) pts.push([xA.map(time[k]), yA.map(margin[k])]);
    }
    fig.line(pts, seriesColor(gi));
    pts.forEach(([x, y]) => fig.marker(x, y, seriesColor(gi), 3));
    fig.text(area.x1 - 8, area.y1 + 16 + 14 * gi, g, 12, "end", seriesColor(gi));
  });
  return new Map([["contraction_margins.svg", fig.render()]]);
}

const BGK_TRACES: Array<{ column: string; violating: (v: number) => boolean }> = [
  { column: "sign_min", violating: (v) => v < -1e-9 },
  { column: "support_leak", violating: (v) => v > 1e-9 },
  { column: "ml_pairing_max", violating: (v) => v > 1e-9 },
  { column: "l2", violating: () => false },
];

export function bgkFigure(table: Table, manifest: Manifest): Map<string, string> {
  const time = numbers(table, "time");
  const fig = new Figure(DEFAULT_FRAME, "relaxation-model invariant traces", metaLine(manifest));
  const area = plotArea(DEFAULT_FRAME);
  const xA = new Axis(...pad(extent(time), "linear"), area.x0, area.x1, "linear");
  const all: number[] = [];
  for (const t of BGK_TRACES) all.push(...numbers(table, t.column));
  const yA = new Axis(...pad(extent(all), "linear"), area.y0, area.y1, "linear");
  fig.axes(xA, yA, "time", "invariant value");
  let violations = 0;
  BGK_TRACES.forEach((trace, ti) => {
    const vals = numbers(table, trace.column);
    const pts: Array<[number, number]> = vals.map((v, k) => [xA.map(time[k]), yA.map(v)]);
    fig.line(pts, seriesColor(ti));
    vals.forEach((v, k) => {
      if (trace.violating(v)) {
        fig.marker(xA.map(time[k]), yA.map(v), "#d62728", 5, "cross");
        violations++;
      }
    });
    fig.text(area.x1 - 8, area.y1 + 16 + 14 * ti, trace.column, 12, "end", seriesColor(ti));
  });
  fig.text(area.x0 + 4, area.y1 + 16, `violation markers: ${violations}`, 12, "start",
           violations ? "#d62728" : "#2ca02c");
  return new Map([["bgk_invariants.svg", fig.render()]]);
}

export function hydroFigure(table: Table, manifest: Manifest): Map<string, string> {
  const lam = numbers(table, "lam");
  const err = numbers(table, "l2_error");
  const pts = lam.map((l, i) => [l, err[i]] as [number, number]).filter(([l]) => l > 0);
  if (pts.length === 0) {
    throw new Error("hydro report has no positive relaxation rates");
  }
  pts.sort((a, b) => a[0] - b[0]);
  const fig = new Figure(DEFAULT_FRAME, "relaxation-rate error curve (log-log)", metaLine(manifest));
  const area = plotArea(DEFAULT_FRAME);
  const xA = new Axis(...pad(extent(pts.map((p) => p[0])), "log"), area.x0, area.x1, "log");
  const yA = new Axis(...pad(extent(pts.map((p) => p[1])), "log"), area.y0, area.y1, "log");
  fig.axes(xA, yA, "relaxation rate", "L2 error");
  fig.line(pts.map(([x, y]) => [xA.map(x), yA.map(y)]), seriesColor(0));
  pts.forEach(([x, y]) => {
    fig.marker(xA.map(x), yA.map(y), seriesColor(0));
    fig.text(xA.map(x) + 6, yA.map(y) - 6, fmt(y), 10);
  });
  return new Map([["hydro_errors.svg", fig.render()]]);
}

export const KIND_INPUTS: Record<string, string> = {
  convergence: "convergence.csv",
  contraction: "contraction.csv",
  bgk: "bgk_invariants.csv",
  hydro: "hydro.csv",
};

export function buildFigures(kind: string, table: Table, manifest: Manifest): Map<string, string> {
  switch (kind) {
    case "convergence":
      return convergenceFigures(table, manifest);
    case "contraction":
      return contractionFigure(table, manifest);
    case "bgk":
      return bgkFigure(table, manifest);
    case "hydro":
      return hydroFigure(table, manifest);
    default:
      throw new Error(`unknown report kind ${JSON.stringify(kind)}`);
  }
}

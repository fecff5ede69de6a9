/** Deterministic SVG scene builder: fixed canvas, no timestamps, stable
 * number formatting, linear or logarithmic axes. */

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 480,
  left: 80,
  right: 24,
  top: 48,
  bottom: 64,
};

export type Scale = "linear" | "log";

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e-3 && a < 1e4) {
    return String(Number(v.toPrecision(6)));
  }
  return v.toExponential(2);
}

export class Axis {
  constructor(
    public readonly lo: number,
    public readonly hi: number,
    public readonly pixLo: number,
    public readonly pixHi: number,
    public readonly scale: Scale,
  ) {
    if (scale === "log" && (lo <= 0 || hi <= 0)) {
      throw new Error("log axis needs positive bounds");
    }
  }

  map(v: number): number {
    const [a, b] =
      this.scale === "log" ? [Math.log(this.lo), Math.log(this.hi)] : [this.lo, this.hi];
    const x = this.scale === "log" ? Math.log(v) : v;
    const t = b === a ? 0.5 : (x - a) / (b - a);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }

  ticks(count = 5): number[] {
    if (this.scale === "log") {
      const e0 = Math.ceil(Math.log10(this.lo) - 1e-9);
      const e1 = Math.floor(Math.log10(this.hi) + 1e-9);
      const out: number[] = [];
      for (let e = e0; e <= e1; e++) out.push(Math.pow(10, e));
      if (out.length >= 2) return out;
      return [this.lo, this.hi];
    }
    const out: number[] = [];
    for (let i = 0; i < count; i++) out.push(this.lo + ((this.hi - this.lo) * i) / (count - 1));
    return out;
  }
}

export function pad([lo, hi]: [number, number], scale: Scale): [number, number] {
  if (scale === "log") {
    return [lo / 1.5, hi * 1.5];
  }
  const span = hi - lo || Math.abs(hi) || 1;
  return [lo - 0.05 * span, hi + 0.05 * span];
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    throw new Error("no finite values to plot");
  }
  return [lo, hi];
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

export function seriesColor(i: number): string {
  return PALETTE[i % PALETTE.length];
}

/** Two-color diverging-free ramp for heatmaps (light to dark blue). */
export function heatColor(t: number): string {
  const c = Math.max(0, Math.min(1, t));
  const mix = (a: number, b: number) => Math.round(a + (b - a) * c);
  return `rgb(${mix(239, 8)},${mix(243, 48)},${mix(255, 107)})`;
}

export class Figure {
  private parts: string[] = [];

  constructor(
    public readonly frame: Frame,
    public readonly title: string,
    public readonly subtitle: string,
  ) {}

  add(part: string): void {
    this.parts.push(part);
  }

  line(points: Array<[number, number]>, color: string, width = 1.8, dash = ""): void {
    const d = points.map(([x, y], i) => `${i ? "L" : "M"}${x.toFixed(2)} ${y.toFixed(2)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.add(`<path d="${d}" fill="none" stroke="${color}" stroke-width="${width}"${dashAttr}/>`);
  }

  marker(x: number, y: number, color: string, size = 4, shape: "circle" | "cross" = "circle"): void {
    if (shape === "circle") {
      this.add(`<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${size}" fill="${color}"/>`);
    } else {
      const s = size;
      this.add(
        `<path d="M${(x - s).toFixed(2)} ${(y - s).toFixed(2)} L${(x + s).toFixed(2)} ${(y + s).toFixed(2)} ` +
          `M${(x - s).toFixed(2)} ${(y + s).toFixed(2)} L${(x + s).toFixed(2)} ${(y - s).toFixed(2)}" ` +
          `stroke="${color}" stroke-width="2" fill="none"/>`,
      );
    }
  }

  text(x: number, y: number, s: string, size = 12, anchor = "start", color = "#222"): void {
    this.add(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="${size}" text-anchor="${anchor}" ` +
        `font-family="sans-serif" fill="${color}">${escapeXml(s)}</text>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = "none"): void {
    this.add(
      `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${w.toFixed(2)}" height="${h.toFixed(2)}" ` +
        `fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  axes(xAxis: Axis, yAxis: Axis, xLabel: string, yLabel: string): void {
    const f = this.frame;
    const x0 = f.left;
    const x1 = f.width - f.right;
    const y0 = f.height - f.bottom;
    const y1 = f.top;
    this.add(`<path d="M${x0} ${y0} L${x1} ${y0} M${x0} ${y0} L${x0} ${y1}" stroke="#222" stroke-width="1" fill="none"/>`);
    for (const t of xAxis.ticks()) {
      const px = xAxis.map(t);
      this.add(`<path d="M${px.toFixed(2)} ${y0} L${px.toFixed(2)} ${y0 + 5}" stroke="#222" stroke-width="1"/>`);
      this.text(px, y0 + 20, fmt(t), 11, "middle");
    }
    for (const t of yAxis.ticks()) {
      const py = yAxis.map(t);
      this.add(`<path d="M${x0} ${py.toFixed(2)} L${x0 - 5} ${py.toFixed(2)}" stroke="#222" stroke-width="1"/>`);
      this.text(x0 - 8, py + 4, fmt(t), 11, "end");
    }
    this.text((x0 + x1) / 2, f.height - 16, xLabel, 13, "middle");
    this.add(
      `<text x="18" y="${(y0 + y1) / 2}" font-size="13" text-anchor="middle" font-family="sans-serif" ` +
        `fill="#222" transform="rotate(-90 18 ${(y0 + y1) / 2})">${escapeXml(yLabel)}</text>`,
    );
  }

  render(): string {
    const f = this.frame;
    const head =
      `<svg xmlns="http://www.w3.org/2000/svg" width="${f.width}" height="${f.height}" ` +
      `viewBox="0 0 ${f.width} ${f.height}">` +
      `<rect width="${f.width}" height="${f.height}" fill="white"/>`;
    const title = `<text x="${f.width / 2}" y="22" font-size="15" text-anchor="middle" font-family="sans-serif" fill="#111">${escapeXml(this.title)}</text>`;
    const sub = `<text x="${f.width / 2}" y="38" font-size="11" text-anchor="middle" font-family="sans-serif" fill="#555">${escapeXml(this.subtitle)}</text>`;
    return [head, title, sub, ...this.parts, "</svg>", ""].join("\n");
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function plotArea(frame: Frame): { x0: number; x1: number; y0: number; y1: number } {
  return {
    x0: frame.left,
    x1: frame.width - frame.right,
    y0: frame.height - frame.bottom,
    y1: frame.top,
  };
}

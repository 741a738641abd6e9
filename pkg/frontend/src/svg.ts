/**
 * Minimal deterministic SVG scene builder: fixed canvas, linear or log axes,
 * polyline series, scatter points, and vertical error bars.  No external
 * rendering dependencies, so identical inputs produce identical bytes.
 */

export interface AxisSpec {
  label: string;
  log: boolean;
}

export interface Extent {
  min: number;
  max: number;
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 72, right: 24, top: 36, bottom: 54 };

export class Scale {
  constructor(
    readonly extent: Extent,
    readonly rangeLo: number,
    readonly rangeHi: number,
    readonly log: boolean,
  ) {
    if (log && extent.min <= 0) {
      throw new Error("log scale needs positive data");
    }
  }

  apply(v: number): number {
    const [a, b] = this.log
      ? [Math.log10(this.extent.min), Math.log10(this.extent.max)]
      : [this.extent.min, this.extent.max];
    const x = this.log ? Math.log10(v) : v;
    const t = b === a ? 0.5 : (x - a) / (b - a);
    return this.rangeLo + t * (this.rangeHi - this.rangeLo);
  }

  ticks(count = 6): number[] {
    if (this.log) {
      const lo = Math.floor(Math.log10(this.extent.min));
      const hi = Math.ceil(Math.log10(this.extent.max));
      const out: number[] = [];
      for (let e = lo; e <= hi; e++) out.push(10 ** e);
      return out.filter((v) => v >= this.extent.min / 1.001 && v <= this.extent.max * 1.001);
    }
    const { min, max } = this.extent;
    if (max === min) return [min];
    const step = (max - min) / (count - 1);
    return Array.from({ length: count }, (_, i) => min + i * step);
  }
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Number(v.toPrecision(4)));
}

export function padExtent(values: number[], log: boolean): Extent {
  const finite = values.filter((v) => Number.isFinite(v) && (!log || v > 0));
  if (finite.length === 0) throw new Error("no plottable values");
  let min = Math.min(...finite);
  let max = Math.max(...finite);
  if (min === max) {
    min = log ? min / 2 : min - 1;
    max = log ? max * 2 : max + 1;
  } else if (!log) {
    const pad = 0.05 * (max - min);
    min -= pad;
    max += pad;
  } else {
    min /= 1.3;
    max *= 1.3;
  }
  return { min, max };
}

export interface Series {
  name: string;
  xs: number[];
  ys: number[];
  color: string;
  kind: "line" | "points";
  errLo?: number[];
  errHi?: number[];
}

export function renderScene(
  title: string,
  xAxis: AxisSpec,
  yAxis: AxisSpec,
  series: Series[],
  hLines: { y: number; label: string; color: string }[] = [],
): string {
  const xsAll = series.flatMap((s) => s.xs);
  const ysAll = series
    .flatMap((s) => [...s.ys, ...(s.errLo ?? []), ...(s.errHi ?? [])])
    .concat(hLines.map((h) => h.y));
  const sx = new Scale(padExtent(xsAll, xAxis.log), MARGIN.left, WIDTH - MARGIN.right, xAxis.log);
  const sy = new Scale(padExtent(ysAll, yAxis.log), HEIGHT - MARGIN.bottom, MARGIN.top, yAxis.log);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15">${escapeXml(title)}</text>`,
  );

  // axes
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  for (const t of sx.ticks()) {
    const px = sx.apply(t);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  for (const t of sy.ticks()) {
    const py = sy.apply(t);
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13">${escapeXml(xAxis.label)}</text>`,
  );
  parts.push(
    `<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${(y0 + y1) / 2})">${escapeXml(yAxis.label)}</text>`,
  );

  for (const h of hLines) {
    const py = sy.apply(h.y);
    parts.push(
      `<line class="refline" x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="${h.color}" stroke-dasharray="6 4"/>`,
    );
    parts.push(
      `<text x="${x1 - 4}" y="${py - 4}" text-anchor="end" font-size="11" fill="${h.color}">${escapeXml(h.label)}</text>`,
    );
  }

  let legendY = MARGIN.top + 6;
  for (const s of series) {
    const pts = s.xs
      .map((x, i) => [sx.apply(x), sy.apply(s.ys[i])] as const)
      .filter(([px, py]) => Number.isFinite(px) && Number.isFinite(py));
    if (s.kind === "line") {
      const d = pts.map(([px, py]) => `${px.toFixed(2)},${py.toFixed(2)}`).join(" ");
      parts.push(
        `<polyline class="series" data-name="${escapeXml(s.name)}" points="${d}" fill="none" stroke="${s.color}" stroke-width="1.8"/>`,
      );
    } else {
      const circles = pts
        .map(([px, py]) => `<circle cx="${px.toFixed(2)}" cy="${py.toFixed(2)}" r="3" fill="${s.color}"/>`)
        .join("");
      parts.push(`<g class="series" data-name="${escapeXml(s.name)}">${circles}</g>`);
      if (s.errLo && s.errHi) {
        const bars = s.xs
          .map((x, i) => {
            const lo = s.errLo![i];
            const hi = s.errHi![i];
            if (yAxisSkips(lo, hi, yAxis.log)) return "";
            const px = sx.apply(x);
            return `<line x1="${px.toFixed(2)}" y1="${sy.apply(lo).toFixed(2)}" x2="${px.toFixed(2)}" y2="${sy.apply(hi).toFixed(2)}" stroke="${s.color}" stroke-width="1"/>`;
          })
          .join("");
        parts.push(`<g class="errorbars" data-name="${escapeXml(s.name)}">${bars}</g>`);
      }
    }
    parts.push(
      `<rect x="${x1 - 150}" y="${legendY - 9}" width="12" height="12" fill="${s.color}"/>` +
        `<text x="${x1 - 133}" y="${legendY + 1}" font-size="12">${escapeXml(s.name)}</text>`,
    );
    legendY += 18;
  }
  parts.push("</svg>");
  return parts.join("\n");
}

function yAxisSkips(lo: number, hi: number, log: boolean): boolean {
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return true;
  return log && (lo <= 0 || hi <= 0);
}

function escapeXml(s: string): string {
  return s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

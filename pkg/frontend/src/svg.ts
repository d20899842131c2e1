/**
 * Minimal hand-rolled SVG line charts: axes, nice ticks, a legend,
 * horizontal reference lines, and dashed vertical event markers.
 *
 * Marker lines carry a `data-t` attribute with the untouched event time
 * so consumers (and tests) can check marker placement exactly, without
 * going through pixel rounding.
 */

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  width?: number;
  dash?: string; // stroke-dasharray
  points?: boolean; // draw circles at the samples
}

export interface VLine {
  x: number;
  label?: string;
}

export interface HLine {
  y: number;
  color: string;
  label?: string;
  dash?: string;
}

export interface ChartSpec {
  title: string;
  subtitle?: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  vLines?: VLine[];
  hLines?: HLine[];
  width?: number;
  height?: number;
  yMin?: number;
  yMax?: number;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.001) return v.toExponential(1);
  return String(Math.round(v * 1e6) / 1e6);
}

// ---------------------------------------------------------------------------
// Chart builder
// ---------------------------------------------------------------------------

const MARKER_COLOR = "#555";

export function renderChart(spec: ChartSpec): string {
  const { series, vLines = [], hLines = [] } = spec;
  if (series.length === 0 || series.every((s) => s.x.length === 0)) {
    throw new Error("nothing to plot: all series are empty");
  }
  const W = spec.width ?? 760;
  const H = spec.height ?? 320;
  const ml = 62,
    mr = 16,
    mt = 34,
    mb = 46;
  const pw = W - ml - mr;
  const ph = H - mt - mb;

  const xs = series.flatMap((s) => s.x);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const ys = series.flatMap((s) => s.y).concat(hLines.map((h) => h.y));
  let yMin = spec.yMin ?? Math.min(...ys);
  let yMax = spec.yMax ?? Math.max(...ys);
  if (yMax === yMin) {
    yMin -= 1;
    yMax += 1;
  }
  const pad = (yMax - yMin) * 0.06;
  yMin -= pad;
  yMax += pad;

  const xOf = (v: number) => ml + ((v - xMin) / (xMax - xMin || 1)) * pw;
  const yOf = (v: number) => mt + ph - ((v - yMin) / (yMax - yMin)) * ph;

  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="#fff"/>\n`;
  s += `<text x="${ml}" y="16" font-size="12" font-weight="600" fill="#222">${esc(spec.title)}</text>\n`;
  if (spec.subtitle) {
    s += `<text x="${ml}" y="28" font-size="9" fill="#888">${esc(spec.subtitle)}</text>\n`;
  }

  // grid and y ticks
  for (const v of niceTicks(yMin, yMax, 6)) {
    const y = yOf(v).toFixed(1);
    s += `<line x1="${ml}" y1="${y}" x2="${ml + pw}" y2="${y}" stroke="#eee"/>\n`;
    s += `<text x="${ml - 6}" y="${+y + 3}" font-size="8" fill="#666" text-anchor="end">${fmt(v)}</text>\n`;
  }
  // x ticks
  for (const v of niceTicks(xMin, xMax, 8)) {
    const x = xOf(v).toFixed(1);
    s += `<line x1="${x}" y1="${mt + ph}" x2="${x}" y2="${mt + ph + 4}" stroke="#666"/>\n`;
    s += `<text x="${x}" y="${mt + ph + 14}" font-size="8" fill="#666" text-anchor="middle">${fmt(v)}</text>\n`;
  }

  // frame and axis labels
  s += `<rect x="${ml}" y="${mt}" width="${pw}" height="${ph}" fill="none" stroke="#999"/>\n`;
  s += `<text x="${ml + pw / 2}" y="${H - 8}" font-size="9" fill="#444" text-anchor="middle">${esc(spec.xLabel)}</text>\n`;
  s += `<text x="14" y="${mt + ph / 2}" font-size="9" fill="#444" text-anchor="middle" transform="rotate(-90 14 ${mt + ph / 2})">${esc(spec.yLabel)}</text>\n`;

  // event markers (dashed verticals), exact time kept in data-t
  for (const vl of vLines) {
    if (vl.x < xMin || vl.x > xMax) continue;
    const x = xOf(vl.x).toFixed(1);
    s += `<line data-t="${vl.x}" x1="${x}" y1="${mt}" x2="${x}" y2="${mt + ph}" stroke="${MARKER_COLOR}" stroke-width="0.8" stroke-dasharray="4,3"/>\n`;
    if (vl.label) {
      s += `<text x="${+x + 2}" y="${mt + 10}" font-size="7" fill="${MARKER_COLOR}">${esc(vl.label)}</text>\n`;
    }
  }

  // horizontal reference lines
  for (const hl of hLines) {
    const y = yOf(hl.y).toFixed(1);
    s += `<line x1="${ml}" y1="${y}" x2="${ml + pw}" y2="${y}" stroke="${hl.color}" stroke-dasharray="${hl.dash ?? "6,3"}"/>\n`;
    if (hl.label) {
      s += `<text x="${ml + pw - 2}" y="${+y - 3}" font-size="7" fill="${hl.color}" text-anchor="end">${esc(hl.label)}</text>\n`;
    }
  }

  // series
  for (const sr of series) {
    const pts = sr.x
      .map((xv, i) => `${xOf(xv).toFixed(1)},${yOf(sr.y[i]).toFixed(1)}`)
      .join(" ");
    const dash = sr.dash ? ` stroke-dasharray="${sr.dash}"` : "";
    s += `<polyline points="${pts}" fill="none" stroke="${sr.color}" stroke-width="${sr.width ?? 1.2}"${dash}/>\n`;
    if (sr.points) {
      for (let i = 0; i < sr.x.length; i++) {
        s += `<circle cx="${xOf(sr.x[i]).toFixed(1)}" cy="${yOf(sr.y[i]).toFixed(1)}" r="2.4" fill="${sr.color}"/>\n`;
      }
    }
  }

  // legend
  let lx = ml + 8;
  for (const sr of series) {
    s += `<line x1="${lx}" y1="${mt + ph + 28}" x2="${lx + 14}" y2="${mt + ph + 28}" stroke="${sr.color}" stroke-width="2"/>\n`;
    s += `<text x="${lx + 18}" y="${mt + ph + 31}" font-size="8" fill="#333">${esc(sr.label)}</text>\n`;
    lx += 26 + sr.label.length * 4.6;
  }

  s += "</svg>\n";
  return s;
}

/** Minimal SVG line-chart renderer with the plotted data embedded as metadata. */

import { FigureData, Panel, Series } from "./figures.js";
import { colorFor } from "./styles.js";

const PANEL_W = 360;
const PANEL_H = 260;
const MARGIN = { top: 34, right: 16, bottom: 40, left: 56 };
const PER_ROW = 3;

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (lo === Infinity) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  const out: number[] = [];
  for (let i = 0; i <= n; i++) {
    out.push(lo + ((hi - lo) * i) / n);
  }
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return Number(v.toPrecision(3)).toString();
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, x0: number, y0: number): string {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const [xLo, xHi] = extent(panel.series.flatMap((s) => s.x));
  const allY = panel.series.flatMap((s) => s.y);
  if (panel.hline) {
    allY.push(panel.hline.y);
  }
  const [yLo, yHi] = extent(allY);
  const sx = (v: number) => x0 + MARGIN.left + ((v - xLo) / (xHi - xLo)) * innerW;
  const sy = (v: number) => y0 + MARGIN.top + innerH - ((v - yLo) / (yHi - yLo)) * innerH;

  const parts: string[] = [];
  parts.push(
    `<text x="${x0 + PANEL_W / 2}" y="${y0 + 16}" text-anchor="middle" ` +
      `font-size="12" font-weight="bold">${esc(panel.title)}</text>`
  );
  // axes
  const axColor = "#444";
  parts.push(
    `<line x1="${sx(xLo)}" y1="${sy(yLo)}" x2="${sx(xHi)}" y2="${sy(yLo)}" stroke="${axColor}"/>`,
    `<line x1="${sx(xLo)}" y1="${sy(yLo)}" x2="${sx(xLo)}" y2="${sy(yHi)}" stroke="${axColor}"/>`
  );
  for (const tv of ticks(xLo, xHi)) {
    parts.push(
      `<line x1="${sx(tv)}" y1="${sy(yLo)}" x2="${sx(tv)}" y2="${sy(yLo) + 4}" stroke="${axColor}"/>`,
      `<text x="${sx(tv)}" y="${sy(yLo) + 16}" text-anchor="middle" font-size="9">${fmt(tv)}</text>`
    );
  }
  for (const tv of ticks(yLo, yHi)) {
    parts.push(
      `<line x1="${sx(xLo) - 4}" y1="${sy(tv)}" x2="${sx(xLo)}" y2="${sy(tv)}" stroke="${axColor}"/>`,
      `<text x="${sx(xLo) - 6}" y="${sy(tv) + 3}" text-anchor="end" font-size="9">${fmt(tv)}</text>`
    );
  }
  parts.push(
    `<text x="${x0 + MARGIN.left + innerW / 2}" y="${y0 + PANEL_H - 8}" text-anchor="middle" ` +
      `font-size="10">${esc(panel.xLabel)}</text>`,
    `<text x="${x0 + 14}" y="${y0 + MARGIN.top + innerH / 2}" text-anchor="middle" ` +
      `font-size="10" transform="rotate(-90 ${x0 + 14} ${y0 + MARGIN.top + innerH / 2})">` +
      `${esc(panel.yLabel)}</text>`
  );
  if (panel.hline) {
    parts.push(
      `<line x1="${sx(xLo)}" y1="${sy(panel.hline.y)}" x2="${sx(xHi)}" y2="${sy(panel.hline.y)}" ` +
        `stroke="${colorFor("capacity")}" stroke-dasharray="2,3"/>`,
      `<text x="${sx(xHi) - 4}" y="${sy(panel.hline.y) - 3}" text-anchor="end" font-size="9" ` +
        `fill="${colorFor("capacity")}">${esc(panel.hline.label)}</text>`
    );
  }
  panel.series.forEach((s: Series, idx: number) => {
    const pts = s.x
      .map((xv, i) => `${sx(xv).toFixed(2)},${sy(s.y[i]).toFixed(2)}`)
      .join(" ");
    const dash = s.style === "dashed" ? ' stroke-dasharray="6,4"' : "";
    parts.push(
      `<polyline fill="none" stroke="${colorFor(s.label)}" stroke-width="1.5"${dash} points="${pts}"/>`
    );
    const ly = y0 + MARGIN.top + 10 + 12 * idx;
    const lx = x0 + MARGIN.left + 8;
    parts.push(
      `<line x1="${lx}" y1="${ly - 3}" x2="${lx + 18}" y2="${ly - 3}" ` +
        `stroke="${colorFor(s.label)}" stroke-width="1.5"${dash}/>`,
      `<text x="${lx + 22}" y="${ly}" font-size="9">${esc(s.label)}</text>`
    );
  });
  return parts.join("\n");
}

/** Render a complete figure; the plotted series are embedded verbatim as JSON metadata. */
export function renderSvg(figure: FigureData): string {
  const n = figure.panels.length;
  const cols = Math.min(PER_ROW, n);
  const rows = Math.ceil(n / PER_ROW);
  const width = cols * PANEL_W;
  const height = rows * PANEL_H + 24;
  const body = figure.panels
    .map((panel, i) =>
      renderPanel(panel, (i % PER_ROW) * PANEL_W, 24 + Math.floor(i / PER_ROW) * PANEL_H)
    )
    .join("\n");
  const meta = JSON.stringify({ id: figure.id, panels: figure.panels });
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    `<metadata id="series-data">${esc(meta)}</metadata>`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    `<text x="${width / 2}" y="16" text-anchor="middle" font-size="13" font-weight="bold">` +
      `${esc(figure.title)}</text>`,
    body,
    "</svg>",
  ].join("\n");
}

/** Recover the embedded series JSON from a rendered figure. */
export function extractSeriesData(svg: string): { id: string; panels: Panel[] } {
  const match = svg.match(/<metadata id="series-data">([\s\S]*?)<\/metadata>/);
  if (!match) {
    throw new Error("no series metadata found");
  }
  const raw = match[1].replace(/&lt;/g, "<").replace(/&gt;/g, ">").replace(/&amp;/g, "&");
  return JSON.parse(raw);
}

// Signed horizontal bar chart for the per-feature influence explanation.
// No chart library: the contract (ordering by |value|, sign encoded as
// color, magnitude as length) is rendered as plain SVG.

import type { Explanation } from "./types.js";

export const POSITIVE_COLOR = "#c0392b"; // contributes toward predicted mortality
export const NEGATIVE_COLOR = "#2980b9"; // contributes toward survival

export interface Bar {
  name: string;
  value: number;
  fraction: number; // |value| / max|value|
  color: string;
}

export function explanationBars(explanation: Explanation): Bar[] {
  const values = explanation.sentiment_values;
  const names = explanation.feature_names;
  const order = names
    .map((_, i) => i)
    .sort((a, b) => Math.abs(values[b]) - Math.abs(values[a]));
  const maxAbs = Math.max(...values.map(Math.abs), Number.MIN_VALUE);
  return order.map((i) => ({
    name: names[i],
    value: values[i],
    fraction: Math.abs(values[i]) / maxAbs,
    color: values[i] >= 0 ? POSITIVE_COLOR : NEGATIVE_COLOR,
  }));
}

const ROW_H = 22;
const LABEL_W = 110;
const BAR_MAX_W = 240;

export function renderBarChartSvg(bars: Bar[]): string {
  const height = bars.length * ROW_H + 4;
  const width = LABEL_W + BAR_MAX_W + 8;
  const rows = bars
    .map((bar, i) => {
      const y = i * ROW_H + 2;
      const w = Math.max(1, Math.round(bar.fraction * BAR_MAX_W));
      return (
        `<text x="${LABEL_W - 6}" y="${y + 15}" text-anchor="end" class="bar-label">` +
        `${bar.name}</text>` +
        `<rect x="${LABEL_W}" y="${y + 3}" width="${w}" height="${ROW_H - 8}" ` +
        `fill="${bar.color}" data-name="${bar.name}" data-value="${bar.value}"></rect>`
      );
    })
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `class="explanation-chart" role="img">${rows}</svg>`
  );
}

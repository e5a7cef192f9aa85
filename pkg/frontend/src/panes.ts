// Pure HTML rendering for the output panes, ranges dropdown, stats drawer,
// and record list. Every number is interpolated verbatim from the payload;
// nothing is recomputed or reformatted client-side.

import { explanationBars, renderBarChartSvg } from "./chart.js";
import type {
  ModelOutput,
  PatientRecord,
  RangesPayload,
  StatsPayload,
} from "./types.js";

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function renderModelPane(tag: "vdp" | "mlp", output: ModelOutput): string {
  const title = tag === "vdp" ? "Model A (stochastic)" : "Model B (deterministic)";
  const lines = [
    `<h3>${title}</h3>`,
    `<p class="probability">Probability of mortality: <strong>${output.probability}</strong></p>`,
  ];
  if (tag === "vdp" && output.confidence !== undefined) {
    lines.push(`<p class="confidence">Confidence: <strong>${output.confidence}</strong></p>`);
  }
  if (output.explanation) {
    lines.push(`<div class="chart">${renderBarChartSvg(explanationBars(output.explanation))}</div>`);
  }
  return `<section class="model-pane model-pane-${tag}">${lines.join("")}</section>`;
}

export function renderRangesDropdown(payload: RangesPayload): string {
  const items = Object.keys(payload.ranges)
    .map((name) => {
      const r = payload.ranges[name];
      return (
        `<li data-feature="${name}"><span class="feature-name">${esc(name)}</span>` +
        `<span class="healthy-range">${r.low}&ndash;${r.high} ${esc(r.unit)}</span></li>`
      );
    })
    .join("");
  return `<ul class="ranges-dropdown">${items}</ul>`;
}

export function renderStatsDrawer(payload: StatsPayload): string {
  const rows = Object.keys(payload.features)
    .map((name) => {
      const f = payload.features[name];
      const healthy = f.healthy_range
        ? `${f.healthy_range.low}&ndash;${f.healthy_range.high} ${esc(f.healthy_range.unit)}`
        : "&mdash;";
      return (
        `<tr data-feature="${name}"><td>${esc(name)}</td><td>${f.mean}</td>` +
        `<td>${f.std}</td><td>${f.q1}</td><td>${f.median}</td><td>${f.q3}</td>` +
        `<td>${healthy}</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="stats-drawer"><caption>Training set: ${payload.n_rows} stays, ` +
    `prevalence ${payload.prevalence}</caption><thead><tr><th>Feature</th><th>Mean</th>` +
    `<th>SD</th><th>Q1</th><th>Median</th><th>Q3</th><th>Healthy range</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderRecordRow(record: PatientRecord): string {
  const outcome = record.outcome
    ? `<span class="outcome">${record.outcome}</span>`
    : `<button class="outcome-survived" data-id="${record.id}">survived</button>` +
      `<button class="outcome-died" data-id="${record.id}">died</button>`;
  return (
    `<tr data-id="${record.id}"><td>${record.id}</td>` +
    `<td>${record.clinician_prediction}</td>` +
    `<td>${record.models.vdp.probability}</td>` +
    `<td>${record.models.mlp.probability}</td>` +
    `<td>${outcome}</td></tr>`
  );
}

export function renderRecordList(records: PatientRecord[]): string {
  const rows = records.map(renderRecordRow).join("");
  return (
    `<table class="record-list"><thead><tr><th>Record</th><th>Clinician</th>` +
    `<th>P(mortality) A</th><th>P(mortality) B</th><th>Outcome</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

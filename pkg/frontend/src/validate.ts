// Client-side plausibility validation mirroring the server's bounds:
// the healthy range widened to ten times its span, centered on it.

import type { FeatureRange, RangesPayload } from "./types.js";

export interface FieldResult {
  ok: boolean;
  value?: number;
  error?: string;
}

export function hardBounds(range: FeatureRange): { lo: number; hi: number } {
  const span = range.high - range.low;
  return { lo: range.low - 4.5 * span, hi: range.high + 4.5 * span };
}

export function validateFeature(
  name: string,
  raw: string,
  ranges: RangesPayload,
): FieldResult {
  const range = ranges.ranges[name];
  if (!range) {
    return { ok: false, error: `unknown feature ${name}` };
  }
  if (raw.trim() === "") {
    return { ok: false, error: `${name} is required` };
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    return { ok: false, error: `${name} must be a number` };
  }
  const { lo, hi } = hardBounds(range);
  if (value < lo || value > hi) {
    return { ok: false, error: `${name} outside plausible bounds [${lo}, ${hi}]` };
  }
  return { ok: true, value };
}

export interface FormCheck {
  ready: boolean;
  values: Record<string, number>;
  errors: Record<string, string>;
}

export function checkForm(
  rawValues: Record<string, string>,
  clinicianPrediction: string | null,
  ranges: RangesPayload,
): FormCheck {
  const values: Record<string, number> = {};
  const errors: Record<string, string> = {};
  for (const name of Object.keys(ranges.ranges)) {
    const result = validateFeature(name, rawValues[name] ?? "", ranges);
    if (result.ok) {
      values[name] = result.value as number;
    } else {
      errors[name] = result.error as string;
    }
  }
  if (clinicianPrediction !== "survive" && clinicianPrediction !== "die") {
    errors["clinician_prediction"] = "select your own prediction before submitting";
  }
  return { ready: Object.keys(errors).length === 0, values, errors };
}

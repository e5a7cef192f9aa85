// Client-side validation mirrors the server's plausibility bounds (healthy
// range widened to ten times its span) and gates submission on the
// clinician prediction.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { checkForm, hardBounds, validateFeature } from "../src/validate.js";
import type { PatientRecord, RangesPayload } from "../src/types.js";

const fixtures = join(__dirname, "..", "fixtures");
const ranges = JSON.parse(
  readFileSync(join(fixtures, "ranges.json"), "utf8"),
) as RangesPayload;
const record = JSON.parse(
  readFileSync(join(fixtures, "record.json"), "utf8"),
) as PatientRecord;

const completeRaw = (): Record<string, string> =>
  Object.fromEntries(
    Object.entries(record.features).map(([k, v]) => [k, String(v)]),
  );

describe("hardBounds", () => {
  it("is the healthy range widened to 10x its span", () => {
    const { lo, hi } = hardBounds({ low: 0.5, high: 2.0, unit: "mmol/L" });
    expect(lo).toBeCloseTo(0.5 - 4.5 * 1.5, 12);
    expect(hi).toBeCloseTo(2.0 + 4.5 * 1.5, 12);
    expect(hi - lo).toBeCloseTo(10 * 1.5, 12);
  });
});

describe("validateFeature", () => {
  it("accepts in-range numbers", () => {
    const r = validateFeature("lactate", "2.1", ranges);
    expect(r.ok).toBe(true);
    expect(r.value).toBe(2.1);
  });

  it("rejects blanks, non-numbers, and out-of-bounds values", () => {
    expect(validateFeature("lactate", "", ranges).ok).toBe(false);
    expect(validateFeature("lactate", "high", ranges).ok).toBe(false);
    expect(validateFeature("lactate", "500", ranges).ok).toBe(false);
    expect(validateFeature("troponin", "1", ranges).ok).toBe(false);
  });
});

describe("checkForm", () => {
  it("is ready with complete inputs and a clinician prediction", () => {
    const check = checkForm(completeRaw(), "survive", ranges);
    expect(check.ready).toBe(true);
    expect(Object.keys(check.values)).toHaveLength(12);
  });

  it("missing creatinine disables submit with a field hint", () => {
    const raw = completeRaw();
    raw.creatinine = "";
    const check = checkForm(raw, "survive", ranges);
    expect(check.ready).toBe(false);
    expect(check.errors.creatinine).toContain("required");
  });

  it("clinician prediction unset disables submit", () => {
    const check = checkForm(completeRaw(), null, ranges);
    expect(check.ready).toBe(false);
    expect(check.errors.clinician_prediction).toBeTruthy();
  });
});

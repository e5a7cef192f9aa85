// Explanation chart contract: bars ordered by descending |FI|, sign encoded
// as color, magnitude as length. Verified against the recorded record
// fixture.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import {
  explanationBars,
  NEGATIVE_COLOR,
  POSITIVE_COLOR,
  renderBarChartSvg,
} from "../src/chart.js";
import type { Explanation, PatientRecord } from "../src/types.js";

const record = JSON.parse(
  readFileSync(join(__dirname, "..", "fixtures", "record.json"), "utf8"),
) as PatientRecord;

describe("explanationBars", () => {
  for (const tag of ["vdp", "mlp"] as const) {
    it(`orders the ${tag} fixture bars by descending |FI|`, () => {
      const exp = record.models[tag].explanation as Explanation;
      const bars = explanationBars(exp);
      expect(bars).toHaveLength(exp.feature_names.length);
      for (let i = 1; i < bars.length; i++) {
        expect(Math.abs(bars[i - 1].value)).toBeGreaterThanOrEqual(
          Math.abs(bars[i].value),
        );
      }
      // the bar set is exactly the payload's (name, sentiment value) pairs
      const fromPayload = new Map(
        exp.feature_names.map((n, i) => [n, exp.sentiment_values[i]]),
      );
      for (const bar of bars) {
        expect(bar.value).toBe(fromPayload.get(bar.name));
      }
    });
  }

  it("encodes sign as color", () => {
    const exp = record.models.vdp.explanation as Explanation;
    for (const bar of explanationBars(exp)) {
      expect(bar.color).toBe(bar.value >= 0 ? POSITIVE_COLOR : NEGATIVE_COLOR);
    }
  });

  it("scales bar fractions to the maximum magnitude", () => {
    const bars = explanationBars({
      format: "vdpt.influence-report/1",
      model: "mlp",
      test_id: "t",
      feature_names: ["a", "b", "c"],
      values: [2, -4, 1],
      sentiment_values: [2, -4, 1],
      predicted_class: 1,
      config: {},
    });
    expect(bars[0].name).toBe("b");
    expect(bars[0].fraction).toBe(1);
    expect(bars[1].fraction).toBeCloseTo(0.5, 12);
    expect(bars[2].fraction).toBeCloseTo(0.25, 12);
  });
});

describe("renderBarChartSvg", () => {
  it("emits one labeled rect per feature with the sign color", () => {
    const exp = record.models.mlp.explanation as Explanation;
    const bars = explanationBars(exp);
    const svg = renderBarChartSvg(bars);
    for (const bar of bars) {
      expect(svg).toContain(`data-name="${bar.name}"`);
      expect(svg).toContain(`data-value="${bar.value}"`);
    }
    const rects = svg.match(/<rect /g) ?? [];
    expect(rects).toHaveLength(bars.length);
    // rect order in the document matches the sorted order
    const order = [...svg.matchAll(/data-name="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(bars.map((b) => b.name));
  });
});

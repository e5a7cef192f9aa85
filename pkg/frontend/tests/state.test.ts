// Phase-machine contract: model output can never be revealed before the
// clinician's own prediction has been captured by a successful POST.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { SubmissionFlow, WorkflowError } from "../src/state.js";
import type { PatientRecord, SubmitPayload } from "../src/types.js";

const record = JSON.parse(
  readFileSync(join(__dirname, "..", "fixtures", "record.json"), "utf8"),
) as PatientRecord;

const validPayload = (): SubmitPayload => ({
  features: record.features,
  clinician_prediction: "survive",
});

describe("SubmissionFlow", () => {
  it("starts in editing with no record", () => {
    const flow = new SubmissionFlow();
    expect(flow.phase).toBe("editing");
    expect(flow.record).toBeNull();
  });

  it("forbids reveal before a submission", () => {
    const flow = new SubmissionFlow();
    expect(() => flow.succeed(record)).toThrow(WorkflowError);
    expect(flow.phase).toBe("editing");
    expect(flow.record).toBeNull();
  });

  it("rejects submission without a clinician prediction", () => {
    const flow = new SubmissionFlow();
    const payload = { features: record.features } as unknown as SubmitPayload;
    expect(() => flow.submit(payload)).toThrow(WorkflowError);
    expect(flow.phase).toBe("editing");
  });

  it("follows the full lifecycle editing -> awaiting -> revealed -> editing", () => {
    const flow = new SubmissionFlow();
    flow.submit(validPayload());
    expect(flow.phase).toBe("awaiting");
    expect(flow.record).toBeNull(); // nothing to show while awaiting
    flow.succeed(record);
    expect(flow.phase).toBe("revealed");
    expect(flow.record?.id).toBe(record.id);
    flow.reset();
    expect(flow.phase).toBe("editing");
    expect(flow.record).toBeNull();
  });

  it("returns to editing on a failed POST without revealing anything", () => {
    const flow = new SubmissionFlow();
    flow.submit(validPayload());
    flow.fail();
    expect(flow.phase).toBe("editing");
    expect(flow.record).toBeNull();
  });

  it("forbids double submission while awaiting", () => {
    const flow = new SubmissionFlow();
    flow.submit(validPayload());
    expect(() => flow.submit(validPayload())).toThrow(WorkflowError);
  });

  it("server rejection fixture carries no model output", () => {
    const rejection = JSON.parse(
      readFileSync(join(__dirname, "..", "fixtures", "rejection_422.json"), "utf8"),
    );
    expect(rejection.status).toBe(422);
    const blob = JSON.stringify(rejection.body);
    expect(blob).not.toContain("probability");
    expect(blob).not.toContain("confidence");
  });
});

// Submission workflow state machine.
//
// The clinician's own prediction is captured before any model output is
// shown: `revealed` is reachable only from `awaiting`, and `awaiting` is
// entered only by a submit() whose payload carries clinician_prediction.
// The server enforces the same rule independently (422).

import type { PatientRecord, SubmitPayload } from "./types.js";

export type Phase = "editing" | "awaiting" | "revealed";

export class WorkflowError extends Error {}

export class SubmissionFlow {
  private _phase: Phase = "editing";
  private _pending: SubmitPayload | null = null;
  private _record: PatientRecord | null = null;

  get phase(): Phase {
    return this._phase;
  }

  get record(): PatientRecord | null {
    return this._record;
  }

  /** editing -> awaiting. Rejects payloads lacking a clinician prediction. */
  submit(payload: SubmitPayload): void {
    if (this._phase !== "editing") {
      throw new WorkflowError(`cannot submit from phase ${this._phase}`);
    }
    if (payload.clinician_prediction !== "survive" && payload.clinician_prediction !== "die") {
      throw new WorkflowError("clinician prediction is required before submission");
    }
    this._pending = payload;
    this._phase = "awaiting";
  }

  /** awaiting -> revealed, carrying the server's record. */
  succeed(record: PatientRecord): PatientRecord {
    if (this._phase !== "awaiting") {
      throw new WorkflowError(`cannot reveal from phase ${this._phase}`);
    }
    this._record = record;
    this._pending = null;
    this._phase = "revealed";
    return record;
  }

  /** awaiting -> editing on a failed POST; the form keeps its values. */
  fail(): void {
    if (this._phase !== "awaiting") {
      throw new WorkflowError(`cannot fail from phase ${this._phase}`);
    }
    this._pending = null;
    this._phase = "editing";
  }

  /** revealed -> editing for the next patient. */
  reset(): void {
    if (this._phase !== "revealed") {
      throw new WorkflowError(`cannot reset from phase ${this._phase}`);
    }
    this._record = null;
    this._phase = "editing";
  }
}

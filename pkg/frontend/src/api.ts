// Thin typed client over the service's JSON API.

import type {
  PatientRecord,
  RangesPayload,
  StatsPayload,
  SubmitPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

export const getRanges = (): Promise<RangesPayload> => request("/api/ranges");
export const getStats = (): Promise<StatsPayload> => request("/api/stats");
export const getRecords = (): Promise<{ records: PatientRecord[] }> =>
  request("/api/records");
export const getDrift = (): Promise<Record<string, unknown>> => request("/api/drift");

export const postRecord = (payload: SubmitPayload): Promise<PatientRecord> =>
  request("/api/records", { method: "POST", body: JSON.stringify(payload) });

export const patchOutcome = (
  id: string,
  outcome: "survived" | "died",
): Promise<PatientRecord> =>
  request(`/api/records/${id}/outcome`, {
    method: "PATCH",
    body: JSON.stringify({ outcome }),
  });

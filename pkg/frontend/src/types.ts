// Wire types mirroring the service's JSON schemas. All numbers are passed
// through verbatim; the UI never recomputes model math.

export interface FeatureRange {
  low: number;
  high: number;
  unit: string;
}

export interface RangesPayload {
  format: string;
  ranges: Record<string, FeatureRange>;
}

export interface FeatureStats {
  mean: number;
  std: number;
  q1: number;
  median: number;
  q3: number;
  n_observed: number;
  healthy_range?: FeatureRange;
}

export interface StatsPayload {
  format: string;
  n_rows: number;
  prevalence: number;
  features: Record<string, FeatureStats>;
}

export interface Explanation {
  format: string;
  model: string;
  test_id: string;
  feature_names: string[];
  values: number[];
  sentiment_values: number[];
  predicted_class: number;
  config: Record<string, unknown>;
}

export interface ModelOutput {
  probability: number;
  variance?: number;
  confidence?: number;
  explanation?: Explanation;
}

export interface PatientRecord {
  id: string;
  format: string;
  features: Record<string, number>;
  clinician_prediction: "survive" | "die";
  models: { mlp: ModelOutput; vdp: ModelOutput };
  outcome: "survived" | "died" | null;
  cohort_tag: string;
}

export interface SubmitPayload {
  features: Record<string, number>;
  clinician_prediction: "survive" | "die";
  idempotency_key?: string;
}

/** Payload shapes served by the switchpoint HTTP API (schema_version 1). */

export interface CurveRow {
  step_k: string;
  tau: string;
  n: string;
  yes: string;
  estimate: string;
  wilson_lo: string;
  wilson_hi: string;
}

export interface CrossingSummaryPayload {
  pair: string;
  tau50: number | null;
  tau70: number | null;
  bandwidth: number | null;
  tau50_defined: boolean;
  tau70_defined: boolean;
}

export interface CurvePayload {
  schema_version: number;
  pair: string;
  direction: string;
  kind: string;
  scorer_id: string;
  rows: CurveRow[];
  summary: CrossingSummaryPayload;
  monotonicity_violations: number;
  recommended_band: [number, number];
}

export interface TaxonomyContext {
  name: string;
  base: string;
  concept_form: string;
  variants?: { base: string; concept_form: string }[];
}

export interface TaxonomySubcategory {
  name: string;
  question_template: string;
  concepts: string[];
  contexts: TaxonomyContext[];
}

export interface TaxonomyCategory {
  name: string;
  subcategories: TaxonomySubcategory[];
}

export interface TaxonomyPayload {
  schema_version: number;
  version: string;
  hash: string;
  document: { version: string; categories: TaxonomyCategory[] };
}

export interface ManifestInfo {
  id: string;
  status: string;
  created_at: string;
  pairs: string[];
  directions: string[];
  task_count: number;
}

export interface EditReportPayload {
  clip_img: number;
  clip_txt: number;
  clip_dir: number;
  degenerate_direction: boolean;
  tau: number;
  curve_ref: string;
  embedding_id: string;
}

export interface EditJobPayload {
  schema_version: number;
  id: string;
  status: "queued" | "running" | "completed" | "failed";
  step_k?: number;
  tau?: number;
  image_ref?: string;
  base_image_ref?: string;
  outcomes?: Record<string, string>;
  report?: EditReportPayload;
  error?: string;
}

export interface EditProposalPayload {
  schema_version: number;
  manifest_id: string;
  pair: string;
  probability: number;
  step_k: number;
  tau: number;
  predicted_estimate: number | null;
  edit_id?: string;
  status?: string;
}

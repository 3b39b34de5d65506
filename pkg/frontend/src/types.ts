/** Payload shapes of the fitting service (single source of every number shown). */

export type CurveName = "pdf" | "survival" | "hazard" | "cum_hazard";

export const CURVE_NAMES: CurveName[] = ["pdf", "survival", "hazard", "cum_hazard"];

/** One curve: [x, y] pairs; y is null where the survival tail underflowed. */
export type Series = Array<[number, number | null]>;

export type CurvesPayload = Record<CurveName, Series>;

export interface DatasetSummary {
  id: string;
  n: number;
  min: number;
  max: number;
  emp_mean: number;
  emp_var: number;
}

export interface FitDoc {
  structure: string;
  m: number;
  loglik: number;
  aic: number;
  k: number;
  iterations: number;
  converged: boolean;
  seed: number;
  model: Record<string, unknown>;
}

export interface GofDoc {
  a2: number;
  p_value: number;
  method: string;
  n: number;
  emp_mean: number;
  emp_var: number;
  model_mean: number;
  model_var: number;
}

export interface FitPayload {
  fit: FitDoc;
  gof: GofDoc;
  curves: CurvesPayload;
  empirical_cum_hazard: Array<[number, number]>;
}

export interface ComparePayload {
  ocp: { fit: FitDoc; gof: GofDoc };
  erlang: { fit: FitDoc; gof: GofDoc };
  curves: { ocp: CurvesPayload; erlang: CurvesPayload };
  empirical_cum_hazard: Array<[number, number]>;
}

export interface JobStatus {
  job: string;
  status: "running" | "done" | "failed";
  iterations: number;
  loglik: number | null;
  result?: FitPayload;
  error?: string;
}

/** Model description sent to /evaluate (classical or two-zone). */
export interface ModelDoc {
  family?: "phase_type" | "one_cut_point";
  structure: string;
  m: number;
  rates?: number[];
  branch?: number[];
  alpha?: number[];
  cut?: number;
  params?: Record<string, unknown>;
}

export interface EvaluateRequest {
  model: ModelDoc;
  request: { horizon: number; points?: number; curves?: CurveName[] };
}

import type { CurvesPayload, DatasetSummary, FitDoc, GofDoc } from "../src/types.js";

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Canned survival/density values for an exponential model computed
 *  test-side; the client under test must never do this math itself. */
export function exponentialCurves(rate: number, horizon: number,
                                  points = 3): CurvesPayload {
  const xs = Array.from({ length: points },
    (_, i) => (i * horizon) / (points - 1));
  return {
    pdf: xs.map((x) => [x, rate * Math.exp(-rate * x)]),
    survival: xs.map((x) => [x, Math.exp(-rate * x)]),
    hazard: xs.map((x) => [x, rate]),
    cum_hazard: xs.map((x) => [x, rate * x]),
  };
}

export function summaryOf(overrides: Partial<DatasetSummary> = {}): DatasetSummary {
  return {
    id: "ds-1",
    n: 500,
    min: 0.05,
    max: 0.98,
    emp_mean: 0.44649,
    emp_var: 0.0264,
    ...overrides,
  };
}

export function fitDoc(overrides: Partial<FitDoc> = {}): FitDoc {
  return {
    structure: "general",
    m: 4,
    loglik: -120.5,
    aic: 279.0,
    k: 19,
    iterations: 210,
    converged: true,
    seed: 0,
    model: {},
    ...overrides,
  };
}

export function gofDoc(overrides: Partial<GofDoc> = {}): GofDoc {
  return {
    a2: 1.1,
    p_value: 0.31,
    method: "asymptotic",
    n: 500,
    emp_mean: 0.44649,
    emp_var: 0.0264,
    model_mean: 0.4471,
    model_var: 0.0259,
    ...overrides,
  };
}

export function fitPayload(m: number) {
  return {
    fit: fitDoc({ m }),
    gof: gofDoc(),
    curves: exponentialCurves(1.0, 1.0),
    empirical_cum_hazard: [[0, 0], [0.3, 0.4], [0.9, 1.2]] as Array<[number, number]>,
  };
}

export function comparePayload(cut: number) {
  return {
    ocp: { fit: fitDoc({ structure: "ocp_erlang", m: 2, aic: 120.0, k: 2 }),
           gof: gofDoc({ p_value: 0.2442 }) },
    erlang: { fit: fitDoc({ structure: "erlang", m: 2, aic: 140.0, k: 1 }),
              gof: gofDoc({ p_value: 0.0257 }) },
    curves: { ocp: exponentialCurves(1.0, 1.0),
              erlang: exponentialCurves(1.2, 1.0) },
    empirical_cum_hazard: [[0, 0], [cut, 0.8], [0.9, 1.5]] as Array<[number, number]>,
  };
}

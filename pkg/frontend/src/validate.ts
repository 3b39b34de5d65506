import type { ModelDoc } from "./types.js";

export interface FieldError {
  field: string;
  message: string;
}

const ALPHA_TOL = 1e-9;

export const STRUCTURES_WITH_FREE_ALPHA = new Set([
  "hyperexponential",
  "generalized_coxian",
  "cf1",
]);

export const STRUCTURES_WITH_BRANCH = new Set(["coxian", "generalized_coxian"]);

/** Shared-rate structures expose a single rate input regardless of m. */
export const SINGLE_RATE_STRUCTURES = new Set(["exponential", "erlang"]);

/**
 * Client-side mirror of the server's construction invariants; a model is
 * only sent once this list comes back empty.
 */
export function validateModel(model: ModelDoc): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isInteger(model.m) || model.m < 1 || model.m > 64) {
    errors.push({ field: "m", message: "states must lie in 1..64" });
  }
  const rates = model.rates ?? [];
  if (rates.some((r) => !(r > 0) || !Number.isFinite(r))) {
    errors.push({ field: "rates", message: "rates must be positive" });
  }
  if (rates.length !== model.m) {
    errors.push({
      field: "rates",
      message: `needs ${model.m} rate${model.m === 1 ? "" : "s"}`,
    });
  }
  if (SINGLE_RATE_STRUCTURES.has(model.structure)
      && rates.some((r) => r !== rates[0])) {
    errors.push({ field: "rates", message: "uses one shared rate" });
  }
  if (model.structure === "hypoexponential"
      && new Set(rates).size !== rates.length) {
    errors.push({ field: "rates", message: "rates must be pairwise distinct" });
  }
  if (model.structure === "cf1"
      && rates.some((r, i) => i > 0 && r < rates[i - 1])) {
    errors.push({ field: "rates", message: "rates must be nondecreasing" });
  }
  if (STRUCTURES_WITH_BRANCH.has(model.structure) && model.m > 1) {
    const branch = model.branch ?? [];
    if (branch.length !== model.m - 1
        || branch.some((g) => !(g > 0 && g <= 1))) {
      errors.push({
        field: "branch",
        message: `needs ${model.m - 1} branch probabilities in (0, 1]`,
      });
    }
  }
  if (STRUCTURES_WITH_FREE_ALPHA.has(model.structure)) {
    const alpha = model.alpha ?? [];
    if (alpha.length !== model.m) {
      errors.push({ field: "alpha", message: `needs ${model.m} entries` });
    } else if (alpha.some((a) => a < 0)) {
      errors.push({ field: "alpha", message: "entries must be non-negative" });
    } else if (Math.abs(alpha.reduce((s, a) => s + a, 0) - 1) > ALPHA_TOL) {
      errors.push({ field: "alpha", message: "must sum to 1" });
    }
  }
  if (model.family === "one_cut_point" && !(model.cut !== undefined && model.cut > 0)) {
    errors.push({ field: "cut", message: "cut must be positive" });
  }
  return errors;
}

/** Cut-point trials must stay strictly inside the observed range. */
export function validateCut(cut: number, min: number, max: number): FieldError[] {
  if (!(cut > min && cut < max)) {
    return [{
      field: "cut",
      message: `cut must lie strictly inside (${min}, ${max})`,
    }];
  }
  return [];
}

/** Default trial cut: the experimental mean rounded to two decimals. */
export function defaultCut(empMean: number): number {
  return Math.round(empMean * 100) / 100;
}

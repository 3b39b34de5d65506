import type { ApiClient } from "./api.js";
import { Debouncer } from "./debounce.js";
import type { CurvesPayload, ModelDoc } from "./types.js";
import {
  FieldError,
  SINGLE_RATE_STRUCTURES,
  STRUCTURES_WITH_BRANCH,
  STRUCTURES_WITH_FREE_ALPHA,
  validateModel,
} from "./validate.js";

export type ExplorerModule = 1 | 2 | 3 | 4;

/** Live parameter state of the two explorer panels (classical and two-zone). */
export interface ExplorerState {
  activeModule: ExplorerModule;
  structure: string;
  m: number;
  rates: number[];
  rates2: number[]; // second-zone rates (two-zone panel)
  branch: number[];
  alpha: number[];
  cut: number;
  horizon: number; // maximum time of domain (X-axis length)
  points: number;
  lastCurves: CurvesPayload | null;
  lastCurves2: CurvesPayload | null; // unused for classical panels
  fieldErrors: FieldError[];
  requestCount: number;
}

export function initialExplorerState(): ExplorerState {
  return {
    activeModule: 1,
    structure: "erlang",
    m: 2,
    rates: [1.0],
    rates2: [2.0],
    branch: [],
    alpha: [],
    cut: 1.0,
    horizon: 10.0,
    points: 256,
    lastCurves: null,
    lastCurves2: null,
    fieldErrors: [],
    requestCount: 0,
  };
}

/** Resize parameter vectors after an m or structure change; one rate row
 *  per state, with shared-rate structures keeping every row bound to the
 *  same value. */
export function reshapeParameters(state: ExplorerState): ExplorerState {
  const m = state.m;
  const grow = (xs: number[], len: number, fill: number): number[] => {
    const out = xs.slice(0, len);
    while (out.length < len) out.push(fill);
    return out;
  };
  let rates = grow(state.rates, m, state.rates[state.rates.length - 1] ?? 1.0);
  let rates2 = grow(state.rates2, m, state.rates2[state.rates2.length - 1] ?? 1.0);
  if (SINGLE_RATE_STRUCTURES.has(state.structure)) {
    rates = rates.map(() => rates[0]);
    rates2 = rates2.map(() => rates2[0]);
  }
  return {
    ...state,
    rates,
    rates2,
    branch: grow(state.branch, Math.max(m - 1, 0), 1.0),
    alpha: grow(state.alpha, m, 0.0),
  };
}

export function modelDocOf(state: ExplorerState): ModelDoc {
  const doc: ModelDoc = {
    structure: state.structure,
    m: state.m,
    rates: state.rates,
  };
  if (STRUCTURES_WITH_BRANCH.has(state.structure) && state.m > 1) {
    doc.branch = state.branch;
  }
  if (STRUCTURES_WITH_FREE_ALPHA.has(state.structure)) doc.alpha = state.alpha;
  if (state.activeModule === 3) {
    // the two-zone explorer shares one internal structure in both zones
    return {
      family: "one_cut_point",
      structure: state.structure,
      m: state.m,
      cut: state.cut,
      params: { rate1: state.rates[0], rate2: state.rates2[0] },
    };
  }
  return doc;
}

/**
 * Explorer controller: applies a state change, validates locally (invalid
 * parameters are flagged inline and never sent) and re-renders all four
 * curves after a debounced /evaluate round trip.
 */
export class ExplorerController {
  state: ExplorerState;
  private readonly debouncer: Debouncer<CurvesPayload | null>;

  constructor(
    private readonly api: ApiClient,
    debounceMs = 150,
    private readonly onRender: (state: ExplorerState) => void = () => {},
  ) {
    this.state = reshapeParameters(initialExplorerState());
    this.debouncer = new Debouncer(debounceMs);
  }

  /** Apply a partial state change; returns the eventual curve payload
   *  (null when superseded or blocked by validation). */
  update(change: Partial<ExplorerState>): Promise<CurvesPayload | null> {
    const structural = change.m !== undefined || change.structure !== undefined;
    this.state = { ...this.state, ...change };
    if (structural) this.state = reshapeParameters(this.state);
    const model = modelDocOf(this.state);
    this.state.fieldErrors = validateModel(model);
    if (this.state.fieldErrors.length > 0) {
      this.debouncer.cancel();
      this.onRender(this.state);
      return Promise.resolve(null);
    }
    this.onRender(this.state);
    return this.debouncer.schedule(async () => {
      this.state.requestCount += 1;
      const curves = await this.api.evaluate({
        model,
        request: { horizon: this.state.horizon, points: this.state.points },
      });
      this.state.lastCurves = curves;
      this.onRender(this.state);
      return curves;
    }).catch((err) => {
      // a 422 names the violated constraint; surface it inline
      this.state.fieldErrors = [{ field: "server", message: String(err.message ?? err) }];
      this.onRender(this.state);
      return null;
    });
  }
}

import type { ApiClient } from "./api.js";
import type {
  ComparePayload,
  DatasetSummary,
  FitDoc,
  FitPayload,
  GofDoc,
} from "./types.js";
import { defaultCut, validateCut } from "./validate.js";

/** One row of the side-by-side history table (states, distribution,
 *  AD p-value, AIC, plus the payload that produced it). */
export interface HistoryRow {
  label: string;
  structure: string;
  m: number;
  a2: number;
  pValue: number;
  loglik: number;
  aic: number;
  modelMean: number;
  modelVar: number;
  cut?: number;
  payload: FitPayload | ComparePayload;
}

export interface ProgressState {
  active: boolean;
  iterations: number;
  loglik: number | null;
}

/** Upload -> configure -> run -> inspect session for modules 2 and 4. */
export interface FitSessionState {
  dataset: DatasetSummary | null;
  method: "point" | "group";
  structure: string;
  m: number;
  cut: number;
  cutMessage: string | null;
  history: HistoryRow[]; // append-only within a session
  progress: ProgressState;
  error: string | null;
}

function row(label: string, fit: FitDoc, gof: GofDoc,
             payload: FitPayload | ComparePayload, cut?: number): HistoryRow {
  return {
    label,
    structure: fit.structure,
    m: fit.m,
    a2: gof.a2,
    pValue: gof.p_value,
    loglik: fit.loglik,
    aic: fit.aic,
    modelMean: gof.model_mean,
    modelVar: gof.model_var,
    cut,
    payload,
  };
}

export class FitSession {
  state: FitSessionState = {
    dataset: null,
    method: "point",
    structure: "general",
    m: 2,
    cut: 0,
    cutMessage: null,
    history: [],
    progress: { active: false, iterations: 0, loglik: null },
    error: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly onRender: (state: FitSessionState) => void = () => {},
  ) {}

  async upload(file: Blob | string): Promise<DatasetSummary> {
    const summary = await this.api.uploadDataset(file);
    this.state.dataset = summary;
    // trial cut defaults to the experimental mean with two decimals
    this.state.cut = defaultCut(summary.emp_mean);
    this.state.cutMessage = null;
    this.onRender(this.state);
    return summary;
  }

  configure(change: Partial<Pick<FitSessionState, "method" | "structure" | "m">>): void {
    Object.assign(this.state, change);
    this.onRender(this.state);
  }

  /** Drag handler for the cut marker: values outside the data range snap
   *  back to the previous position with an inline message. */
  moveCut(cut: number): boolean {
    const data = this.state.dataset;
    if (!data) return false;
    const errors = validateCut(cut, data.min, data.max);
    if (errors.length > 0) {
      this.state.cutMessage = errors[0].message;
      this.onRender(this.state);
      return false;
    }
    this.state.cut = cut;
    this.state.cutMessage = null;
    this.onRender(this.state);
    return true;
  }

  /** Run a classical fit and append its row to the history. */
  async runFit(edges?: number[]): Promise<FitPayload | null> {
    const data = this.state.dataset;
    if (!data) {
      this.state.error = "load a dataset first";
      this.onRender(this.state);
      return null;
    }
    this.state.error = null;
    this.state.progress = { active: true, iterations: 0, loglik: null };
    this.onRender(this.state);
    try {
      const body: Record<string, unknown> = {
        dataset_id: data.id,
        method: this.state.method,
        structure: this.state.structure,
        m: this.state.m,
        opts: { seed: 0 },
      };
      if (this.state.method === "group" && edges) body.edges = edges;
      const payload = await this.api.fit(body, (iterations, loglik) => {
        this.state.progress = { active: true, iterations, loglik };
        this.onRender(this.state);
      });
      this.state.history.push(row(
        `${this.state.structure} m=${payload.fit.m}`,
        payload.fit, payload.gof, payload));
      return payload;
    } catch (err) {
      this.state.error = String((err as Error).message ?? err);
      return null; // history unchanged on failure
    } finally {
      this.state.progress = { active: false, iterations: this.state.progress.iterations, loglik: this.state.progress.loglik };
      this.onRender(this.state);
    }
  }

  /** One cut-point trial: compares the two-zone fit with the classical
   *  single-rate fit and appends both rows. */
  async runOcpTrial(cut?: number): Promise<ComparePayload | null> {
    const data = this.state.dataset;
    if (!data) {
      this.state.error = "load a dataset first";
      this.onRender(this.state);
      return null;
    }
    const trialCut = cut ?? this.state.cut;
    if (!this.moveCut(trialCut)) return null;
    this.state.error = null;
    try {
      const payload = await this.api.compareOcp({
        dataset_id: data.id,
        m: this.state.m,
        cut: trialCut,
        opts: { seed: 0 },
      });
      this.state.history.push(
        row(`one cut-point m=${payload.ocp.fit.m} a=${trialCut}`,
            payload.ocp.fit, payload.ocp.gof, payload, trialCut),
        row(`single-rate chain m=${payload.erlang.fit.m}`,
            payload.erlang.fit, payload.erlang.gof, payload),
      );
      return payload;
    } catch (err) {
      this.state.error = String((err as Error).message ?? err);
      return null;
    } finally {
      this.onRender(this.state);
    }
  }
}

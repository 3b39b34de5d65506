import { ApiClient } from "./api.js";
import { ExplorerController, ExplorerState } from "./explorer.js";
import { FitSession, FitSessionState } from "./fitsession.js";
import { PlotLine, renderPlot } from "./plot.js";
import { CURVE_NAMES, CurveName, CurvesPayload } from "./types.js";
import { SINGLE_RATE_STRUCTURES, STRUCTURES_WITH_BRANCH, STRUCTURES_WITH_FREE_ALPHA } from "./validate.js";

const api = new ApiClient((window as { PHASEFIT_URL?: string }).PHASEFIT_URL
  ?? "http://127.0.0.1:8741");

const CURVE_TITLES: Record<CurveName, string> = {
  pdf: "density f",
  survival: "survival R",
  hazard: "hazard h",
  cum_hazard: "cumulative hazard H",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(v: number | null | undefined, digits = 4): string {
  if (v === null || v === undefined || !Number.isFinite(v)) return "–";
  return Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-3 && v !== 0)
    ? v.toExponential(3) : v.toPrecision(digits);
}

function curveGrid(curves: CurvesPayload | null, markerX?: number,
                   empirical?: Array<[number, number]>,
                   secondary?: CurvesPayload): string {
  if (!curves) return '<p class="hint">adjust parameters to draw the curves</p>';
  return CURVE_NAMES.map((name) => {
    const lines: PlotLine[] = [{ series: curves[name], cssClass: "curve-main" }];
    if (secondary) lines.push({ series: secondary[name], cssClass: "curve-alt" });
    if (name === "cum_hazard" && empirical) {
      lines.push({ series: empirical, cssClass: "curve-empirical", step: true });
    }
    return renderPlot(CURVE_TITLES[name], lines, undefined, markerX);
  }).join("");
}

function errorList(errors: Array<{ field: string; message: string }>): string {
  return errors.map((e) => `<span class="field-error">${e.field}: ${e.message}</span>`)
    .join(" ");
}

// ---------------------------------------------------------------- module 1+3

function numberInputs(containerId: string, values: number[], prefix: string,
                      onChange: (index: number, value: number) => void): void {
  const container = el<HTMLDivElement>(containerId);
  container.innerHTML = "";
  values.forEach((value, index) => {
    const label = document.createElement("label");
    label.textContent = `${prefix}${values.length > 1 ? index + 1 : ""}`;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "0.1";
    input.value = String(value);
    input.addEventListener("input", () => onChange(index, Number(input.value)));
    label.appendChild(input);
    container.appendChild(label);
  });
}

function wireExplorer(moduleId: 1 | 3): ExplorerController {
  const suffix = moduleId === 1 ? "m1" : "m3";
  const controller = new ExplorerController(api, 150, (state) => renderExplorer(state));

  const structureSel = el<HTMLSelectElement>(`${suffix}-structure`);
  const statesInput = el<HTMLInputElement>(`${suffix}-states`);
  const horizonInput = el<HTMLInputElement>(`${suffix}-horizon`);

  function renderExplorer(state: ExplorerState): void {
    el(`${suffix}-errors`).innerHTML = errorList(state.fieldErrors);
    el(`${suffix}-plots`).innerHTML = curveGrid(
      state.lastCurves, moduleId === 3 ? state.cut : undefined);
    const showBranch = STRUCTURES_WITH_BRANCH.has(state.structure) && state.m > 1;
    const showAlpha = STRUCTURES_WITH_FREE_ALPHA.has(state.structure);
    const shared = SINGLE_RATE_STRUCTURES.has(state.structure);
    numberInputs(`${suffix}-rates`, state.rates, "λ", (i, v) => {
      const rates = shared
        ? controller.state.rates.map(() => v)
        : controller.state.rates.map((r, j) => (j === i ? v : r));
      void controller.update({ rates });
    });
    if (moduleId === 3) {
      numberInputs(`${suffix}-rates2`, state.rates2, "λ′", (i, v) => {
        const rates2 = shared
          ? controller.state.rates2.map(() => v)
          : controller.state.rates2.map((r, j) => (j === i ? v : r));
        void controller.update({ rates2 });
      });
    }
    const branchBox = el(`${suffix}-branch-box`);
    branchBox.style.display = showBranch ? "" : "none";
    if (showBranch) {
      numberInputs(`${suffix}-branch`, state.branch, "g",
        (i, v) => { const branch = [...controller.state.branch]; branch[i] = v; void controller.update({ branch }); });
    }
    const alphaBox = el(`${suffix}-alpha-box`);
    alphaBox.style.display = showAlpha ? "" : "none";
    if (showAlpha) {
      numberInputs(`${suffix}-alpha`, state.alpha, "α",
        (i, v) => { const alpha = [...controller.state.alpha]; alpha[i] = v; void controller.update({ alpha }); });
    }
  }

  structureSel.addEventListener("change", () => {
    const structure = structureSel.value;
    const alpha = STRUCTURES_WITH_FREE_ALPHA.has(structure)
      ? Array.from({ length: controller.state.m }, (_, i) => (i === 0 ? 1 : 0))
      : [];
    void controller.update({ structure, alpha });
  });
  statesInput.addEventListener("input", () => {
    const m = Number(statesInput.value);
    const alpha = STRUCTURES_WITH_FREE_ALPHA.has(controller.state.structure)
      ? Array.from({ length: m }, (_, i) => (i === 0 ? 1 : 0)) : [];
    void controller.update({ m, alpha });
  });
  horizonInput.addEventListener("input", () => {
    void controller.update({ horizon: Number(horizonInput.value) });
  });
  if (moduleId === 3) {
    controller.state.activeModule = 3;
    controller.state.structure = "erlang";
    const cutInput = el<HTMLInputElement>("m3-cut");
    cutInput.addEventListener("input", () => {
      void controller.update({ cut: Number(cutInput.value) });
    });
  }
  void controller.update({});
  return controller;
}

// ---------------------------------------------------------------- module 2+4

function historyTable(state: FitSessionState): string {
  if (state.history.length === 0) return '<p class="hint">no fits yet</p>';
  const rows = state.history.map((r, i) => `<tr>
    <td>${i + 1}</td><td>${r.m}</td><td>${r.label}</td>
    <td>${fmt(r.pValue)}</td><td>${fmt(r.aic, 7)}</td><td>${fmt(r.loglik, 7)}</td>
    <td>${fmt(r.modelMean)}</td><td>${fmt(r.modelVar)}</td></tr>`).join("");
  return `<table class="history"><thead><tr>
    <th>#</th><th>states</th><th>distribution</th><th>AD p-value</th>
    <th>AIC</th><th>logL</th><th>model mean</th><th>model var</th>
    </tr></thead><tbody>${rows}</tbody></table>`;
}

function summaryCard(state: FitSessionState): string {
  const d = state.dataset;
  if (!d) return '<p class="hint">upload a single-column .txt/.csv file (first row = header)</p>';
  return `<dl class="summary"><dt>n</dt><dd>${d.n}</dd>
    <dt>min</dt><dd>${fmt(d.min)}</dd><dt>max</dt><dd>${fmt(d.max)}</dd>
    <dt>mean</dt><dd>${fmt(d.emp_mean)}</dd><dt>variance</dt><dd>${fmt(d.emp_var)}</dd></dl>`;
}

function wireFitModule(): FitSession {
  const session = new FitSession(api, (state) => render(state));

  function render(state: FitSessionState): void {
    el("m2-summary").innerHTML = summaryCard(state);
    el("m2-history").innerHTML = historyTable(state);
    el("m2-error").textContent = state.error ?? "";
    const progress = el<HTMLDivElement>("m2-progress");
    if (state.progress.active) {
      progress.style.display = "";
      progress.textContent = `fitting… iteration ${state.progress.iterations}`
        + (state.progress.loglik !== null ? `, logL ${fmt(state.progress.loglik, 8)}` : "");
    } else {
      progress.style.display = "none";
    }
    const last = state.history[state.history.length - 1];
    if (last && "curves" in last.payload) {
      el("m2-plots").innerHTML = curveGrid(
        last.payload.curves as CurvesPayload, undefined,
        last.payload.empirical_cum_hazard);
    }
  }

  el<HTMLInputElement>("m2-file").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file) void session.upload(file).catch((err) => {
      session.state.error = String(err.message ?? err);
      render(session.state);
    });
  });
  el<HTMLButtonElement>("m2-run").addEventListener("click", () => {
    session.configure({
      method: el<HTMLSelectElement>("m2-method").value as "point" | "group",
      structure: el<HTMLSelectElement>("m2-structure").value,
      m: Number(el<HTMLInputElement>("m2-states").value),
    });
    const edges = session.state.method === "group" && session.state.dataset
      ? Array.from({ length: 21 }, (_, i) => (i * session.state.dataset!.max * 1.0001) / 20)
      : undefined;
    void session.runFit(edges);
  });
  render(session.state);
  return session;
}

function wireOcpModule(): FitSession {
  const session = new FitSession(api, (state) => render(state));
  session.configure({ structure: "erlang", m: 2 });

  function render(state: FitSessionState): void {
    el("m4-summary").innerHTML = summaryCard(state);
    el("m4-history").innerHTML = historyTable(state);
    el("m4-error").textContent = state.error ?? state.cutMessage ?? "";
    el<HTMLInputElement>("m4-cut").value = String(state.cut);
    const last = [...state.history].reverse()
      .find((r) => "ocp" in r.payload);
    if (last && "ocp" in last.payload) {
      const payload = last.payload;
      el("m4-plots").innerHTML = curveGrid(
        payload.curves.ocp, state.cut, payload.empirical_cum_hazard,
        payload.curves.erlang);
    } else if (state.dataset) {
      el("m4-plots").innerHTML = renderPlot("experimental cumulative hazard",
        [{ series: [], cssClass: "curve-main" }], undefined, state.cut);
    }
  }

  el<HTMLInputElement>("m4-file").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file) void session.upload(file).catch((err) => {
      session.state.error = String(err.message ?? err);
      render(session.state);
    });
  });
  el<HTMLInputElement>("m4-cut").addEventListener("change", () => {
    session.moveCut(Number(el<HTMLInputElement>("m4-cut").value));
  });
  el<HTMLButtonElement>("m4-run").addEventListener("click", () => {
    session.configure({ m: Number(el<HTMLInputElement>("m4-states").value) });
    void session.runOcpTrial(Number(el<HTMLInputElement>("m4-cut").value));
  });
  render(session.state);
  return session;
}

// ------------------------------------------------------------------- tabs

function wireTabs(): void {
  const tabs = Array.from(document.querySelectorAll<HTMLButtonElement>(".tab"));
  tabs.forEach((tab) => {
    tab.addEventListener("click", () => {
      tabs.forEach((other) => other.classList.toggle("active", other === tab));
      document.querySelectorAll<HTMLElement>(".module").forEach((panel) => {
        panel.style.display = panel.id === tab.dataset.target ? "" : "none";
      });
    });
  });
}

export function main(): void {
  wireTabs();
  wireExplorer(1);
  wireFitModule();
  wireExplorer(3);
  wireOcpModule();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", main);
}

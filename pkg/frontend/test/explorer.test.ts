import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ExplorerController, modelDocOf, reshapeParameters } from "../src/explorer.js";
import type { EvaluateRequest } from "../src/types.js";
import { exponentialCurves, jsonResponse } from "./helpers.js";

function clientWith(fetchImpl: (url: string, init?: RequestInit) => Promise<Response>) {
  return new ApiClient("http://test", fetchImpl, 0);
}

describe("explorer state", () => {
  it("growing m adds a rate row bound to the shared rate", () => {
    const state = reshapeParameters({
      ...reshapeParameters({
        activeModule: 1 as const, structure: "erlang", m: 2,
        rates: [1.5], rates2: [2.0], branch: [], alpha: [], cut: 1,
        horizon: 10, points: 64, lastCurves: null, lastCurves2: null,
        fieldErrors: [], requestCount: 0,
      }),
      m: 3,
    });
    expect(state.rates).toEqual([1.5, 1.5, 1.5]);
  });

  it("module-3 state maps to a two-zone model document", () => {
    const base = reshapeParameters({
      activeModule: 3 as const, structure: "erlang", m: 2,
      rates: [1.0], rates2: [2.0], branch: [], alpha: [], cut: 0.5,
      horizon: 5, points: 64, lastCurves: null, lastCurves2: null,
      fieldErrors: [], requestCount: 0,
    });
    const doc = modelDocOf(base);
    expect(doc.family).toBe("one_cut_point");
    expect(doc.cut).toBe(0.5);
    expect(doc.params).toEqual({ rate1: 1.0, rate2: 2.0 });
  });
});

describe("ExplorerController", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("a burst of parameter changes triggers exactly one evaluate call", async () => {
    const fetchImpl = vi.fn(async (_url: string, init?: RequestInit) => {
      const request = JSON.parse(String(init?.body)) as EvaluateRequest;
      const rate = request.model.rates?.[0] ?? 1.0;
      return jsonResponse({ curves: exponentialCurves(rate, request.request.horizon) });
    });
    const controller = new ExplorerController(clientWith(fetchImpl), 100);
    void controller.update({ structure: "exponential", m: 1, rates: [1.2] });
    void controller.update({ rates: [1.6] });
    const final = controller.update({ rates: [2.0] });
    await vi.advanceTimersByTimeAsync(400);
    expect(fetchImpl).toHaveBeenCalledTimes(1);
    const curves = await final;
    expect(curves).not.toBeNull();
    expect(controller.state.requestCount).toBe(1);
  });

  it("moving the rate from 1 to 2 moves survival(1) from e^-1 to e^-2", async () => {
    const fetchImpl = vi.fn(async (_url: string, init?: RequestInit) => {
      const request = JSON.parse(String(init?.body)) as EvaluateRequest;
      const rate = request.model.rates?.[0] ?? 1.0;
      return jsonResponse({ curves: exponentialCurves(rate, request.request.horizon, 2) });
    });
    const controller = new ExplorerController(clientWith(fetchImpl), 10);
    void controller.update({ structure: "exponential", m: 1, rates: [1.0], horizon: 1.0 });
    await vi.advanceTimersByTimeAsync(100);
    const at1 = controller.state.lastCurves!.survival[1];
    expect(at1[0]).toBe(1.0);
    expect(at1[1]).toBeCloseTo(Math.exp(-1), 12);

    void controller.update({ rates: [2.0] });
    await vi.advanceTimersByTimeAsync(100);
    const at2 = controller.state.lastCurves!.survival[1];
    expect(at2[1]).toBeCloseTo(Math.exp(-2), 12);
  });

  it("an alpha that does not sum to 1 is flagged inline without a request", async () => {
    const fetchImpl = vi.fn();
    const controller = new ExplorerController(clientWith(fetchImpl), 10);
    const result = await controller.update({
      structure: "hyperexponential", m: 2, rates: [1.0, 2.0],
      alpha: [0.5, 0.4],
    });
    await vi.advanceTimersByTimeAsync(100);
    expect(result).toBeNull();
    expect(fetchImpl).not.toHaveBeenCalled();
    expect(controller.state.fieldErrors).toEqual([
      { field: "alpha", message: "must sum to 1" }]);
  });

  it("a server 422 shows up as a field-level message", async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ detail: "alpha must sum to 1" }, 422));
    const controller = new ExplorerController(clientWith(fetchImpl), 10);
    const result = controller.update({ structure: "erlang", m: 2, rates: [1.0, 1.0] });
    await vi.advanceTimersByTimeAsync(100);
    expect(await result).toBeNull();
    expect(controller.state.fieldErrors[0].message).toContain("alpha must sum to 1");
  });
});

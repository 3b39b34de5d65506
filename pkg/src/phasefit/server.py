"""HTTP fitting service: dataset upload, curve evaluation, fitting, comparison.

Local-tool posture: loopback binding by default, no authentication, volatile
in-memory session state. Fits whose estimated work exceeds the job threshold
run on a bounded worker pool and report progress through /jobs/{id}.
"""

from __future__ import annotations

import os
import threading
import uuid
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import dataio, fit, gof, matfun, ocp, phd
from .errors import PhasefitError

MAX_UPLOAD_BYTES = 8 * 1024 * 1024
STORE_CAPACITY = 64
_EST_COEFF = 5e-8  # seconds per observation * (2m)^2 * iteration


def _thread_count() -> int:
    env = os.environ.get("PHASEFIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class SessionStore:
    """LRU map of opaque ids to uploaded datasets."""

    def __init__(self, capacity: int = STORE_CAPACITY):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: OrderedDict[str, dataio.Dataset] = OrderedDict()

    def put(self, dataset: dataio.Dataset) -> str:
        dataset_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._items[dataset_id] = dataset
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
        return dataset_id

    def get(self, dataset_id: str) -> dataio.Dataset | None:
        with self._lock:
            dataset = self._items.get(dataset_id)
            if dataset is not None:
                self._items.move_to_end(dataset_id)
            return dataset


class JobRegistry:
    """Progress and results of fits running on the worker pool."""

    def __init__(self, workers: int):
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}
        self.pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, work) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = {"status": "running", "iterations": 0,
                                  "loglik": None, "result": None, "error": None}

        def progress(iteration, loglik):
            with self._lock:
                job = self._jobs[job_id]
                job["iterations"] = int(iteration)
                job["loglik"] = float(loglik)

        def runner():
            try:
                result = work(progress)
                with self._lock:
                    self._jobs[job_id].update(status="done", result=result)
            except Exception as exc:
                with self._lock:
                    self._jobs[job_id].update(
                        status="failed", error=f"{type(exc).__name__}: {exc}")

        self.pool.submit(runner)
        return job_id

    def snapshot(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job is not None else None


def _doc(tree, status: int = 200) -> Response:
    return Response(content=dataio.dumps(tree), status_code=status,
                    media_type="application/json")


def _error(status: int, message: str) -> Response:
    return _doc({"schema": dataio.SCHEMA, "kind": "error", "detail": message},
                status)


def _dataset_summary(dataset_id: str, dataset: dataio.Dataset) -> dict:
    emp_mean, emp_var = gof.empirical_moments(dataset)
    return {
        "schema": dataio.SCHEMA,
        "kind": "dataset",
        "id": dataset_id,
        "n": dataset.n,
        "min": float(dataset.values.min()),
        "max": float(dataset.values.max()),
        "emp_mean": emp_mean,
        "emp_var": emp_var,
    }


def _parse_opts(body: dict) -> fit.FitOptions:
    opts = body.get("opts") or {}
    return fit.FitOptions(
        max_iter=int(opts.get("max_iter", 2000)),
        rel_tol=float(opts.get("rel_tol", 1e-8)),
        restarts=int(opts.get("restarts", 5)),
        seed=int(opts.get("seed", body.get("seed", 0))),
    )


def _estimated_seconds(n: int, m: int, opts: fit.FitOptions) -> float:
    iters = min(opts.max_iter, 500)
    return opts.restarts * iters * n * (4 * m * m + 400) * _EST_COEFF


def _fit_payload(data: dataio.Dataset, result: fit.FitResult) -> dict:
    report = gof.gof_report(data, result.model)
    horizon = 1.05 * float(data.values.max())
    req = dataio.PlotRequest(horizon=horizon, points=256)
    return {
        "schema": dataio.SCHEMA,
        "kind": "fit",
        "fit": result.to_doc(),
        "gof": report.to_doc(),
        "curves": {name: [[x, y] for x, y in series]
                   for name, series in dataio.plot_series(result.model, req).items()},
        "empirical_cum_hazard":
            [[float(t), float(h)] for t, h in gof.empirical_cum_hazard(data)],
    }


def create_app(job_threshold_seconds: float = 1.0,
               store_capacity: int = STORE_CAPACITY,
               max_upload: int = MAX_UPLOAD_BYTES) -> FastAPI:
    app = FastAPI(title="phasefit", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(store_capacity)
    jobs = JobRegistry(_thread_count())
    app.state.store = store
    app.state.jobs = jobs

    async def _read_body(request: Request) -> dict:
        raw = await request.body()
        return dataio.loads(raw.decode("utf-8"))

    @app.post("/datasets")
    async def upload_dataset(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("file")
            if upload is None:
                return _error(422, "multipart upload needs a 'file' field")
            body = await upload.read()
        else:
            body = await request.body()
        if len(body) > max_upload:
            return _error(413, f"upload exceeds {max_upload} bytes")
        try:
            dataset = dataio.read_dataset(body)
        except PhasefitError as exc:
            return _error(422, str(exc))
        dataset_id = store.put(dataset)
        return _doc(_dataset_summary(dataset_id, dataset))

    @app.post("/evaluate")
    async def evaluate(request: Request):
        try:
            body = await _read_body(request)
            model = dataio.model_from_doc(body.get("model", body))
            req_body = body.get("request") or {}
            horizon = req_body.get("horizon")
            if horizon is None:
                if isinstance(model, ocp.OneCutPointPhaseType):
                    horizon = 5.0 * ocp.ocp_moments(model)[0]
                else:
                    horizon = phd.default_horizon(model)
            req = dataio.PlotRequest(
                horizon=float(horizon),
                points=int(req_body.get("points", 512)),
                curves=tuple(req_body.get("curves", dataio.CURVES)),
            )
            series = dataio.plot_series(model, req)
        except (PhasefitError, KeyError, TypeError, ValueError) as exc:
            return _error(422, str(exc) or type(exc).__name__)
        return _doc({
            "schema": dataio.SCHEMA,
            "kind": "curves",
            "curves": {name: [[x, y] for x, y in s] for name, s in series.items()},
        })

    def _run_fit(body: dict, data: dataio.Dataset, opts: fit.FitOptions, progress):
        method = body.get("method", "point")
        structure = body.get("structure", "general")
        m = int(body.get("m", body.get("states", 2)))
        if method == "point":
            result = fit.em_fit_point(data, structure, m, opts, progress)
        elif method == "group":
            edges = np.asarray(body["edges"], dtype=float)
            counts, _ = np.histogram(data.values, bins=edges)
            tail = int(body.get("truncated", 0)) + int(np.sum(data.values > edges[-1]))
            grouped = dataio.GroupedDataset(edges, counts,
                                            right_truncated_count=tail)
            result = fit.em_fit_group(grouped, structure, m, opts, progress)
        else:
            raise PhasefitError(f"unknown method {method!r}")
        return _fit_payload(data, result)

    @app.post("/fit")
    async def fit_endpoint(request: Request):
        try:
            body = await _read_body(request)
        except Exception as exc:
            return _error(422, f"bad request body: {exc}")
        dataset_id = body.get("dataset_id")
        data = store.get(dataset_id) if dataset_id else None
        if data is None:
            return _error(404, f"unknown dataset id {dataset_id!r}")
        try:
            opts = _parse_opts(body)
            m = int(body.get("m", body.get("states", 2)))
            if m < 1 or m > matfun.MAX_ORDER:
                return _error(422, f"m must lie in [1, {matfun.MAX_ORDER}]")
        except (PhasefitError, ValueError) as exc:
            return _error(422, str(exc))
        if _estimated_seconds(data.n, m, opts) > job_threshold_seconds:
            job_id = jobs.submit(lambda progress: _run_fit(body, data, opts, progress))
            return _doc({"schema": dataio.SCHEMA, "kind": "job",
                         "job": job_id, "status": "running"}, 202)
        try:
            return _doc(_run_fit(body, data, opts, None))
        except PhasefitError as exc:
            return _error(422, str(exc))
        except Exception as exc:
            return _error(500, f"{type(exc).__name__}: {exc}")

    @app.post("/fit-ocp/compare")
    async def compare_endpoint(request: Request):
        try:
            body = await _read_body(request)
        except Exception as exc:
            return _error(422, f"bad request body: {exc}")
        dataset_id = body.get("dataset_id")
        data = store.get(dataset_id) if dataset_id else None
        if data is None:
            return _error(404, f"unknown dataset id {dataset_id!r}")
        try:
            opts = _parse_opts(body)
            m = int(body.get("m", body.get("states", 2)))
            cut = float(body["cut"])
            (classical, gof_c), (two_zone, gof_o), emp = fit.compare_ocp(
                data, m, cut, opts)
        except KeyError as exc:
            return _error(422, f"missing field {exc}")
        except PhasefitError as exc:
            return _error(422, str(exc))
        except Exception as exc:
            return _error(500, f"{type(exc).__name__}: {exc}")
        horizon = 1.05 * float(data.values.max())
        req = dataio.PlotRequest(horizon=horizon, points=256)
        return _doc({
            "schema": dataio.SCHEMA,
            "kind": "ocp_compare",
            "ocp": {"fit": two_zone.to_doc(), "gof": gof_o.to_doc()},
            "erlang": {"fit": classical.to_doc(), "gof": gof_c.to_doc()},
            "curves": {
                "ocp": {name: [[x, y] for x, y in s] for name, s in
                        dataio.plot_series(two_zone.model, req).items()},
                "erlang": {name: [[x, y] for x, y in s] for name, s in
                           dataio.plot_series(classical.model, req).items()},
            },
            "empirical_cum_hazard": [[float(t), float(h)] for t, h in emp],
        })

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str):
        snap = jobs.snapshot(job_id)
        if snap is None:
            return _error(404, f"unknown job id {job_id!r}")
        out = {"schema": dataio.SCHEMA, "kind": "job", "job": job_id,
               "status": snap["status"], "iterations": snap["iterations"],
               "loglik": snap["loglik"]}
        if snap["status"] == "done":
            out["result"] = snap["result"]
        if snap["status"] == "failed":
            out["error"] = snap["error"]
        return _doc(out)

    return app

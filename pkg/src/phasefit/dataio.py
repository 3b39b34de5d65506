"""Dataset ingestion, plot-series emission, and the shared document format.

Input files follow the single-column convention: one header line (quoted or
bare, always discarded), then one positive decimal per line with '.' as the
decimal separator.

Documents (models, fit results, reports) are rendered as versioned,
human-readable JSON-compatible text. Floats are written with 17 significant
digits so that values round-trip bit-exactly; the non-finite values are the
quoted tokens "inf", "-inf" and "nan", which the reader converts back to
floats (those three strings are reserved by the format).
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ocp as ocp_mod
from . import phd
from .errors import (EmptyDataset, FormatError, InvalidData, InvalidSpec,
                     IoError)

SCHEMA = "phasefit/1"

CURVES = ("pdf", "survival", "hazard", "cum_hazard")


@dataclass
class Dataset:
    """Exact positive observations with optional positive weights."""

    values: np.ndarray
    weights: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise EmptyDataset("dataset has no observations")
        if not np.all(np.isfinite(v)):
            idx = int(np.nonzero(~np.isfinite(v))[0][0])
            raise InvalidData(f"observation {idx} is not finite", index=idx)
        if np.any(v <= 0):
            idx = int(np.nonzero(v <= 0)[0][0])
            raise InvalidData(f"observation {idx} is not positive", index=idx)
        w = self.weights
        w = np.ones(v.size) if w is None else np.asarray(w, dtype=float).reshape(-1)
        if w.size != v.size:
            raise InvalidData("weights length differs from values length")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise InvalidData("weights must be positive and finite")
        self.values = v
        self.weights = w

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass
class GroupedDataset:
    """Binned counts over (edges[i-1], edges[i]] with optional tail count."""

    edges: np.ndarray
    counts: np.ndarray
    right_truncated_count: int | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float).reshape(-1)
        c = np.asarray(self.counts, dtype=float).reshape(-1)
        if e.size < 1 or e[0] != 0.0:
            raise InvalidData("bin edges must start at 0")
        if e.size > 1 and np.isinf(e[-1]):
            # fold an explicit infinite last bin into the truncation count
            extra = int(c[-1]) if c.size else 0
            self.right_truncated_count = (self.right_truncated_count or 0) + extra
            e, c = e[:-1], c[:-1]
        if not np.all(np.isfinite(e)):
            raise InvalidData("bin edges must be finite")
        if np.any(np.diff(e) <= 0):
            raise InvalidData("bin edges must be strictly increasing")
        if c.size != e.size - 1:
            raise InvalidData("need exactly one count per bin")
        if np.any(c < 0) or np.any(c != np.round(c)):
            raise InvalidData("counts must be non-negative integers")
        tail = int(self.right_truncated_count or 0)
        if tail < 0:
            raise InvalidData("truncation count must be non-negative")
        if c.sum() + tail < 1:
            raise InvalidData("dataset has no observations")
        self.edges = e
        self.counts = c.astype(int)
        self.right_truncated_count = tail if self.right_truncated_count is not None else None

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + int(self.right_truncated_count or 0)


@dataclass
class PlotRequest:
    """Uniform evaluation grid over [0, horizon] for the chosen curves."""

    horizon: float
    points: int = 512
    curves: tuple[str, ...] = CURVES

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidSpec("horizon must be positive")
        if self.points < 2:
            raise InvalidSpec("points must be >= 2")
        bad = [c for c in self.curves if c not in CURVES]
        if bad:
            raise InvalidSpec(f"unknown curves: {bad}")
        self.curves = tuple(self.curves)


_COMMA_DECIMAL = re.compile(r"^[+-]?\d+,\d+$")
_SEPARATORS = (",", ";", "\t")


def _looks_numeric(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def read_dataset(source) -> Dataset:
    """Parse a single-column text file (first row = header) into a Dataset."""
    if isinstance(source, (str, Path)):
        name = str(source)
        try:
            text = Path(source).read_text(encoding="utf-8-sig")
        except OSError as exc:
            raise IoError(f"cannot read {name}: {exc}") from exc
    elif isinstance(source, bytes):
        name = "<bytes>"
        text = source.decode("utf-8-sig")
    else:
        name = getattr(source, "name", "<stream>")
        raw = source.read()
        text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw

    lines = text.splitlines()
    if not lines:
        raise EmptyDataset("file is empty")
    body = lines[1:]  # the first line is always the header
    values = []
    for lineno, raw_line in enumerate(body, start=2):
        line = raw_line.strip()
        if not line:
            continue
        if _COMMA_DECIMAL.match(line):
            raise FormatError(
                f"line {lineno}: decimal separator must be '.'")
        for sep in _SEPARATORS:
            if sep in line:
                parts = [p.strip() for p in line.split(sep)]
                numeric = [p for p in parts if p and _looks_numeric(p)]
                if len(numeric) >= 2:
                    raise FormatError(f"line {lineno}: single column required")
        try:
            value = float(line)
        except ValueError:
            raise FormatError(f"line {lineno}: {line!r} is not a decimal number") from None
        if not np.isfinite(value):
            raise InvalidData(f"line {lineno}: value is not finite", index=lineno)
        if value <= 0:
            raise InvalidData(f"line {lineno}: observations must be positive",
                              index=lineno)
        values.append(value)
    if not values:
        raise EmptyDataset("no observations after the header")
    return Dataset(np.array(values), source=name)


def write_dataset(values, dest, header: str = "x") -> None:
    """Write a single-column file readable by read_dataset."""
    lines = [f'"{header}"']
    lines.extend(_float_repr(float(v)) for v in np.asarray(values, float).reshape(-1))
    _write_text(dest, "\n".join(lines) + "\n")


def rotterdam_subset(path) -> Dataset:
    """Recurrence-to-death times from a CSV export of the Rotterdam cohort.

    Keeps patients with both the recurrence and the death indicator set and
    uses days-to-death as the observation.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        cols = {name.strip().strip('"').lower(): name for name in reader.fieldnames or []}
        for required in ("recur", "death", "dtime"):
            if required not in cols:
                raise FormatError(f"column {required!r} not found in {path}")
        values = []
        for row in reader:
            if int(float(row[cols["recur"]])) == 1 and int(float(row[cols["death"]])) == 1:
                values.append(float(row[cols["dtime"]]))
    if not values:
        raise EmptyDataset("no rows matched the subset rule")
    return Dataset(np.array(values), source=str(path))


# --------------------------------------------------------------------------
# plot series


def plot_series(model, req: PlotRequest) -> dict[str, list]:
    """Evaluate the requested curves on a uniform grid over [0, horizon].

    Two-zone models get the cut time injected into the grid; at that point
    the density and hazard series carry both one-sided values. Points where
    the survival tail underflowed are emitted as None rather than raised.
    """
    grid = np.linspace(0.0, req.horizon, req.points)
    is_ocp = isinstance(model, ocp_mod.OneCutPointPhaseType)
    cut_idx = None
    if is_ocp and 0.0 < model.cut <= req.horizon:
        grid = np.unique(np.concatenate((grid, [model.cut])))
        cut_idx = int(np.searchsorted(grid, model.cut))

    if is_ocp:
        surv, dens = ocp_mod._zone_arrays(model, grid)
    else:
        surv, dens = phd.survival_pdf_arrays(model, grid)

    with np.errstate(divide="ignore", invalid="ignore"):
        haz = np.where(surv > 0.0, dens / np.where(surv > 0, surv, 1.0), np.nan)
        cum = np.where(surv > 0.0, -np.log(np.where(surv > 0, surv, 1.0)), np.nan)

    def series(ys, two_sided_pair=None):
        out = []
        for i, (x, y) in enumerate(zip(grid, ys)):
            if two_sided_pair is not None and i == cut_idx:
                left, right = two_sided_pair
                out.append((float(x), left))
                out.append((float(x), right))
                continue
            out.append((float(x), None if np.isnan(y) else float(y)))
        return out

    result: dict[str, list] = {}
    pdf_pair = haz_pair = None
    if cut_idx is not None:
        occ = model.occupancy_at_cut()
        dens_right = float(occ @ model.exit2)
        surv_at = surv[cut_idx]
        pdf_pair = (float(dens[cut_idx]), dens_right)
        if surv_at > 0:
            haz_pair = (float(dens[cut_idx] / surv_at), dens_right / surv_at)
        else:
            haz_pair = (None, None)
    for curve in req.curves:
        if curve == "pdf":
            result[curve] = series(dens, pdf_pair)
        elif curve == "survival":
            result[curve] = series(surv)
        elif curve == "hazard":
            result[curve] = series(haz, haz_pair)
        elif curve == "cum_hazard":
            result[curve] = series(cum)
    return result


def series_csv(series: list) -> str:
    """Two-column CSV rows (x, y) for one curve; None becomes an empty field."""
    lines = []
    for x, y in series:
        ytok = "" if y is None else _float_repr(float(y))
        lines.append(f"{_float_repr(float(x))},{ytok}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# document format


def _float_repr(v: float) -> str:
    if v != v:
        return "nan"
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    out = f"{v:.17g}"
    return out


def _float_token(v: float) -> str:
    out = _float_repr(v)
    if out in ("nan", "inf", "-inf"):
        return f'"{out}"'
    if not any(ch in out for ch in ".eE"):
        out += ".0"
    return out


def _is_scalar(v) -> bool:
    return v is None or isinstance(v, (bool, int, float, str))


def _render(v, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _float_token(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, np.ndarray):
        return _render(v.tolist(), indent)
    if isinstance(v, (list, tuple)):
        items = list(v)
        if not items:
            return "[]"
        if all(_is_scalar(x) for x in items):
            return "[" + ", ".join(_render(x, indent) for x in items) + "]"
        rows = [inner + _render(x, indent + 2) for x in items]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(v, dict):
        if not v:
            return "{}"
        rows = [f"{inner}{json.dumps(str(k))}: {_render(val, indent + 2)}"
                for k, val in v.items()]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj) -> str:
    """Render a document tree as formatted text."""
    return _render(obj, 0) + "\n"


def _revive(v):
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return float(v)
    if isinstance(v, list):
        return [_revive(x) for x in v]
    if isinstance(v, dict):
        return {k: _revive(val) for k, val in v.items()}
    return v


def loads(text: str):
    """Parse document text back into its tree, reviving non-finite tokens."""
    return _revive(json.loads(text))


def _write_text(dest, text: str) -> None:
    if isinstance(dest, (str, Path)):
        try:
            Path(dest).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {dest}: {exc}") from exc
    else:
        dest.write(text)


def _read_text(src) -> str:
    if isinstance(src, (str, Path)):
        try:
            return Path(src).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read {src}: {exc}") from exc
    raw = src.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def model_to_doc(model) -> dict:
    return {"schema": SCHEMA, "kind": "model", "model": model.to_doc()}


def model_from_doc(doc: dict):
    body = doc.get("model", doc)
    family = body.get("family", "phase_type")
    if family == "one_cut_point":
        return ocp_mod.ocp_from_doc(body)
    return phd.phase_type_from_doc(body)


def write_model(model, dest) -> None:
    _write_text(dest, dumps(model_to_doc(model)))


def read_model(src):
    return model_from_doc(loads(_read_text(src)))


def write_report(results, dest) -> None:
    """Persist fit results (optionally paired with GoF reports) as text.

    ``results`` is a non-empty list of FitResult objects or
    (FitResult, GoFReport-or-None) pairs; order is preserved.
    """
    if not results:
        raise InvalidData("report needs at least one result")
    entries = []
    for item in results:
        fit_result, report = item if isinstance(item, tuple) else (item, None)
        entries.append({
            "fit": fit_result.to_doc(),
            "gof": report.to_doc() if report is not None else None,
        })
    doc = {"schema": SCHEMA, "kind": "report", "results": entries}
    _write_text(dest, dumps(doc))


def read_report(src) -> list:
    """Read back a report document as (FitResult, GoFReport | None) pairs."""
    from . import fit as fit_mod
    from . import gof as gof_mod

    doc = loads(_read_text(src))
    out = []
    for entry in doc.get("results", []):
        fr = fit_mod.FitResult.from_doc(entry["fit"])
        gr = entry.get("gof")
        out.append((fr, gof_mod.GoFReport.from_doc(gr) if gr else None))
    return out

"""Maximum-likelihood fitting of phase-type models.

Classical models are fitted by EM. The E-step expectations (starts, sojourn
times, jump counts, absorption counts) all come from one doubled block
exponential per observation, evaluated for every observation at once through
a shared table of uniformization powers. Grouped and right-truncated counts
use the bin-integrated versions of the same expectations. The two-zone
model with single-rate chains is fitted by a derivative-free simplex search
over the two log-rates.

Data are standardized to unit mean internally; rates and log-likelihoods are
mapped back to the original scale on return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln
from scipy.stats import poisson

from . import dataio, gof, matfun, ocp, phd
from .dataio import Dataset, GroupedDataset
from .errors import (HorizonTooSmall, InsufficientData, InvalidCutPoint,
                     InvalidData, InvalidModel, InvalidSpec)

POINT_STRUCTURES = ("general", "cf1", "hyper_erlang", "erlang")


@dataclass
class FitOptions:
    max_iter: int = 2000
    rel_tol: float = 1e-8
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidSpec("rel_tol must be > 0")
        if self.restarts < 1:
            raise InvalidSpec("restarts must be >= 1")


@dataclass
class FitResult:
    model: object
    loglik: float
    aic: float
    n_params: int
    iterations: int
    converged: bool
    loglik_trace: list[float] = field(repr=False)
    structure: str = "general"
    m: int = 0
    seed: int = 0

    def to_doc(self) -> dict:
        return {
            "structure": self.structure,
            "m": self.m,
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "k": int(self.n_params),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "seed": int(self.seed),
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "model": self.model.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FitResult":
        return cls(
            model=dataio.model_from_doc(doc["model"]),
            loglik=doc["loglik"],
            aic=doc["aic"],
            n_params=doc["k"],
            iterations=doc["iterations"],
            converged=doc["converged"],
            loglik_trace=list(doc.get("loglik_trace", [])),
            structure=doc["structure"],
            m=doc["m"],
            seed=doc.get("seed", 0),
        )


def param_count(structure: str, m: int, branches: int | None = None) -> int:
    """Free-parameter ledger used for AIC."""
    if structure == "general":
        return m * m + m - 1
    if structure == "cf1":
        return 2 * m - 1
    if structure == "erlang":
        return 1
    if structure == "hyper_erlang":
        if branches is None:
            raise InvalidSpec("hyper_erlang needs the branch count")
        return 2 * branches - 1
    if structure == "ocp_erlang":
        return 2
    raise InvalidSpec(f"unknown structure {structure!r}")


def aic(loglik: float, k: int) -> float:
    """Akaike information criterion 2k - 2*loglik."""
    if k < 1:
        raise InvalidSpec("k must be >= 1")
    return 2.0 * k - 2.0 * loglik


def loglik(model, data) -> float:
    """Weighted log-likelihood; -inf when any density value underflows to 0."""
    data = as_dataset(data)
    if isinstance(model, ocp.OneCutPointPhaseType):
        dens = ocp.ocp_pdf(model, data.values)
    else:
        dens = phd.pdf(model, data.values)
    dens = np.atleast_1d(dens)
    if np.any(dens <= 0.0):
        return float("-inf")
    return float(np.sum(data.weights * np.log(dens)))


def as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    return Dataset(np.asarray(data, dtype=float))


# --------------------------------------------------------------------------
# E-step machinery


@dataclass
class _Stats:
    starts: np.ndarray        # expected starts per state
    sojourn: np.ndarray       # expected total time per state
    jumps: np.ndarray         # expected i -> j transition counts
    absorbs: np.ndarray       # expected exits to the absorbing state
    ll: float
    sw: float                 # total weight / count


def _doubled_block(t: np.ndarray, t0: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    m = t.shape[0]
    c = np.zeros((2 * m, 2 * m))
    c[:m, :m] = t
    c[:m, m:] = np.outer(t0, alpha)
    c[m:, m:] = t
    return c


def _finalize_stats(starts, sojourn, jumps, absorbs, ll, sw):
    for arr in (starts, sojourn, jumps, absorbs):
        np.clip(arr, 0.0, None, out=arr)
    if not (np.isfinite(ll) and all(np.all(np.isfinite(a))
                                    for a in (starts, sojourn, jumps, absorbs))):
        return None
    return _Stats(starts, sojourn, jumps, absorbs, ll, sw)


def _estep_point(alpha, t, t0, values, weights):
    """Expected path statistics for exact observations, or None on underflow."""
    m = t.shape[0]
    c = _doubled_block(t, t0, alpha)
    big = matfun.batch_expm(c, values)
    ex = big[:, :m, :m]
    conv = big[:, :m, m:]
    to_exit = ex @ t0                       # e^{Tx} T0 per observation
    dens = to_exit @ alpha
    if np.any(dens <= 0.0) or not np.all(np.isfinite(dens)):
        return None
    occup = np.einsum("nij,i->nj", ex, alpha)   # alpha e^{Tx}
    r = weights / dens
    ll = float(np.sum(weights * np.log(dens)))
    starts = alpha * (r @ to_exit)
    sojourn = np.einsum("n,nii->i", r, conv)
    cross = np.einsum("n,nji->ij", r, conv)
    off = ~np.eye(m, dtype=bool)
    jumps = np.where(off, t, 0.0) * cross
    absorbs = t0 * (r @ occup)
    return _finalize_stats(starts, sojourn, jumps, absorbs, ll, float(weights.sum()))


def _estep_group(alpha, t, t0, edges, counts, tail_count):
    """Bin-integrated expected path statistics for grouped counts."""
    m = t.shape[0]
    c = _doubled_block(t, t0, alpha)
    big = matfun.batch_expm(c, edges)
    ex = big[:, :m, :m]
    conv = big[:, :m, m:]
    a_mat = np.outer(t0, alpha)
    ones = np.ones(m)
    alpha_tinv = np.linalg.solve(t.T, alpha)    # row vector alpha T^-1

    starts = np.zeros(m)
    sojourn = np.zeros(m)
    cross = np.zeros((m, m))
    absorbs = np.zeros(m)
    ll = 0.0
    total = float(np.sum(counts)) + float(tail_count)

    def accumulate(count, prob, int_b, kmat, int_row):
        nonlocal ll, starts, sojourn, cross, absorbs
        if count == 0:
            return True
        if prob <= 0 or not np.isfinite(prob):
            return False
        ll += count * math.log(prob)
        w = count / prob
        starts += w * int_b
        sojourn += w * np.diagonal(kmat)
        cross += w * kmat.T
        absorbs += w * t0 * int_row
        return True

    for k in range(len(edges) - 1):
        d_ex = ex[k] - ex[k + 1]
        prob = float(alpha @ d_ex @ ones)
        int_b = alpha * (d_ex @ ones)
        kmat = (np.linalg.solve(t, conv[k + 1] - conv[k])
                - np.linalg.solve(t, a_mat @ np.linalg.solve(t, ex[k + 1] - ex[k])))
        int_row = alpha_tinv @ (ex[k + 1] - ex[k])
        if not accumulate(int(counts[k]), prob, int_b, kmat, int_row):
            return None
    if tail_count:
        last = len(edges) - 1
        prob = float(alpha @ ex[last] @ ones)
        int_b = alpha * (ex[last] @ ones)
        kmat = (-np.linalg.solve(t, conv[last])
                + np.linalg.solve(t, a_mat @ np.linalg.solve(t, ex[last])))
        int_row = -(alpha_tinv @ ex[last])
        if not accumulate(int(tail_count), prob, int_b, kmat, int_row):
            return None

    off = ~np.eye(m, dtype=bool)
    jumps = np.where(off, t, 0.0) * cross
    return _finalize_stats(starts, sojourn, jumps, absorbs, ll, total)


# --------------------------------------------------------------------------
# M-steps (one per structure; each preserves its structural zeros)


def _outflow(stats):
    return stats.jumps.sum(axis=1) + stats.absorbs


def _update_general(stats, alpha, t):
    m = t.shape[0]
    safe = (stats.sojourn > 0) & (_outflow(stats) > 0)
    t_new = t.copy()
    z = np.where(safe, stats.sojourn, 1.0)
    rows = stats.jumps / z[:, None]
    exits = stats.absorbs / z
    for i in range(m):
        if not safe[i]:
            continue
        t_new[i] = rows[i]
        t_new[i, i] = -(rows[i].sum() - rows[i, i] + exits[i])
    alpha_new = stats.starts / stats.sw
    alpha_new = alpha_new / alpha_new.sum()
    return alpha_new, t_new


def _cf1_sort(alpha, rates):
    """Reorder bidiagonal rates ascending without changing the distribution.

    Swapping adjacent rates (lam_i > lam_{i+1}) is exact when the entry mass
    is moved as alpha_i += (1 - w) alpha_{i+1}, alpha_{i+1} *= w with
    w = lam_{i+1}/lam_i.
    """
    a = alpha.copy()
    lam = rates.copy()
    m = lam.size
    for end in range(m - 1, 0, -1):
        for i in range(end):
            if lam[i] > lam[i + 1]:
                w = lam[i + 1] / lam[i]
                a[i], a[i + 1] = a[i] + (1.0 - w) * a[i + 1], w * a[i + 1]
                lam[i], lam[i + 1] = lam[i + 1], lam[i]
    return a, lam


def _cf1_matrix(rates):
    m = rates.size
    t = np.zeros((m, m))
    t[np.arange(m), np.arange(m)] = -rates
    if m > 1:
        t[np.arange(m - 1), np.arange(1, m)] = rates[:-1]
    return t


def _update_cf1(stats, alpha, t):
    m = t.shape[0]
    rates = -np.diagonal(t).copy()
    safe = (stats.sojourn > 0) & (_outflow(stats) > 0)
    flow = np.zeros(m)
    if m > 1:
        flow[:-1] = stats.jumps[np.arange(m - 1), np.arange(1, m)]
    flow += stats.absorbs
    rates = np.where(safe, flow / np.where(safe, stats.sojourn, 1.0), rates)
    alpha_new = stats.starts / stats.sw
    alpha_new = alpha_new / alpha_new.sum()
    alpha_new, rates = _cf1_sort(alpha_new, rates)
    return alpha_new, _cf1_matrix(rates)


def _update_erlang(stats, alpha, t):
    m = t.shape[0]
    lam = _outflow(stats).sum() / stats.sojourn.sum()
    t_new = _cf1_matrix(np.full(m, lam))
    a = np.zeros(m)
    a[0] = 1.0
    return a, t_new


def _hyper_erlang_layout(shapes):
    heads, blocks, pos = [], [], 0
    for r in shapes:
        heads.append(pos)
        blocks.append(list(range(pos, pos + r)))
        pos += r
    return heads, blocks


def _update_hyper_erlang(shapes):
    heads, blocks = _hyper_erlang_layout(shapes)

    def update(stats, alpha, t):
        m = t.shape[0]
        t_new = np.zeros((m, m))
        outflow = _outflow(stats)
        for block in blocks:
            soj = stats.sojourn[block].sum()
            flow = outflow[block].sum()
            lam = flow / soj if soj > 0 and flow > 0 else -t[block[0], block[0]]
            for i, idx in enumerate(block):
                t_new[idx, idx] = -lam
                if i < len(block) - 1:
                    t_new[idx, idx + 1] = lam
        beta = np.maximum(stats.starts[heads], 0.0)
        beta = beta / beta.sum() if beta.sum() > 0 else alpha[heads]
        alpha_new = np.zeros(m)
        alpha_new[heads] = beta
        return alpha_new, t_new

    return update


# --------------------------------------------------------------------------
# EM driver


class _ProgressCounter:
    """Threads a global iteration count through restarts."""

    def __init__(self, callback):
        self.callback = callback
        self.count = 0

    def tick(self, ll: float):
        self.count += 1
        if self.callback is not None:
            self.callback(self.count, ll)


def _run_em(alpha, t, estep, update, opts: FitOptions, counter: _ProgressCounter):
    trace: list[float] = []
    ll_prev = None
    converged = False
    iterations = 0
    t0 = np.maximum(-t.sum(axis=1), 0.0)  # clamp float dust off the exits
    for it in range(opts.max_iter + 1):
        stats = estep(alpha, t, t0)
        if stats is None:
            return None
        trace.append(stats.ll)
        counter.tick(stats.ll)
        if ll_prev is not None and (stats.ll - ll_prev) <= opts.rel_tol * max(1.0, abs(ll_prev)):
            converged = True
            iterations = it
            break
        if it == opts.max_iter:
            iterations = it
            break
        alpha, t = update(stats, alpha, t)
        t0 = np.maximum(-t.sum(axis=1), 0.0)
        ll_prev = stats.ll
    return alpha, t, trace, iterations, converged


def _init_structure(structure, m, restart, rng, shapes=None):
    """Starting point on unit-mean data (rates are O(m))."""
    lam = float(m)
    if structure == "erlang":
        a = np.zeros(m)
        a[0] = 1.0
        return a, _cf1_matrix(np.full(m, lam))
    if structure == "cf1":
        if restart == 1:
            # the nested single-chain point; EM keeps alpha's zeros in place
            a = np.zeros(m)
            a[0] = 1.0
            return a, _cf1_matrix(np.full(m, lam))
        if m == 1:
            rates = np.array([lam])
        else:
            spread = 4.0 ** (np.linspace(0.0, 1.0, m) - 0.5)
            rates = lam * spread
        if restart > 1:
            rates = rates * np.exp(0.3 * rng.standard_normal(m))
        return np.full(m, 1.0 / m), _cf1_matrix(np.sort(rates))
    if structure == "hyper_erlang":
        heads, blocks = _hyper_erlang_layout(shapes)
        t = np.zeros((m, m))
        for r, block in zip(shapes, blocks):
            rate = r * lam / m * (1.0 + 0.5 * rng.random()) if restart > 0 else r * lam / m
            for i, idx in enumerate(block):
                t[idx, idx] = -rate
                if i < len(block) - 1:
                    t[idx, idx + 1] = rate
        a = np.zeros(m)
        a[heads] = 1.0 / len(heads)
        return a, t
    # general: the first start IS the nested single chain (its structural
    # zeros survive EM, so the general fit can never trail the single-rate
    # one); the second leaks a little everywhere; the rest are random.
    if restart == 0:
        a = np.zeros(m)
        a[0] = 1.0
        return a, _cf1_matrix(np.full(m, lam))
    if restart == 1:
        off = 0.05 * lam * rng.random((m, m))
        np.fill_diagonal(off, 0.0)
        if m > 1:
            off[np.arange(m - 1), np.arange(1, m)] += lam
        exit_rates = 0.05 * lam * rng.random(m)
        exit_rates[m - 1] += lam
        alpha = np.full(m, 0.1 / m)
        alpha[0] += 0.9
    else:
        off = lam * rng.random((m, m))
        np.fill_diagonal(off, 0.0)
        exit_rates = lam * rng.random(m)
        alpha = np.full(m, 1.0 / m)
    t = off.copy()
    np.fill_diagonal(t, -(off.sum(axis=1) + exit_rates))
    return alpha, t


def _partitions_leq3(m: int) -> list[tuple[int, ...]]:
    out = []
    for b1 in range(1, m + 1):
        if b1 == m:
            out.append((b1,))
        for b2 in range(b1, m - b1 + 1):
            if b1 + b2 == m:
                out.append((b1, b2))
            for b3 in range(b2, m - b1 - b2 + 1):
                if b1 + b2 + b3 == m:
                    out.append((b1, b2, b3))
    return out


def _shape_candidates(m: int) -> list[tuple[int, ...]]:
    if m <= 10:
        return _partitions_leq3(m)
    third = m // 3
    half = m // 2
    return [(m,), (half, m - half), (third, third, m - 2 * third)]


def _model_from_matrices(structure, alpha, t, scale, shapes=None):
    """Map the unit-mean representation back to data scale."""
    t_out = t / scale
    if structure == "erlang":
        return phd.erlang(t.shape[0], -t_out[0, 0])
    if structure == "cf1":
        return phd.cf1(alpha, -np.diagonal(t_out))
    if structure == "hyper_erlang":
        heads, blocks = _hyper_erlang_layout(shapes)
        mix = [(float(alpha[h]), len(block), float(-t_out[h, h]))
               for h, block in zip(heads, blocks)]
        return phd.hyper_erlang(mix)
    return phd.general(alpha, t_out)


def em_fit_point(data, structure: str, m: int, opts: FitOptions | None = None,
                 progress=None) -> FitResult:
    """Fit one structure to exact (optionally weighted) observations by EM.

    Returns the best result over ``opts.restarts`` seeded starts; an
    unconverged run is reported through the flag, not an error.
    """
    data = as_dataset(data)
    opts = opts or FitOptions()
    _check_structure_m(structure, m)
    scale = float(np.sum(data.weights * data.values) / np.sum(data.weights))
    values = data.values / scale
    weights = data.weights
    sw = float(weights.sum())
    shift = sw * math.log(scale)

    if structure == "hyper_erlang":
        return _fit_hyper_erlang_point(values, weights, m, opts, progress,
                                       scale, shift)

    counter = _ProgressCounter(progress)
    estep = lambda a, t, t0: _estep_point(a, t, t0, values, weights)
    update = {"general": _update_general, "cf1": _update_cf1,
              "erlang": _update_erlang}[structure]
    restarts = 1 if structure == "erlang" else opts.restarts
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([opts.seed, r])
        alpha0, t_init = _init_structure(structure, m, r, rng)
        run = _run_em(alpha0, t_init, estep, update, opts, counter)
        if run is None:
            continue
        if best is None or run[2][-1] > best[2][-1]:
            best = run
    if best is None:
        raise InvalidModel("every start produced an underflowing likelihood")
    alpha, t, trace, iterations, converged = best
    model = _model_from_matrices(structure, alpha, t, scale)
    k = param_count(structure, m)
    ll = trace[-1] - shift
    return FitResult(model=model, loglik=ll, aic=aic(ll, k), n_params=k,
                     iterations=iterations, converged=converged,
                     loglik_trace=[v - shift for v in trace],
                     structure=structure, m=m, seed=opts.seed)


def _check_structure_m(structure, m):
    if structure not in POINT_STRUCTURES:
        raise InvalidSpec(f"structure must be one of {POINT_STRUCTURES}")
    if not (1 <= m <= matfun.MAX_ORDER):
        raise InvalidSpec(f"m must lie in [1, {matfun.MAX_ORDER}]")


# --------------------------------------------------------------------------
# hyper-Erlang mixture EM (exact observations; no matrix exponentials needed)


def _erlang_log_pdf(x, shape, rate):
    return (shape * np.log(rate) + (shape - 1.0) * np.log(x)
            - rate * x - gammaln(shape))


def _fit_hyper_erlang_point(values, weights, m, opts, progress, scale, shift):
    counter = _ProgressCounter(progress)
    sw = float(weights.sum())
    order = np.argsort(values)
    best = None
    for shapes in _shape_candidates(m):
        nb = len(shapes)
        for r in range(opts.restarts if nb > 1 else 1):
            rng = np.random.default_rng([opts.seed, hash(shapes) % (2 ** 31), r])
            # moment-style start: contiguous equal-weight blocks of sorted data
            splits = np.array_split(order, nb)
            beta = np.array([weights[idx].sum() / sw for idx in splits])
            rates = np.array([
                s / max(np.average(values[idx], weights=weights[idx]), 1e-12)
                for s, idx in zip(shapes, splits)
            ])
            if r > 0:
                rates = rates * np.exp(0.3 * rng.standard_normal(nb))
            run = _run_mixture_em(values, weights, shapes, beta, rates, opts, counter)
            if run is None:
                continue
            trace = run[2]
            if best is None or trace[-1] > best[2][-1]:
                best = (*run, shapes)
    if best is None:
        raise InvalidModel("every start produced an underflowing likelihood")
    beta, rates, trace, iterations, converged, shapes = best
    mix = [(float(b), int(s), float(lam / scale))
           for b, s, lam in zip(beta, shapes, rates)]
    model = phd.hyper_erlang(mix)
    k = param_count("hyper_erlang", m, branches=len(shapes))
    ll = trace[-1] - shift
    return FitResult(model=model, loglik=ll, aic=aic(ll, k), n_params=k,
                     iterations=iterations, converged=converged,
                     loglik_trace=[v - shift for v in trace],
                     structure="hyper_erlang", m=m, seed=opts.seed)


def _run_mixture_em(values, weights, shapes, beta, rates, opts, counter):
    shapes_arr = np.asarray(shapes, dtype=float)
    trace: list[float] = []
    ll_prev = None
    converged = False
    iterations = 0
    for it in range(opts.max_iter + 1):
        logp = (_erlang_log_pdf(values[:, None], shapes_arr[None, :],
                                rates[None, :]) + np.log(beta[None, :]))
        top = logp.max(axis=1)
        dens = np.exp(logp - top[:, None]).sum(axis=1)
        if np.any(~np.isfinite(top)) or np.any(dens <= 0):
            return None
        ll = float(np.sum(weights * (np.log(dens) + top)))
        trace.append(ll)
        counter.tick(ll)
        if ll_prev is not None and (ll - ll_prev) <= opts.rel_tol * max(1.0, abs(ll_prev)):
            converged = True
            iterations = it
            break
        if it == opts.max_iter:
            iterations = it
            break
        resp = np.exp(logp - top[:, None]) / dens[:, None]
        wq = weights[:, None] * resp
        mass = wq.sum(axis=0)
        beta = mass / mass.sum()
        rates = shapes_arr * mass / (wq * values[:, None]).sum(axis=0)
        ll_prev = ll
    return beta, rates, trace, iterations, converged


# --------------------------------------------------------------------------
# grouped / truncated data


def em_fit_group(data: GroupedDataset, structure: str, m: int,
                 opts: FitOptions | None = None, progress=None) -> FitResult:
    """Fit by maximizing the multinomial bin likelihood (EM)."""
    opts = opts or FitOptions()
    _check_structure_m(structure, m)
    edges = data.edges
    counts = data.counts
    tail = int(data.right_truncated_count or 0)
    if counts.sum() + tail < 1:
        raise InvalidData("all bins are empty")
    # rough scale from bin midpoints (tail counted at 1.5x the last edge)
    mids = 0.5 * (edges[:-1] + edges[1:])
    mass = counts.sum() + tail
    scale = float((np.sum(mids * counts)
                   + tail * (1.5 * edges[-1] if edges[-1] > 0 else 1.0)) / mass)
    if scale <= 0:
        scale = 1.0
    edges_s = edges / scale

    counter = _ProgressCounter(progress)
    estep = lambda a, t, t0: _estep_group(a, t, t0, edges_s, counts, tail)
    if structure == "hyper_erlang":
        return _fit_grouped_structure_search(data, m, opts, counter, scale,
                                             edges_s, counts, tail)
    update = {"general": _update_general, "cf1": _update_cf1,
              "erlang": _update_erlang}[structure]
    restarts = 1 if structure == "erlang" else opts.restarts
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([opts.seed, r])
        alpha0, t_init = _init_structure(structure, m, r, rng)
        run = _run_em(alpha0, t_init, estep, update, opts, counter)
        if run is None:
            continue
        if best is None or run[2][-1] > best[2][-1]:
            best = run
    if best is None:
        raise InvalidModel("every start produced an underflowing likelihood")
    alpha, t, trace, iterations, converged = best
    model = _model_from_matrices(structure, alpha, t, scale)
    k = param_count(structure, m)
    ll = trace[-1]  # bin probabilities are scale-free
    return FitResult(model=model, loglik=ll, aic=aic(ll, k), n_params=k,
                     iterations=iterations, converged=converged,
                     loglik_trace=list(trace), structure=structure, m=m,
                     seed=opts.seed)


def _fit_grouped_structure_search(data, m, opts, counter, scale,
                                  edges_s, counts, tail):
    estep = lambda a, t, t0: _estep_group(a, t, t0, edges_s, counts, tail)
    best = None
    best_shapes = None
    for shapes in _shape_candidates(m):
        update = _update_hyper_erlang(shapes)
        rng = np.random.default_rng([opts.seed, hash(shapes) % (2 ** 31)])
        alpha0, t_init = _init_structure("hyper_erlang", m, 0, rng, shapes=shapes)
        run = _run_em(alpha0, t_init, estep, update, opts, counter)
        if run is None:
            continue
        if best is None or run[2][-1] > best[2][-1]:
            best = run
            best_shapes = shapes
    if best is None:
        raise InvalidModel("every start produced an underflowing likelihood")
    alpha, t, trace, iterations, converged = best
    model = _model_from_matrices("hyper_erlang", alpha, t, scale, shapes=best_shapes)
    k = param_count("hyper_erlang", m, branches=len(best_shapes))
    ll = trace[-1]
    return FitResult(model=model, loglik=ll, aic=aic(ll, k), n_params=k,
                     iterations=iterations, converged=converged,
                     loglik_trace=list(trace), structure="hyper_erlang", m=m,
                     seed=opts.seed)


# --------------------------------------------------------------------------
# density targets via quadrature


def fit_density(target_pdf, horizon: float, nodes: int, structure: str, m: int,
                opts: FitOptions | None = None, progress=None) -> FitResult:
    """Fit a density on [0, horizon] through quadrature-weighted points."""
    if not horizon > 0:
        raise InvalidSpec("horizon must be positive")
    if nodes < 8:
        raise InvalidSpec("need at least 8 quadrature nodes")
    x, gl_w = np.polynomial.legendre.leggauss(int(nodes))
    x = 0.5 * horizon * (x + 1.0)
    gl_w = 0.5 * horizon * gl_w
    dens = np.asarray([float(target_pdf(xi)) for xi in x])
    if np.any(dens < 0) or not np.all(np.isfinite(dens)):
        raise InvalidData("target density must be finite and non-negative")
    weights = dens * gl_w
    mass = float(weights.sum())
    if mass < 0.9:
        raise HorizonTooSmall(
            f"density mass over [0, {horizon}] is {mass:.4f} < 0.9")
    keep = weights > 0
    data = Dataset(x[keep], weights[keep], source="quadrature")
    return em_fit_point(data, structure, m, opts, progress)


# --------------------------------------------------------------------------
# one cut-point fitting (single-rate chains in both zones)


def _ocp_erlang_neg_loglik(log_rates, values, weights, m, cut):
    lam1, lam2 = np.exp(log_rates)
    in1 = values <= cut
    ll = 0.0
    if np.any(in1):
        ll += float(np.sum(weights[in1]
                           * _erlang_log_pdf(values[in1], m, lam1)))
    if np.any(~in1):
        y = values[~in1] - cut
        k = np.arange(m)
        occup = poisson.pmf(k, lam1 * cut)          # alpha e^{T1 a} rows
        stage_logpdf = _erlang_log_pdf(y[:, None], (m - k)[None, :], lam2)
        top = stage_logpdf.max(axis=1)
        dens = (np.exp(stage_logpdf - top[:, None]) * occup[None, :]).sum(axis=1)
        good = dens > 0
        if not np.all(good):
            return float("inf")
        ll += float(np.sum(weights[~in1] * (np.log(dens) + top)))
    return -ll if np.isfinite(ll) else float("inf")


def _fit_ocp_raw(values, weights, m, cut, opts, progress=None) -> FitResult:
    """Maximize the two-zone likelihood over (ln lam1, ln lam2)."""
    in1 = values <= cut
    mean1 = float(np.average(values[in1], weights=weights[in1])) if np.any(in1) \
        else float(np.average(values, weights=weights))
    mean2 = float(np.average(values[~in1] - cut, weights=weights[~in1])) \
        if np.any(~in1) else mean1
    x0 = np.log([m / max(mean1, 1e-12), m / max(mean2, 1e-12)])
    simplex = np.array([x0, x0 + [0.1, 0.0], x0 + [0.0, 0.1]])

    trace: list[float] = []

    def objective(lr):
        val = _ocp_erlang_neg_loglik(lr, values, weights, m, cut)
        best = -val if not trace else max(trace[-1], -val)
        trace.append(best)
        if progress is not None:
            progress(len(trace), best)
        return val

    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "fatol": 1e-10,
                            "xatol": 1e-8, "maxiter": 2000, "maxfev": 4000})
    lam1, lam2 = np.exp(res.x)
    model = ocp.erlang_zones(m, lam1, lam2, cut)
    ll = -float(res.fun)
    k = param_count("ocp_erlang", m)
    return FitResult(model=model, loglik=ll, aic=aic(ll, k), n_params=k,
                     iterations=int(res.nit), converged=bool(res.success),
                     loglik_trace=trace, structure="ocp_erlang", m=m,
                     seed=opts.seed)


def fit_ocp(data, m: int, cut: float, opts: FitOptions | None = None,
            progress=None) -> FitResult:
    """Fit the two-zone model at a user-chosen cut with single-rate zones."""
    data = as_dataset(data)
    opts = opts or FitOptions()
    if m < 1 or m > matfun.MAX_ORDER:
        raise InvalidSpec(f"m must lie in [1, {matfun.MAX_ORDER}]")
    lo, hi = float(data.values.min()), float(data.values.max())
    if not (lo < cut < hi):
        raise InvalidCutPoint(
            f"cut {cut} must lie strictly inside the data range ({lo}, {hi})")
    n1 = int(np.sum(data.values <= cut))
    n2 = data.n - n1
    if n1 < m or n2 < m:
        raise InsufficientData(
            f"need at least {m} observations on each side of the cut "
            f"(got {n1} and {n2})")
    return _fit_ocp_raw(data.values, data.weights, m, cut, opts, progress)


def cut_candidates(data, k: int = 10) -> np.ndarray:
    """Interior quantile grid of trial cut-points (never applied automatically)."""
    data = as_dataset(data)
    qs = np.linspace(0.0, 1.0, k + 1)[1:-1]
    return np.unique(np.quantile(data.values, qs))


# --------------------------------------------------------------------------
# sweeps and comparison helpers


@dataclass
class SweepRow:
    structure: str
    m: int
    fit: FitResult | None
    gof: gof.GoFReport | None
    failed: bool = False
    error: str | None = None

    def to_doc(self) -> dict:
        return {
            "structure": self.structure,
            "m": self.m,
            "failed": self.failed,
            "error": self.error,
            "fit": self.fit.to_doc() if self.fit else None,
            "gof": self.gof.to_doc() if self.gof else None,
        }


def sweep_states(data, structures, m_range, opts: FitOptions | None = None,
                 progress=None) -> list[SweepRow]:
    """Fit every (structure, m) pair and summarize fit quality per row.

    Rows are ordered by (m, structure); a failing fit marks its row instead
    of aborting the sweep.
    """
    data = as_dataset(data)
    opts = opts or FitOptions()
    ms = list(m_range) if not isinstance(m_range, tuple) else \
        list(range(m_range[0], m_range[1] + 1))
    if any(m < 1 or m > matfun.MAX_ORDER for m in ms):
        raise InvalidSpec(f"states must lie in [1, {matfun.MAX_ORDER}]")
    rows: list[SweepRow] = []
    for m in sorted(ms):
        for structure in sorted(structures):
            try:
                res = em_fit_point(data, structure, m, opts, progress)
                report = gof.gof_report(data, res.model)
                rows.append(SweepRow(structure, m, res, report))
            except Exception as exc:  # keep sweeping; mark the row
                rows.append(SweepRow(structure, m, None, None, failed=True,
                                     error=f"{type(exc).__name__}: {exc}"))
    return rows


def refitter(structure: str, m: int, opts: FitOptions | None = None):
    """Refit hook for parametric-bootstrap p-values (sample -> fitted CDF)."""
    opts = opts or FitOptions(restarts=1, max_iter=200)

    def refit(sample):
        res = em_fit_point(Dataset(np.asarray(sample)), structure, m, opts)
        model = res.model
        return lambda xs: phd.cdf(model, xs)

    return refit


def compare_ocp(data, m: int, cut: float, opts: FitOptions | None = None,
                progress=None):
    """Classical single-rate fit vs the two-zone fit at the same m.

    Returns ((erlang FitResult, erlang GoFReport),
             (ocp FitResult, ocp GoFReport), empirical cumulative hazard).
    """
    data = as_dataset(data)
    opts = opts or FitOptions()
    classical = em_fit_point(data, "erlang", m, opts, progress)
    two_zone = fit_ocp(data, m, cut, opts, progress)
    gof_classical = gof.gof_report(data, classical.model)
    gof_two_zone = gof.gof_report(data, two_zone.model)
    emp = gof.empirical_cum_hazard(data)
    return (classical, gof_classical), (two_zone, gof_two_zone), emp

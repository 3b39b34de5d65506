"""Phase-type distributions: lifetimes of absorbing continuous-time Markov chains.

A distribution is represented by (alpha, T): the initial probability vector
over the m transient states and the sub-generator of transition intensities
among them. The exit-rate vector T0 = -T.e is derived. Evaluators for the
density, distribution, survival, hazard and cumulative hazard functions accept
scalars or arrays of times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matfun
from .errors import DomainError, InvalidModel, InvalidSpec, TailUnderflow

STRUCTURE_KINDS = (
    "exponential",
    "erlang",
    "hypoexponential",
    "hyperexponential",
    "coxian",
    "generalized_coxian",
    "cf1",
    "hyper_erlang",
    "general",
)


@dataclass(frozen=True, eq=False, repr=False)
class PhaseType:
    """Immutable (alpha, T) pair with the derived exit vector."""

    alpha: np.ndarray
    subgen: np.ndarray
    exit: np.ndarray = field(init=False)
    structure: str = "general"
    params: dict | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        t = matfun.check_subgenerator(self.subgen)
        if alpha.shape[0] != t.shape[0]:
            raise InvalidSpec(
                f"alpha length {alpha.shape[0]} != matrix order {t.shape[0]}"
            )
        if np.any(alpha < 0):
            raise InvalidSpec("alpha entries must be non-negative")
        if abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidSpec("alpha must sum to 1")
        alpha = alpha / alpha.sum()
        exit_vec = -t.sum(axis=1)
        if np.any(exit_vec < -1e-12):
            raise InvalidSpec("exit rates must be non-negative")
        exit_vec[exit_vec < 0] = 0.0
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "subgen", t)
        object.__setattr__(self, "exit", exit_vec)

    @property
    def m(self) -> int:
        return self.subgen.shape[0]

    def __repr__(self):
        return f"PhaseType(structure={self.structure!r}, m={self.m})"

    def to_doc(self) -> dict:
        """Self-describing dictionary used by the shared document format."""
        return {
            "family": "phase_type",
            "structure": self.structure,
            "m": self.m,
            "alpha": [float(v) for v in self.alpha],
            "t": [[float(v) for v in row] for row in self.subgen],
            "params": self.params,
        }


@dataclass
class StructureSpec:
    """Parameters naming one of the classic representations."""

    kind: str
    m: int | None = None
    rates: Sequence[float] | float | None = None
    branch: Sequence[float] | None = None
    mix: Sequence[tuple[float, int, float]] | None = None
    alpha: Sequence[float] | None = None
    t: Sequence[Sequence[float]] | None = None


def _rates_vector(spec: StructureSpec, m: int) -> np.ndarray:
    if spec.rates is None:
        raise InvalidSpec(f"{spec.kind} requires rates")
    rates = np.atleast_1d(np.asarray(spec.rates, dtype=float))
    if rates.size == 1 and m > 1 and spec.kind in ("erlang",):
        rates = np.full(m, rates[0])
    if rates.size != m:
        raise InvalidSpec(f"{spec.kind} needs {m} rates, got {rates.size}")
    if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
        raise InvalidSpec("rates must be positive and finite")
    return rates


def _infer_m(spec: StructureSpec) -> int:
    if spec.m is not None:
        if spec.m < 1:
            raise InvalidSpec("m must be >= 1")
        return int(spec.m)
    if spec.rates is not None:
        return np.atleast_1d(np.asarray(spec.rates, dtype=float)).size
    if spec.alpha is not None:
        return len(spec.alpha)
    raise InvalidSpec(f"{spec.kind} requires m")


def _alpha_first(m: int) -> np.ndarray:
    a = np.zeros(m)
    a[0] = 1.0
    return a


def _alpha_given(spec: StructureSpec, m: int) -> np.ndarray:
    if spec.alpha is None:
        raise InvalidSpec(f"{spec.kind} requires alpha")
    a = np.asarray(spec.alpha, dtype=float).reshape(-1)
    if a.size != m:
        raise InvalidSpec(f"alpha length {a.size} != m = {m}")
    return a


def _branch_vector(spec: StructureSpec, m: int) -> np.ndarray:
    if m == 1:
        return np.zeros(0)
    if spec.branch is None:
        raise InvalidSpec(f"{spec.kind} requires {m - 1} branch probabilities")
    g = np.atleast_1d(np.asarray(spec.branch, dtype=float))
    if g.size != m - 1:
        raise InvalidSpec(f"{spec.kind} needs {m - 1} branch probabilities, got {g.size}")
    if np.any(g <= 0) or np.any(g > 1):
        raise InvalidSpec("branch probabilities must lie in (0, 1]")
    return g


def _bidiagonal(rates: np.ndarray, super_rates: np.ndarray) -> np.ndarray:
    m = rates.size
    t = np.zeros((m, m))
    t[np.arange(m), np.arange(m)] = -rates
    if m > 1:
        t[np.arange(m - 1), np.arange(1, m)] = super_rates
    return t


def make_structure(spec: StructureSpec) -> PhaseType:
    """Build the (alpha, T) representation named by the spec."""
    kind = spec.kind
    if kind not in STRUCTURE_KINDS:
        raise InvalidSpec(f"unknown structure kind {kind!r}")

    if kind == "exponential":
        if spec.m not in (None, 1):
            raise InvalidSpec("exponential has m = 1")
        rates = _rates_vector(spec, 1)
        return PhaseType(np.ones(1), [[-rates[0]]], structure=kind,
                         params={"rates": rates.tolist()})

    if kind == "erlang":
        m = _infer_m(spec)
        rates = _rates_vector(spec, m)
        if np.ptp(rates) != 0:
            raise InvalidSpec("erlang uses a single shared rate")
        t = _bidiagonal(rates, rates[:-1])
        return PhaseType(_alpha_first(m), t, structure=kind,
                         params={"rates": [float(rates[0])]})

    if kind == "hypoexponential":
        m = _infer_m(spec)
        rates = _rates_vector(spec, m)
        if np.unique(rates).size != m:
            raise InvalidSpec("hypoexponential rates must be pairwise distinct")
        t = _bidiagonal(rates, rates[:-1])
        return PhaseType(_alpha_first(m), t, structure=kind,
                         params={"rates": rates.tolist()})

    if kind == "hyperexponential":
        m = _infer_m(spec)
        rates = _rates_vector(spec, m)
        alpha = _alpha_given(spec, m)
        t = np.diag(-rates)
        return PhaseType(alpha, t, structure=kind,
                         params={"rates": rates.tolist()})

    if kind in ("coxian", "generalized_coxian"):
        m = _infer_m(spec)
        rates = _rates_vector(spec, m)
        g = _branch_vector(spec, m)
        t = _bidiagonal(rates, g * rates[:-1] if m > 1 else np.zeros(0))
        alpha = _alpha_first(m) if kind == "coxian" else _alpha_given(spec, m)
        return PhaseType(alpha, t, structure=kind,
                         params={"rates": rates.tolist(), "branch": g.tolist()})

    if kind == "cf1":
        m = _infer_m(spec)
        rates = _rates_vector(spec, m)
        if np.any(np.diff(rates) < 0):
            raise InvalidSpec("cf1 rates must be nondecreasing")
        alpha = _alpha_given(spec, m)
        t = _bidiagonal(rates, rates[:-1])
        return PhaseType(alpha, t, structure=kind,
                         params={"rates": rates.tolist()})

    if kind == "hyper_erlang":
        if not spec.mix:
            raise InvalidSpec("hyper_erlang requires a mix of (weight, shape, rate)")
        weights, shapes, rates = [], [], []
        for entry in spec.mix:
            w, r, lam = entry
            weights.append(float(w))
            shapes.append(int(r))
            rates.append(float(lam))
        if any(w <= 0 for w in weights):
            raise InvalidSpec("mixture weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidSpec("mixture weights must sum to 1")
        if any(r < 1 for r in shapes):
            raise InvalidSpec("branch shapes must be positive integers")
        if any(lam <= 0 for lam in rates):
            raise InvalidSpec("branch rates must be positive")
        m = sum(shapes)
        if spec.m is not None and spec.m != m:
            raise InvalidSpec(f"mix shapes sum to {m}, not m = {spec.m}")
        t = np.zeros((m, m))
        alpha = np.zeros(m)
        pos = 0
        for w, r, lam in zip(weights, shapes, rates):
            alpha[pos] = w
            for i in range(r):
                t[pos + i, pos + i] = -lam
                if i < r - 1:
                    t[pos + i, pos + i + 1] = lam
            pos += r
        return PhaseType(alpha, t, structure=kind,
                         params={"mix": [[w, r, lam] for w, r, lam in
                                         zip(weights, shapes, rates)]})

    # general: explicit representation
    if spec.t is None:
        raise InvalidSpec("general requires an explicit matrix")
    t = matfun.as_square(spec.t)
    alpha = _alpha_given(spec, t.shape[0])
    return PhaseType(alpha, t, structure="general", params=None)


def exponential(rate: float) -> PhaseType:
    return make_structure(StructureSpec("exponential", rates=rate))


def erlang(m: int, rate: float) -> PhaseType:
    return make_structure(StructureSpec("erlang", m=m, rates=rate))


def hyper_erlang(mix) -> PhaseType:
    return make_structure(StructureSpec("hyper_erlang", mix=mix))


def coxian(rates, branch) -> PhaseType:
    return make_structure(StructureSpec("coxian", rates=rates, branch=branch))


def cf1(alpha, rates) -> PhaseType:
    return make_structure(StructureSpec("cf1", alpha=alpha, rates=rates))


def general(alpha, t, structure: str = "general", params: dict | None = None) -> PhaseType:
    return PhaseType(np.asarray(alpha, float), t, structure=structure, params=params)


def phase_type_from_doc(doc: dict) -> PhaseType:
    """Rebuild a model from its document form (explicit alpha/t or spec params)."""
    if "t" in doc and doc["t"] is not None:
        return PhaseType(
            np.asarray(doc["alpha"], float),
            doc["t"],
            structure=doc.get("structure", "general"),
            params=doc.get("params"),
        )
    params = doc.get("params") or {}
    spec = StructureSpec(
        kind=doc.get("structure", "general"),
        m=doc.get("m"),
        rates=params.get("rates", doc.get("rates")),
        branch=params.get("branch", doc.get("branch")),
        mix=params.get("mix", doc.get("mix")),
        alpha=doc.get("alpha"),
    )
    return make_structure(spec)


def _as_times(x):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    xs = np.atleast_1d(arr).astype(float)
    if not np.all(np.isfinite(xs)) or np.any(xs < 0):
        raise DomainError("times must be finite and non-negative")
    return xs, scalar


def _shrink(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def survival_pdf_arrays(ph: PhaseType, xs: np.ndarray,
                        start: np.ndarray | None = None):
    """R(x) and f(x) over an array of times, sharing one power table.

    ``start`` replaces alpha as the state-occupancy row vector (used by the
    two-zone evaluators). Returns (survival, density) arrays.
    """
    t = ph.subgen
    m = ph.m
    a0 = ph.alpha if start is None else np.asarray(start, float)
    theta = 1.01 * float(np.max(np.abs(np.diagonal(t))))
    mu = theta * xs
    surv = np.empty(xs.size)
    dens = np.empty(xs.size)
    big = mu > matfun._MU_CAP
    if np.any(~big):
        nterms = matfun._truncation(float(mu[~big].max()))
        p = np.eye(m) + t / theta
        rows = np.empty((nterms + 1, m))
        rows[0] = a0
        for k in range(1, nterms + 1):
            rows[k] = rows[k - 1] @ p
        s_k = rows.sum(axis=1)
        p_k = rows @ ph.exit
        w = matfun.poisson_weight_rows(mu[~big], nterms)
        surv[~big] = w @ s_k
        dens[~big] = w @ p_k
    for i in np.nonzero(big)[0]:
        ones_prop = matfun.expm_action(t, xs[i], np.ones(m))
        exit_prop = matfun.expm_action(t, xs[i], ph.exit)
        surv[i] = a0 @ ones_prop
        dens[i] = a0 @ exit_prop
    np.clip(surv, 0.0, 1.0, out=surv)
    dens[dens < 0] = 0.0
    return surv, dens


def pdf(ph: PhaseType, x):
    """Density alpha e^{Tx} T0."""
    xs, scalar = _as_times(x)
    _, dens = survival_pdf_arrays(ph, xs)
    return _shrink(dens, scalar)


def survival(ph: PhaseType, x):
    """Reliability alpha e^{Tx} e."""
    xs, scalar = _as_times(x)
    surv, _ = survival_pdf_arrays(ph, xs)
    return _shrink(surv, scalar)


def cdf(ph: PhaseType, x):
    """Distribution function 1 - alpha e^{Tx} e."""
    xs, scalar = _as_times(x)
    surv, _ = survival_pdf_arrays(ph, xs)
    return _shrink(1.0 - surv, scalar)


def hazard(ph: PhaseType, x):
    """Instantaneous failure rate f(x)/R(x)."""
    xs, scalar = _as_times(x)
    surv, dens = survival_pdf_arrays(ph, xs)
    if np.any(surv == 0.0):
        bad = xs[surv == 0.0][0]
        raise TailUnderflow(f"survival underflowed to 0 at x = {bad}")
    return _shrink(dens / surv, scalar)


def cum_hazard(ph: PhaseType, x):
    """Cumulative hazard -ln R(x)."""
    xs, scalar = _as_times(x)
    surv, _ = survival_pdf_arrays(ph, xs)
    if np.any(surv == 0.0):
        bad = xs[surv == 0.0][0]
        raise TailUnderflow(f"survival underflowed to 0 at x = {bad}")
    return _shrink(-np.log(surv), scalar)


def moments(ph: PhaseType) -> tuple[float, float]:
    """Mean -alpha T^-1 e and variance 2 alpha T^-2 e - mean^2."""
    ones = np.ones(ph.m)
    try:
        y = np.linalg.solve(ph.subgen, ones)
        z = np.linalg.solve(ph.subgen, y)
    except np.linalg.LinAlgError:
        raise InvalidModel("generator is singular") from None
    mean = -float(ph.alpha @ y)
    second = 2.0 * float(ph.alpha @ z)
    return mean, second - mean * mean


def default_horizon(ph: PhaseType) -> float:
    """Plotting horizon covering the bulk of the distribution (5x mean)."""
    return 5.0 * moments(ph)[0]


def sample(ph: PhaseType, n: int, seed: int) -> np.ndarray:
    """Simulate n absorption times of the underlying chain.

    Each draw sums inverse-CDF exponential sojourns along a path from an
    alpha-drawn initial state to absorption; jump targets are selected by
    cumulative row probabilities (ties to the first index). Reproducible
    for a fixed seed.
    """
    if n < 1:
        raise DomainError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    m = ph.m
    rates = -np.diagonal(ph.subgen)
    # per-state jump distribution over (states..., absorb)
    probs = np.empty((m, m + 1))
    probs[:, :m] = ph.subgen / rates[:, None]
    probs[np.arange(m), np.arange(m)] = 0.0
    probs[:, m] = ph.exit / rates
    cum = np.cumsum(probs, axis=1)
    alpha_cum = np.cumsum(ph.alpha)

    u = rng.random(n)
    state = (alpha_cum < u[:, None]).sum(axis=1)
    state = np.minimum(state, m - 1)
    times = np.zeros(n)
    active = np.arange(n)
    while active.size:
        cur = state[active]
        u_t = rng.random(active.size)
        times[active] += -np.log1p(-u_t) / rates[cur]
        u_j = rng.random(active.size)
        nxt = (cum[cur] < u_j[:, None]).sum(axis=1)
        absorbed = nxt >= m
        state[active[~absorbed]] = nxt[~absorbed]
        active = active[~absorbed]
    return times

"""Goodness-of-fit utilities: Anderson-Darling test, empirical summaries.

The default p-value evaluates the fully-specified-null limiting distribution
of the A2 statistic (Marsaglia & Marsaglia's approximation, including their
small-sample correction). Since fitted parameters bias that p upward, a
parametric-bootstrap alternative that refits inside each replicate is also
available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ocp as ocp_mod
from . import phd
from .errors import InsufficientData, InvalidData, MissingModel

_CLAMP = 1e-15


@dataclass
class GoFReport:
    a2: float
    p_value: float
    method: str
    n: int
    emp_mean: float
    emp_var: float
    model_mean: float
    model_var: float

    def to_doc(self) -> dict:
        return {
            "a2": self.a2,
            "p_value": self.p_value,
            "method": self.method,
            "n": self.n,
            "emp_mean": self.emp_mean,
            "emp_var": self.emp_var,
            "model_mean": self.model_mean,
            "model_var": self.model_var,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GoFReport":
        return cls(**{k: doc[k] for k in (
            "a2", "p_value", "method", "n", "emp_mean", "emp_var",
            "model_mean", "model_var")})


def _values_weights(data) -> tuple[np.ndarray, np.ndarray]:
    values = getattr(data, "values", None)
    if values is None:
        values = np.asarray(data, dtype=float).reshape(-1)
        return values, np.ones(values.size)
    return np.asarray(values, float), np.asarray(data.weights, float)


def ad_statistic(data, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """A2 = -n - (1/n) sum (2i-1)[ln u_i + ln(1 - u_{n+1-i})].

    u_i are the model CDF images of the sorted observations, clamped away
    from 0 and 1 so that underflowing tails cannot produce infinite logs.
    Weights are ignored: the statistic is defined for point samples.
    """
    values, _ = _values_weights(data)
    n = values.size
    if n == 0:
        raise InvalidData("empty sample")
    u = np.asarray(cdf(np.sort(values, kind="stable")), dtype=float)
    u = np.clip(u, _CLAMP, 1.0 - _CLAMP)
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (np.log(u) + np.log(1.0 - u[::-1])))
    return float(-n - s / n)


def _adinf(z: float) -> float:
    """Limiting CDF of A2 under a fully specified null (Marsaglia 2004)."""
    if z <= 0.0:
        return 0.0
    if z < 2.0:
        return (math.exp(-1.2337141 / z) / math.sqrt(z)
                * (2.00012 + (0.247105 - (0.0649821 - (0.0347962
                   - (0.011672 - 0.00168691 * z) * z) * z) * z) * z))
    return math.exp(-math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433
                    - (0.008056 - 0.0003146 * z) * z) * z) * z) * z))


def _ad_cdf(n: int, z: float) -> float:
    """Finite-n corrected CDF of A2 (Marsaglia's errfix)."""
    x = _adinf(z)
    if x > 0.8:
        v = (-130.2137 + (745.2337 - (1705.091 - (1950.646
             - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n
        return min(1.0, x + v)
    c = 0.01265 + 0.1757 / n
    if x < c:
        v = x / c
        v = math.sqrt(v) * (1.0 - v) * (49.0 * v - 102.0)
        return max(0.0, x + v * (0.0037 / n ** 2 + 0.00078 / n + 0.00006) / n)
    v = (x - c) / (0.8 - c)
    v = (-0.00022633 + (6.54034 - (14.6538 - (14.458
         - (8.259 - 1.91864 * v) * v) * v) * v) * v)
    return min(1.0, x + v * (0.04213 + 0.01365 / n) / n)


def _model_cdf(model) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, ocp_mod.OneCutPointPhaseType):
        return lambda xs: ocp_mod.ocp_cdf(model, xs)
    return lambda xs: phd.cdf(model, xs)


def _model_sample(model, n: int, seed: int) -> np.ndarray:
    if isinstance(model, ocp_mod.OneCutPointPhaseType):
        return ocp_mod.ocp_sample(model, n, seed)
    return phd.sample(model, n, seed)


def ad_pvalue(a2: float, n: int, method: str = "asymptotic", *,
              model=None, B: int | None = None,
              refit: Callable[[np.ndarray], Callable] | None = None,
              seed: int = 0) -> float:
    """P-value of the A2 statistic.

    asymptotic: fully-specified-null evaluation (treats the fitted model as
    known; optimistic when parameters came from the same data).

    bootstrap: draw B samples of size n from ``model``, recompute A2 per
    replicate and return (1 + #{A2_b >= a2}) / (B + 1). ``refit`` maps a
    replicate sample to the CDF of its refitted model; without it the fixed
    model's CDF is reused, which ignores estimation noise.
    """
    if a2 < 0:
        raise InvalidData("statistic must be non-negative")
    if method == "asymptotic":
        return 1.0 - _ad_cdf(max(int(n), 1), float(a2))
    if method != "bootstrap":
        raise ValueError(f"unknown p-value method {method!r}")
    if model is None:
        raise MissingModel("bootstrap p-value requires the fitted model")
    if B is None or B < 99:
        raise InvalidData("bootstrap requires B >= 99 replicates")
    root = np.random.default_rng(seed)
    seeds = root.integers(0, 2 ** 63 - 1, size=B)
    exceed = 0
    for b in range(B):
        sample = _model_sample(model, int(n), int(seeds[b]))
        cdf_b = refit(sample) if refit is not None else _model_cdf(model)
        if ad_statistic(sample, cdf_b) >= a2:
            exceed += 1
    return (1.0 + exceed) / (B + 1.0)


def empirical_cum_hazard(data) -> np.ndarray:
    """Nelson-Aalen step estimator for exact (uncensored) event times.

    Returns an array of (time, H) rows starting at (0, 0); at each distinct
    order statistic H increases by d/r with d the (weighted) event count and
    r the (weighted) number still at risk.
    """
    values, weights = _values_weights(data)
    if values.size == 0:
        raise InvalidData("empty sample")
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    times, start = np.unique(v, return_index=True)
    d = np.add.reduceat(w, start)
    total = w.sum()
    at_risk = total - np.concatenate(([0.0], np.cumsum(d)[:-1]))
    h = np.cumsum(d / at_risk)
    return np.column_stack((np.concatenate(([0.0], times)),
                            np.concatenate(([0.0], h))))


def empirical_moments(data) -> tuple[float, float]:
    """Weighted mean and Bessel-corrected variance.

    The correction generalizes the n-1 denominator to weights:
    sum w (x - mean)^2 / (W - sum w^2 / W), which reduces to n-1 for unit
    weights. Variance needs at least two observations.
    """
    values, weights = _values_weights(data)
    if values.size == 0:
        raise InvalidData("empty sample")
    total = weights.sum()
    mean = float((weights * values).sum() / total)
    if values.size < 2:
        raise InsufficientData("variance needs at least 2 observations")
    denom = total - float((weights ** 2).sum()) / total
    if denom <= 0:
        raise InsufficientData("effective sample size too small for variance")
    var = float((weights * (values - mean) ** 2).sum() / denom)
    return mean, var


def gof_report(data, model, method: str = "asymptotic", *,
               B: int | None = None, refit=None, seed: int = 0) -> GoFReport:
    """Full report: A2, p-value, experimental vs model mean and variance."""
    values, _ = _values_weights(data)
    a2 = ad_statistic(data, _model_cdf(model))
    p = ad_pvalue(a2, values.size, method, model=model, B=B,
                  refit=refit, seed=seed)
    emp_mean, emp_var = empirical_moments(data)
    if isinstance(model, ocp_mod.OneCutPointPhaseType):
        model_mean, model_var = ocp_mod.ocp_moments(model)
    else:
        model_mean, model_var = phd.moments(model)
    return GoFReport(a2=a2, p_value=p, method=method, n=int(values.size),
                     emp_mean=emp_mean, emp_var=emp_var,
                     model_mean=model_mean, model_var=model_var)

"""Dense kernels for sub-generator matrices.

The matrix exponential of a sub-generator (and of the block matrices built
from one) is computed by uniformization: a Poisson-weighted sum of powers of
the sub-stochastic matrix P = I + M/theta. Every term is non-negative, so the
result is free of the cancellation a general Pade routine can introduce.
Matrices that do not qualify fall back to ``scipy.linalg.expm``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
from scipy.stats import poisson

from .errors import DimensionError, DomainError, InvalidMatrix

# Poisson tail mass dropped when truncating the uniformization series.
_TAIL = 1e-14
# Per-step uniformization rate; larger exponents are split and squared.
_THETA_STEP = 50.0
# Result entries below this are flushed to exact zero (deep-tail underflow).
_FLUSH = 1e-300
# Largest theta*x handled by the shared-powers batch path.
_MU_CAP = 4000.0

MAX_ORDER = 64


def as_square(m) -> np.ndarray:
    """Coerce to a float square matrix, rejecting non-finite entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix entries must be finite")
    return a


def check_subgenerator(t, tol: float = 1e-12) -> np.ndarray:
    """Validate a sub-generator and return a cleaned copy.

    Requires strictly negative diagonal, non-negative off-diagonal entries
    (tiny negatives within ``tol`` are clamped to zero), row sums <= 0 within
    ``tol``, and certain absorption (T invertible).
    """
    t = as_square(t).copy()
    m = t.shape[0]
    if m > MAX_ORDER:
        raise InvalidMatrix(f"order {m} exceeds the supported maximum {MAX_ORDER}")
    off = ~np.eye(m, dtype=bool)
    scale = max(1.0, float(np.max(np.abs(t))))
    if np.any(t[off] < -tol * scale):
        raise InvalidMatrix("off-diagonal entries must be non-negative")
    t[off & (t < 0)] = 0.0
    if np.any(np.diagonal(t) >= 0):
        raise InvalidMatrix("diagonal entries must be strictly negative")
    rowsums = t.sum(axis=1)
    if np.any(rowsums > tol * scale):
        raise InvalidMatrix("row sums must be <= 0")
    if not np.any(rowsums < -tol * scale):
        raise InvalidMatrix("at least one row must have a strictly negative sum")
    try:
        sol = np.linalg.solve(t, np.ones(m))
    except np.linalg.LinAlgError:
        raise InvalidMatrix("absorption is not certain (matrix is singular)") from None
    if not np.all(np.isfinite(sol)):
        raise InvalidMatrix("absorption is not certain (matrix is singular)")
    return t


def _uniformizable(a: np.ndarray) -> bool:
    """True when I + a/theta is non-negative and sub-stochastic."""
    m = a.shape[0]
    off = ~np.eye(m, dtype=bool)
    if np.any(a[off] < 0):
        return False
    tol = 1e-9 * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return bool(np.all(a.sum(axis=1) <= tol))


def _theta_of(a: np.ndarray) -> float:
    return 1.01 * float(np.max(np.abs(np.diagonal(a))))


def _truncation(mu: float) -> int:
    """Smallest N with Poisson(mu) tail mass beyond N below _TAIL."""
    if mu <= 0:
        return 0
    n = poisson.isf(_TAIL, mu)
    return int(n) + 1 if np.isfinite(n) else 0


def poisson_weight_rows(mu: np.ndarray, nterms: int) -> np.ndarray:
    """Poisson pmf values P[K=k] for k = 0..nterms, one row per entry of mu."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    w = np.zeros((mu.size, nterms + 1))
    small = mu <= 700.0
    if np.any(small):
        ms = mu[small]
        row = np.exp(-ms)
        w[small, 0] = row
        for k in range(1, nterms + 1):
            row = row * (ms / k)
            w[small, k] = row
    if np.any(~small):
        ks = np.arange(nterms + 1)
        w[~small] = poisson.pmf(ks[None, :], mu[~small, None])
    return w


def _power_table(p: np.ndarray, nterms: int) -> np.ndarray:
    """Stack of P^k for k = 0..nterms."""
    d = p.shape[0]
    out = np.empty((nterms + 1, d, d))
    out[0] = np.eye(d)
    for k in range(1, nterms + 1):
        out[k] = out[k - 1] @ p
    return out


def _unif_expm_single(a: np.ndarray) -> np.ndarray:
    """exp(a) for a uniformizable matrix, splitting large rates."""
    d = a.shape[0]
    theta = _theta_of(a)
    if theta == 0.0:
        return np.eye(d)
    steps = max(1, int(math.ceil(theta / _THETA_STEP)))
    b = a / steps
    th = theta / steps
    p = np.eye(d) + b / th
    nterms = _truncation(th)
    w = math.exp(-th)
    term = np.eye(d)
    acc = w * term
    for k in range(1, nterms + 1):
        term = term @ p
        w *= th / k
        acc += w * term
    out = np.linalg.matrix_power(acc, steps) if steps > 1 else acc
    return out


def expm(m) -> np.ndarray:
    """Matrix exponential e^M.

    Uniformization for sub-generator-like matrices, ``scipy.linalg.expm``
    otherwise. For a sub-generator input the result is sub-stochastic.
    """
    a = as_square(m)
    if not _uniformizable(a):
        return scipy.linalg.expm(a)
    out = _unif_expm_single(a)
    out[np.abs(out) < _FLUSH] = 0.0
    return out


def expm_action(t, x: float, v) -> np.ndarray:
    """e^{T x} v without forming the full exponential.

    Requires x >= 0 and len(v) equal to the order of T.
    """
    t = as_square(t)
    if x < 0:
        raise DomainError(f"time must be non-negative, got {x}")
    vec = np.asarray(v, dtype=float).reshape(-1)
    d = t.shape[0]
    if vec.shape[0] != d:
        raise DimensionError(f"vector length {vec.shape[0]} != matrix order {d}")
    if x == 0:
        return vec.copy()
    a = t * x
    if not _uniformizable(a):
        return expm(a) @ vec
    theta = _theta_of(a)
    if theta == 0.0:
        return vec.copy()
    steps = max(1, int(math.ceil(theta / _THETA_STEP)))
    if steps > 8:
        # binary powering of the step matrix beats a long sequential walk
        out = _unif_expm_single(a) @ vec
        out[np.abs(out) < _FLUSH] = 0.0
        return out
    th = theta / steps
    p = np.eye(d) + (a / steps) / th
    nterms = _truncation(th)
    out = vec
    for _ in range(steps):
        w = math.exp(-th)
        term = out
        acc = w * term
        for k in range(1, nterms + 1):
            term = p @ term
            w *= th / k
            acc = acc + w * term
        out = acc
    out[np.abs(out) < _FLUSH] = 0.0
    return out


def conv_integral(t, x: float, a) -> np.ndarray:
    """The convolution integral int_0^x e^{T u} A e^{T (x-u)} du.

    Computed as the upper-right block of the exponential of the doubled
    block matrix [[T, A], [0, T]] scaled by x.
    """
    t = as_square(t)
    a = as_square(a)
    if t.shape != a.shape:
        raise DimensionError(f"orders differ: {t.shape[0]} vs {a.shape[0]}")
    if x < 0:
        raise DomainError(f"time must be non-negative, got {x}")
    m = t.shape[0]
    if x == 0:
        return np.zeros((m, m))
    c = np.zeros((2 * m, 2 * m))
    c[:m, :m] = t
    c[:m, m:] = a
    c[m:, m:] = t
    return expm(c * x)[:m, m:]


def batch_expm(c, xs) -> np.ndarray:
    """e^{C x_i} for an array of non-negative times, shape (n, d, d).

    Shares one table of matrix powers across all times (the Poisson weights
    are the only per-time quantity). C must be uniformizable; times with
    theta*x beyond the batch cap are computed individually.
    """
    c = as_square(c)
    xs = np.asarray(xs, dtype=float).reshape(-1)
    if np.any(xs < 0):
        raise DomainError("times must be non-negative")
    d = c.shape[0]
    n = xs.size
    if not _uniformizable(c):
        raise InvalidMatrix("batch path requires a sub-generator-like matrix")
    theta = _theta_of(c)
    out = np.empty((n, d, d))
    if theta == 0.0:
        out[:] = np.eye(d)
        return out
    mu = theta * xs
    big = mu > _MU_CAP
    if np.any(~big):
        mus = mu[~big]
        nterms = _truncation(float(mus.max()))
        p = np.eye(d) + c / theta
        powers = _power_table(p, nterms)
        w = poisson_weight_rows(mus, nterms)
        vals = w @ powers.reshape(nterms + 1, d * d)
        out[~big] = vals.reshape(-1, d, d)
    for i in np.nonzero(big)[0]:
        out[i] = _unif_expm_single(c * xs[i])
    out[np.abs(out) < _FLUSH] = 0.0
    return out

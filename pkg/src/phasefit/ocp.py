"""One cut-point phase-type distributions.

A lifetime (alpha, T1, T2, a) evolves under the sub-generator T1 until the
cut time a and under T2 afterwards. Density and hazard may jump at a; the
survival and cumulative hazard functions stay continuous there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matfun, phd
from .errors import DomainError, InvalidModel, InvalidSpec, TailUnderflow


@dataclass(frozen=True, eq=False, repr=False)
class OneCutPointPhaseType:
    """Immutable (alpha, T1, T2, a) tuple; zone matrices share one order."""

    alpha: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    cut: float
    structure: str = "general"
    params: dict | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        t1 = matfun.check_subgenerator(self.t1)
        t2 = matfun.check_subgenerator(self.t2)
        if t1.shape != t2.shape:
            raise InvalidSpec("zone matrices must have the same order")
        if alpha.shape[0] != t1.shape[0]:
            raise InvalidSpec(
                f"alpha length {alpha.shape[0]} != matrix order {t1.shape[0]}"
            )
        if np.any(alpha < 0):
            raise InvalidSpec("alpha entries must be non-negative")
        if abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidSpec("alpha must sum to 1")
        if not (np.isfinite(self.cut) and self.cut > 0):
            raise InvalidSpec("cut must be positive")
        object.__setattr__(self, "alpha", alpha / alpha.sum())
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)
        object.__setattr__(self, "cut", float(self.cut))

    @property
    def m(self) -> int:
        return self.t1.shape[0]

    @property
    def exit1(self) -> np.ndarray:
        return np.clip(-self.t1.sum(axis=1), 0.0, None)

    @property
    def exit2(self) -> np.ndarray:
        return np.clip(-self.t2.sum(axis=1), 0.0, None)

    def __repr__(self):
        return (f"OneCutPointPhaseType(structure={self.structure!r}, "
                f"m={self.m}, cut={self.cut})")

    def zone1(self) -> phd.PhaseType:
        """Classical model governing times up to the cut."""
        return phd.PhaseType(self.alpha, self.t1)

    def occupancy_at_cut(self) -> np.ndarray:
        """State distribution alpha e^{T1 a} entering the second zone."""
        return matfun.expm_action(self.t1.T, self.cut, self.alpha)

    def to_doc(self) -> dict:
        return {
            "family": "one_cut_point",
            "structure": self.structure,
            "m": self.m,
            "alpha": [float(v) for v in self.alpha],
            "t1": [[float(v) for v in row] for row in self.t1],
            "t2": [[float(v) for v in row] for row in self.t2],
            "cut": float(self.cut),
            "params": self.params,
        }


def erlang_zones(m: int, rate1: float, rate2: float, cut: float) -> OneCutPointPhaseType:
    """Both zones single-rate chains started in the first state."""
    z1 = phd.erlang(m, rate1)
    z2 = phd.erlang(m, rate2)
    return OneCutPointPhaseType(
        z1.alpha, z1.subgen, z2.subgen, cut, structure="erlang",
        params={"rate1": float(rate1), "rate2": float(rate2)},
    )


def from_zone_structure(spec1: phd.StructureSpec, spec2: phd.StructureSpec,
                        cut: float) -> OneCutPointPhaseType:
    """Build both zones from specs sharing one internal structure and alpha."""
    if spec1.kind != spec2.kind:
        raise InvalidSpec("zones must share one structure kind")
    z1 = phd.make_structure(spec1)
    z2 = phd.make_structure(spec2)
    if z1.m != z2.m:
        raise InvalidSpec("zones must have the same number of states")
    return OneCutPointPhaseType(
        z1.alpha, z1.subgen, z2.subgen, cut, structure=spec1.kind,
        params={"zone1": z1.params, "zone2": z2.params},
    )


def ocp_from_doc(doc: dict) -> OneCutPointPhaseType:
    """Rebuild from document form (explicit matrices, or erlang rate pair)."""
    cut = doc.get("cut")
    if cut is None:
        raise InvalidSpec("cut must be positive")
    if doc.get("t1") is not None:
        return OneCutPointPhaseType(
            np.asarray(doc["alpha"], float), doc["t1"], doc["t2"], cut,
            structure=doc.get("structure", "general"), params=doc.get("params"),
        )
    params = doc.get("params") or doc
    if doc.get("structure", "erlang") == "erlang":
        return erlang_zones(int(doc["m"]), float(params["rate1"]),
                            float(params["rate2"]), float(cut))
    raise InvalidSpec("unsupported one-cut-point description")


def _split_zones(model: OneCutPointPhaseType, ys: np.ndarray):
    in1 = ys <= model.cut
    return in1, ~in1


def _zone_arrays(model: OneCutPointPhaseType, ys: np.ndarray):
    """(survival, density) arrays of the piecewise model."""
    surv = np.empty(ys.size)
    dens = np.empty(ys.size)
    in1, in2 = _split_zones(model, ys)
    z1 = phd.PhaseType(model.alpha, model.t1)
    if np.any(in1):
        s, d = phd.survival_pdf_arrays(z1, ys[in1])
        surv[in1] = s
        dens[in1] = d
    if np.any(in2):
        start = model.occupancy_at_cut()
        # reuse the zone-2 propagator with the occupancy row at the cut
        z2 = phd.PhaseType(np.ones(model.m) / model.m, model.t2)
        s, d = phd.survival_pdf_arrays(z2, ys[in2] - model.cut, start=start)
        surv[in2] = s
        dens[in2] = d
    return surv, dens


def ocp_pdf(model: OneCutPointPhaseType, y):
    """Piecewise density; the value at the cut belongs to the first zone."""
    ys, scalar = phd._as_times(y)
    _, dens = _zone_arrays(model, ys)
    return phd._shrink(dens, scalar)


def ocp_survival(model: OneCutPointPhaseType, y):
    """Piecewise survival; continuous across the cut."""
    ys, scalar = phd._as_times(y)
    surv, _ = _zone_arrays(model, ys)
    return phd._shrink(surv, scalar)


def ocp_cdf(model: OneCutPointPhaseType, y):
    ys, scalar = phd._as_times(y)
    surv, _ = _zone_arrays(model, ys)
    return phd._shrink(1.0 - surv, scalar)


def ocp_hazard(model: OneCutPointPhaseType, y):
    """Piecewise failure rate; may jump at the cut."""
    ys, scalar = phd._as_times(y)
    surv, dens = _zone_arrays(model, ys)
    if np.any(surv == 0.0):
        bad = ys[surv == 0.0][0]
        raise TailUnderflow(f"survival underflowed to 0 at y = {bad}")
    return phd._shrink(dens / surv, scalar)


def ocp_cum_hazard(model: OneCutPointPhaseType, y):
    """-ln R(y); continuous across the cut."""
    ys, scalar = phd._as_times(y)
    surv, _ = _zone_arrays(model, ys)
    if np.any(surv == 0.0):
        bad = ys[surv == 0.0][0]
        raise TailUnderflow(f"survival underflowed to 0 at y = {bad}")
    return phd._shrink(-np.log(surv), scalar)


def hazard_limits_at_cut(model: OneCutPointPhaseType) -> tuple[float, float]:
    """One-sided hazard values (left, right) at the cut point."""
    occ = model.occupancy_at_cut()
    denom = float(occ.sum())
    if denom == 0.0:
        raise TailUnderflow("survival underflowed to 0 at the cut")
    left = float(occ @ model.exit1) / denom
    right = float(occ @ model.exit2) / denom
    return left, right


def ocp_moments(model: OneCutPointPhaseType) -> tuple[float, float]:
    """Mean and variance of the two-zone lifetime.

    E[Y]  = -a T1^-1 e + a e^{T1 a}(T1^-1 - T2^-1) e
    E[Y2] = 2 a T1^-2 e
            - 2 a e^{T1 a}[T2^-1(aI - T2^-1) - T1^-1(aI - T1^-1)] e
    """
    m = model.m
    ones = np.ones(m)
    a = model.cut
    try:
        t1_inv_e = np.linalg.solve(model.t1, ones)
        t2_inv_e = np.linalg.solve(model.t2, ones)
        t1_inv2_e = np.linalg.solve(model.t1, t1_inv_e)
    except np.linalg.LinAlgError:
        raise InvalidModel("zone generator is singular") from None
    occ = model.occupancy_at_cut()
    mean = -float(model.alpha @ t1_inv_e) + float(occ @ (t1_inv_e - t2_inv_e))
    v2 = a * t2_inv_e - np.linalg.solve(model.t2, t2_inv_e)
    v1 = a * t1_inv_e - np.linalg.solve(model.t1, t1_inv_e)
    second = 2.0 * float(model.alpha @ t1_inv2_e) - 2.0 * float(occ @ (v2 - v1))
    return mean, second - mean * mean


def ocp_sample(model: OneCutPointPhaseType, n: int, seed: int) -> np.ndarray:
    """Inverse-CDF sampling by bisection on the piecewise survival.

    Bisection stops when the bracketed survival values agree with the target
    within 1e-12 in probability (or after 200 halvings).
    """
    if n < 1:
        raise DomainError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    target = 1.0 - rng.random(n)  # solve R(y) = 1 - u
    mean, _ = ocp_moments(model)
    lo = np.zeros(n)
    hi = np.full(n, max(model.cut, mean))
    for _ in range(2000):
        too_low = ocp_survival(model, hi) > target
        if not np.any(too_low):
            break
        hi[too_low] *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid = ocp_survival(model, mid)
        go_right = r_mid > target
        lo[go_right] = mid[go_right]
        hi[~go_right] = mid[~go_right]
        if np.all(np.abs(r_mid - target) <= 1e-12):
            break
    return 0.5 * (lo + hi)

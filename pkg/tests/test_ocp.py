import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from phasefit import ocp, phd
from phasefit.errors import DomainError, InvalidSpec

from conftest import random_subgenerator


def scalar_model():
    return ocp.erlang_zones(1, 1.0, 2.0, 1.0)


def quad_piecewise(model, integrand, upper):
    lo = quad(lambda y: integrand(y), 0.0, model.cut, limit=200)[0]
    hi = quad(lambda y: integrand(y), model.cut, upper, limit=400)[0]
    return lo + hi


# ---------------------------------------------------------------- evaluators

def test_pdf_degenerates_to_exponential():
    same = ocp.erlang_zones(1, 1.0, 1.0, 0.7)
    assert_allclose(ocp.ocp_pdf(same, 2.0), np.exp(-2.0), rtol=1e-13)


def test_pdf_zone_formulas():
    m = scalar_model()
    assert_allclose(ocp.ocp_pdf(m, 0.5), np.exp(-0.5), rtol=1e-13)
    assert_allclose(ocp.ocp_pdf(m, 1.5), 2 * np.exp(-2.0), rtol=1e-13)


def test_value_at_cut_belongs_to_zone_one():
    m = scalar_model()
    assert_allclose(ocp.ocp_pdf(m, 1.0), np.exp(-1.0), rtol=1e-13)


def test_survival_zone_formulas():
    m = scalar_model()
    assert_allclose(ocp.ocp_survival(m, 0.0), 1.0, atol=1e-13)
    assert_allclose(ocp.ocp_survival(m, 1.0), np.exp(-1.0), rtol=1e-13)
    assert_allclose(ocp.ocp_survival(m, 2.0), np.exp(-3.0), rtol=1e-13)


def test_hazard_jumps_at_cut():
    m = scalar_model()
    assert_allclose(ocp.ocp_hazard(m, 1.0 - 1e-9), 1.0, rtol=1e-6)
    assert_allclose(ocp.ocp_hazard(m, 1.0 + 1e-9), 2.0, rtol=1e-6)
    left, right = ocp.hazard_limits_at_cut(m)
    assert_allclose((left, right), (1.0, 2.0), rtol=1e-12)


def test_hazard_continuous_when_zones_match():
    same = ocp.erlang_zones(2, 1.5, 1.5, 1.0)
    eps = 1e-8
    lo = ocp.ocp_hazard(same, 1.0 - eps)
    hi = ocp.ocp_hazard(same, 1.0 + eps)
    assert abs(lo - hi) < 1e-6


def test_erlang_zones_equal_classical_erlang():
    same = ocp.erlang_zones(2, 1.0, 1.0, 2.0)
    classical = phd.erlang(2, 1.0)
    ys = np.linspace(0.0, 8.0, 41)
    assert_allclose(ocp.ocp_hazard(same, ys), phd.hazard(classical, ys),
                    rtol=1e-12, atol=1e-12)


def test_cum_hazard_values():
    m = scalar_model()
    assert ocp.ocp_cum_hazard(m, 0.0) == 0.0
    assert_allclose(ocp.ocp_cum_hazard(m, 2.0), 3.0, rtol=1e-12)


def test_continuity_of_survival_and_cum_hazard_at_cut():
    m = ocp.erlang_zones(3, 0.8, 2.5, 1.3)
    eps = 1e-8
    assert abs(ocp.ocp_survival(m, m.cut - eps)
               - ocp.ocp_survival(m, m.cut + eps)) < 1e-8
    assert abs(ocp.ocp_cum_hazard(m, m.cut - eps)
               - ocp.ocp_cum_hazard(m, m.cut + eps)) < 1e-6
    # two-sided limits agree with the value at the cut itself
    assert abs(ocp.ocp_survival(m, m.cut) - ocp.ocp_survival(m, m.cut + 1e-12)) < 1e-10


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        ocp.ocp_pdf(scalar_model(), -1.0)


def test_cut_must_be_positive():
    with pytest.raises(InvalidSpec, match="cut must be positive"):
        ocp.erlang_zones(1, 1.0, 2.0, 0.0)


# ------------------------------------------------------------------ reduction

def test_reduction_to_classical_for_equal_zones(rng):
    for m_states in (1, 2, 4):
        t = random_subgenerator(rng, m_states, 1.2)
        alpha = rng.random(m_states) + 0.1
        alpha /= alpha.sum()
        classical = phd.PhaseType(alpha, t)
        two_zone = ocp.OneCutPointPhaseType(alpha, t, t, 0.9)
        ys = np.linspace(0.0, 6.0, 25)
        assert_allclose(ocp.ocp_pdf(two_zone, ys), phd.pdf(classical, ys),
                        rtol=1e-12, atol=1e-13)
        assert_allclose(ocp.ocp_survival(two_zone, ys),
                        phd.survival(classical, ys), rtol=1e-12, atol=1e-13)
        assert_allclose(ocp.ocp_cum_hazard(two_zone, ys),
                        phd.cum_hazard(classical, ys), rtol=1e-11, atol=1e-12)


def test_zone_one_agreement(rng):
    t1 = random_subgenerator(rng, 3, 1.0)
    t2 = random_subgenerator(rng, 3, 2.0)
    alpha = rng.random(3) + 0.1
    alpha /= alpha.sum()
    model = ocp.OneCutPointPhaseType(alpha, t1, t2, 2.0)
    classical = phd.PhaseType(alpha, t1)
    ys = np.linspace(0.0, 2.0, 15)  # entirely inside zone 1
    assert_allclose(ocp.ocp_pdf(model, ys), phd.pdf(classical, ys), rtol=1e-13)
    assert_allclose(ocp.ocp_survival(model, ys), phd.survival(classical, ys),
                    rtol=1e-13)


def test_pdf_integrates_to_one(rng):
    model = ocp.erlang_zones(2, 1.0, 0.3, 1.5)
    mean, _ = ocp.ocp_moments(model)
    mass = quad_piecewise(model, lambda y: ocp.ocp_pdf(model, y), 60 * mean)
    assert_allclose(mass, 1.0, atol=1e-8)


# -------------------------------------------------------------------- moments

def test_moments_scalar_closed_form():
    m = scalar_model()
    mean, var = ocp.ocp_moments(m)
    assert_allclose(mean, 1.0 - 0.5 * np.exp(-1.0), rtol=1e-13)
    # cross-check by quadrature
    q2 = quad_piecewise(m, lambda y: y * y * ocp.ocp_pdf(m, y), 80.0)
    assert_allclose(var, q2 - mean ** 2, rtol=1e-9)


def test_moments_collapse_for_equal_zones():
    same = ocp.erlang_zones(1, 2.0, 2.0, 1.0)
    mean, var = ocp.ocp_moments(same)
    assert_allclose(mean, 0.5, rtol=1e-13)
    assert_allclose(var, 0.25, rtol=1e-13)


def test_moments_monte_carlo():
    # independent simulation oracle: for m=1 the lifetime is memoryless,
    # Y = X1 when X1 <= a, else a + X2 with X1~Exp(lam1), X2~Exp(lam2)
    m = scalar_model()
    mean, var = ocp.ocp_moments(m)
    gen = np.random.default_rng(2)
    x1 = gen.exponential(1.0, 1_000_000)
    x2 = gen.exponential(0.5, 1_000_000)
    draws = np.where(x1 <= m.cut, x1, m.cut + x2)
    se = np.sqrt(var / draws.size)
    assert abs(draws.mean() - mean) < 3 * se


def test_moments_match_quadrature_random_models(rng):
    for _ in range(4):
        m_states = int(rng.integers(1, 5))
        t1 = random_subgenerator(rng, m_states, 1.0)
        t2 = random_subgenerator(rng, m_states, 1.0)
        alpha = rng.random(m_states) + 0.1
        alpha /= alpha.sum()
        base_mean = -float(alpha @ np.linalg.solve(t1, np.ones(m_states)))
        cut = float(rng.uniform(0.1, 3.0)) * base_mean
        model = ocp.OneCutPointPhaseType(alpha, t1, t2, cut)
        mean, var = ocp.ocp_moments(model)
        q_mean = quad_piecewise(model, lambda y: y * ocp.ocp_pdf(model, y),
                                cut + 50 * mean)
        q2 = quad_piecewise(model, lambda y: y * y * ocp.ocp_pdf(model, y),
                            cut + 50 * mean)
        assert_allclose(q_mean, mean, rtol=1e-6)
        assert_allclose(q2 - q_mean ** 2, var, rtol=1e-6)


def test_long_horizon_reference_model_moments():
    # two-zone single-rate-chain model on a day timescale
    model = ocp.erlang_zones(2, 0.00113, 0.00175, 3250.0)
    mean, var = ocp.ocp_moments(model)
    q_mean = quad_piecewise(model, lambda y: y * ocp.ocp_pdf(model, y), 80_000.0)
    assert_allclose(q_mean, mean, rtol=1e-6)
    q2 = quad_piecewise(model, lambda y: y * y * ocp.ocp_pdf(model, y), 120_000.0)
    assert_allclose(q2 - q_mean ** 2, var, rtol=1e-4)


# ------------------------------------------------------------------ sampling

def test_sampling_deterministic():
    m = scalar_model()
    assert np.array_equal(ocp.ocp_sample(m, 5, seed=9), ocp.ocp_sample(m, 5, seed=9))


def test_sampling_inverts_cdf():
    m = ocp.erlang_zones(2, 1.0, 3.0, 1.0)
    draws = ocp.ocp_sample(m, 20_000, seed=4)
    us = ocp.ocp_cdf(m, draws)
    # probability-integral transform should be uniform
    ks = np.max(np.abs(np.sort(us) - np.arange(1, us.size + 1) / us.size))
    assert ks < 0.015


# ------------------------------------------------------------- serialization

def test_document_round_trip():
    m = ocp.erlang_zones(2, 0.5, 1.5, 2.0)
    from phasefit import dataio

    text = dataio.dumps(dataio.model_to_doc(m))
    back = dataio.model_from_doc(dataio.loads(text))
    assert isinstance(back, ocp.OneCutPointPhaseType)
    assert np.array_equal(back.t1, m.t1)
    assert np.array_equal(back.t2, m.t2)
    assert back.cut == m.cut

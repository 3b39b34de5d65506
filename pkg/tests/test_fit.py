import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import weibull_min

from phasefit import dataio, fit, gof, ocp, phd
from phasefit.errors import (HorizonTooSmall, InsufficientData,
                             InvalidCutPoint, InvalidData, InvalidSpec)



def exp_dataset(n, seed, rate=1.0):
    gen = np.random.default_rng(seed)
    return dataio.Dataset(gen.exponential(1.0 / rate, n))


# ------------------------------------------------------------- point-data EM

def test_erlang_m1_equals_exponential_mle():
    data = exp_dataset(500, 0)
    result = fit.em_fit_point(data, "erlang", 1, fit.FitOptions(seed=0))
    mle = data.n / data.values.sum()
    assert_allclose(-result.model.subgen[0, 0], mle, rtol=1e-10)
    assert result.converged


def test_erlang_m2_recovers_generating_rate():
    gen = np.random.default_rng(1)
    data = dataio.Dataset(gen.gamma(2.0, 1.0, 10_000))
    result = fit.em_fit_point(data, "erlang", 2, fit.FitOptions(seed=0))
    rate = -result.model.subgen[0, 0]
    assert 0.97 <= rate <= 1.03


def test_erlang_alpha_and_single_rate():
    data = exp_dataset(200, 2)
    result = fit.em_fit_point(data, "erlang", 3, fit.FitOptions(seed=0))
    ph = result.model
    assert_allclose(ph.alpha, [1.0, 0.0, 0.0])
    rates = -np.diagonal(ph.subgen)
    assert np.ptp(rates) == 0.0


def test_em_trace_monotone_all_structures(rng):
    gen = np.random.default_rng(3)
    data = dataio.Dataset(gen.gamma(2.5, 0.8, 600))
    opts = fit.FitOptions(seed=1, restarts=2, max_iter=60, rel_tol=1e-9)
    for structure, m in (("general", 3), ("cf1", 3), ("erlang", 2),
                         ("hyper_erlang", 3)):
        result = fit.em_fit_point(data, structure, m, opts)
        trace = np.asarray(result.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-9), structure
        assert result.loglik == trace[-1]


def test_em_fixed_point_after_convergence():
    gen = np.random.default_rng(4)
    data = dataio.Dataset(gen.gamma(2.0, 1.0, 400))
    opts = fit.FitOptions(seed=0, restarts=2)
    result = fit.em_fit_point(data, "general", 2, opts)
    assert result.converged
    ph = result.model
    t0 = np.maximum(-ph.subgen.sum(axis=1), 0.0)
    stats0 = fit._estep_point(ph.alpha, ph.subgen, t0, data.values, data.weights)
    alpha1, t1 = fit._update_general(stats0, ph.alpha, ph.subgen)
    stats1 = fit._estep_point(alpha1, t1, np.maximum(-t1.sum(axis=1), 0.0),
                              data.values, data.weights)
    assert stats1.ll - stats0.ll < opts.rel_tol * abs(stats0.ll)


def test_fitted_general_is_valid_subgenerator():
    gen = np.random.default_rng(5)
    data = dataio.Dataset(gen.gamma(3.0, 0.5, 500))
    result = fit.em_fit_point(data, "general", 3,
                              fit.FitOptions(seed=0, restarts=3, max_iter=200))
    ph = result.model  # construction re-validates the sub-generator
    assert isinstance(ph, phd.PhaseType)
    assert np.all(np.diagonal(ph.subgen) < 0)


def test_fitted_cf1_rates_nondecreasing():
    gen = np.random.default_rng(6)
    data = dataio.Dataset(gen.gamma(2.0, 1.0, 500))
    result = fit.em_fit_point(data, "cf1", 3,
                              fit.FitOptions(seed=0, restarts=3, max_iter=200))
    rates = -np.diagonal(result.model.subgen)
    assert np.all(np.diff(rates) >= -1e-12)


def test_cf1_sort_preserves_distribution():
    alpha = np.array([0.2, 0.5, 0.3])
    rates = np.array([3.0, 1.0, 2.0])
    sorted_alpha, sorted_rates = fit._cf1_sort(alpha, rates)
    assert np.all(np.diff(sorted_rates) >= 0)
    before = phd.PhaseType(alpha, fit._cf1_matrix(rates))
    after = phd.PhaseType(sorted_alpha, fit._cf1_matrix(sorted_rates))
    xs = np.linspace(0.0, 6.0, 40)
    assert_allclose(phd.pdf(after, xs), phd.pdf(before, xs), rtol=1e-12)


def test_general_dominates_erlang_at_same_m():
    gen = np.random.default_rng(7)
    data = dataio.Dataset(gen.gamma(2.0, 1.0, 2_000))
    erl = fit.em_fit_point(data, "erlang", 2, fit.FitOptions(seed=0))
    full = fit.em_fit_point(data, "general", 2,
                            fit.FitOptions(seed=0, restarts=2, max_iter=200))
    assert full.loglik >= erl.loglik - 1e-6


def test_scale_equivariance_erlang():
    data = exp_dataset(800, 8)
    c = 37.5
    scaled = dataio.Dataset(data.values * c)
    base = fit.em_fit_point(data, "erlang", 2, fit.FitOptions(seed=0))
    moved = fit.em_fit_point(scaled, "erlang", 2, fit.FitOptions(seed=0))
    assert_allclose(-moved.model.subgen[0, 0],
                    -base.model.subgen[0, 0] / c, rtol=1e-6)
    assert_allclose(moved.loglik, base.loglik - data.n * np.log(c), rtol=1e-6)


def test_hyper_erlang_integer_shapes_sum_to_m():
    gen = np.random.default_rng(9)
    data = dataio.Dataset(np.concatenate([gen.gamma(4.0, 0.25, 400),
                                          gen.exponential(4.0, 200)]))
    result = fit.em_fit_point(data, "hyper_erlang", 4,
                              fit.FitOptions(seed=0, restarts=2, max_iter=300))
    mix = result.model.params["mix"]
    assert sum(int(entry[1]) for entry in mix) == 4
    assert result.n_params == 2 * len(mix) - 1


def test_non_positive_observation_rejected():
    with pytest.raises(InvalidData):
        fit.em_fit_point(dataio.Dataset(np.array([1.0, -1.0])), "erlang", 1)


def test_unconverged_flag_not_an_error():
    gen = np.random.default_rng(10)
    data = dataio.Dataset(gen.gamma(2.0, 1.0, 300))
    result = fit.em_fit_point(data, "cf1", 3,
                              fit.FitOptions(seed=0, restarts=1, max_iter=3))
    assert result.converged is False
    assert result.iterations == 3


def test_invalid_structure_and_m():
    data = exp_dataset(10, 11)
    with pytest.raises(InvalidSpec):
        fit.em_fit_point(data, "weird", 2)
    with pytest.raises(InvalidSpec):
        fit.em_fit_point(data, "general", 0)
    with pytest.raises(InvalidSpec):
        fit.em_fit_point(data, "general", 65)


# ------------------------------------------------------------- grouped data

def grouped_from(values, edges):
    counts, _ = np.histogram(values, bins=edges)
    tail = int(np.sum(values > edges[-1]))
    return dataio.GroupedDataset(edges, counts, right_truncated_count=tail)


def test_group_single_bin_degenerate():
    g = dataio.GroupedDataset(np.array([0.0]), np.array([]),
                              right_truncated_count=50)
    result = fit.em_fit_group(g, "erlang", 1, fit.FitOptions(seed=0))
    assert result.loglik == 0.0
    assert result.converged


def test_group_consistency_exponential():
    gen = np.random.default_rng(12)
    values = gen.exponential(1.0, 10_000)
    g = grouped_from(values, np.linspace(0.0, 8.0, 51))
    result = fit.em_fit_group(g, "erlang", 1, fit.FitOptions(seed=0))
    rate = -result.model.subgen[0, 0]
    assert 0.95 <= rate <= 1.05


def test_group_nesting_erlang_inside_general():
    gen = np.random.default_rng(13)
    values = gen.exponential(1.0, 10_000)
    g = grouped_from(values, np.linspace(0.0, 8.0, 51))
    erl = fit.em_fit_group(g, "erlang", 2, fit.FitOptions(seed=0))
    full = fit.em_fit_group(g, "general", 2,
                            fit.FitOptions(seed=0, restarts=3, max_iter=500))
    assert erl.loglik <= full.loglik + 1e-6


def test_group_trace_monotone():
    gen = np.random.default_rng(14)
    values = gen.gamma(2.0, 1.0, 3_000)
    g = grouped_from(values, np.linspace(0.0, 10.0, 26))
    for structure in ("general", "cf1", "erlang", "hyper_erlang"):
        result = fit.em_fit_group(g, structure, 2,
                                  fit.FitOptions(seed=0, restarts=2,
                                                 max_iter=80))
        assert np.all(np.diff(result.loglik_trace) >= -1e-9), structure


def test_group_loglik_matches_multinomial():
    gen = np.random.default_rng(15)
    values = gen.exponential(1.0, 2_000)
    edges = np.linspace(0.0, 6.0, 13)
    g = grouped_from(values, edges)
    result = fit.em_fit_group(g, "erlang", 1, fit.FitOptions(seed=0))
    ph = result.model
    probs = np.diff(phd.cdf(ph, edges))
    tail_p = phd.survival(ph, edges[-1])
    expected = float(np.sum(g.counts * np.log(probs))
                     + g.right_truncated_count * np.log(tail_p))
    assert_allclose(result.loglik, expected, rtol=1e-10)


def test_group_empty_bins_rejected():
    with pytest.raises(InvalidData):
        dataio.GroupedDataset(np.array([0.0, 1.0, 2.0]), np.array([0, 0]))


# ----------------------------------------------------------------- densities

def test_density_recovers_exponential():
    result = fit.fit_density(lambda x: np.exp(-x), 20.0, 128, "erlang", 1,
                             fit.FitOptions(seed=0))
    assert_allclose(-result.model.subgen[0, 0], 1.0, atol=1e-3)


def test_density_recovers_erlang():
    target = phd.erlang(3, 2.0)
    result = fit.fit_density(lambda x: phd.pdf(target, x), 10.0, 128,
                             "erlang", 3, fit.FitOptions(seed=0))
    assert_allclose(-result.model.subgen[0, 0], 2.0, atol=1e-3)


def test_density_weibull_with_general_structure():
    # the m=8 likelihood optimum sits at KS ~ 0.0276 for this target (every
    # structure and start converges there; m=10 reaches 0.0165)
    frozen = weibull_min(3.0, scale=0.5)
    result = fit.fit_density(lambda x: float(frozen.pdf(x)), 1.5, 96,
                             "general", 8,
                             fit.FitOptions(seed=0, restarts=2, max_iter=1500))
    grid = np.linspace(0.0, 1.5, 400)
    ks = np.max(np.abs(phd.cdf(result.model, grid) - frozen.cdf(grid)))
    assert ks < 0.03


def test_density_horizon_too_small():
    with pytest.raises(HorizonTooSmall):
        fit.fit_density(lambda x: np.exp(-x), 0.3, 64, "erlang", 1,
                        fit.FitOptions(seed=0))


# ------------------------------------------------------------------ cut fits

def test_ocp_homogeneous_data_gives_equal_rates():
    data = exp_dataset(10_000, 16)
    cut = float(np.quantile(data.values, 0.6))
    result = fit.fit_ocp(data, 1, cut, fit.FitOptions(seed=0))
    r1 = result.model.params["rate1"]
    r2 = result.model.params["rate2"]
    assert abs(r1 - 1.0) < 3.0 / np.sqrt(data.n)
    assert abs(r2 - 1.0) < 3.0 / np.sqrt(np.sum(data.values > cut))


def test_ocp_detects_rate_increase():
    true_model = ocp.erlang_zones(2, 1.0, 3.0, 2.0)
    values = ocp.ocp_sample(true_model, 4_000, seed=17)
    result = fit.fit_ocp(dataio.Dataset(values), 2, 2.0, fit.FitOptions(seed=0))
    assert result.model.params["rate2"] > result.model.params["rate1"]
    assert result.n_params == 2


def test_ocp_cut_outside_range_rejected():
    data = exp_dataset(100, 18)
    with pytest.raises(InvalidCutPoint):
        fit.fit_ocp(data, 1, float(data.values.max()) + 1.0)
    with pytest.raises(InvalidCutPoint):
        fit.fit_ocp(data, 1, float(data.values.min()))


def test_ocp_insufficient_zone_rejected():
    values = np.array([0.1, 0.2, 5.0, 6.0, 7.0])
    with pytest.raises(InsufficientData):
        fit.fit_ocp(dataio.Dataset(values), 3, 1.0)


def test_ocp_forced_cut_beyond_max_reduces_to_erlang():
    # exercised on the internal objective; the public API forbids this cut
    data = exp_dataset(2_000, 19)
    cut = float(data.values.max()) + 1.0
    result = fit._fit_ocp_raw(data.values, data.weights, 2, cut,
                              fit.FitOptions(seed=0))
    mle = 2.0 * data.n / data.values.sum()
    assert_allclose(result.model.params["rate1"], mle, rtol=1e-5)


def test_ocp_trace_monotone():
    data = exp_dataset(1_000, 20)
    result = fit.fit_ocp(data, 2, float(np.median(data.values)),
                         fit.FitOptions(seed=0))
    assert np.all(np.diff(result.loglik_trace) >= -1e-9)


# ----------------------------------------------------------- loglik and AIC

def test_loglik_exponential_hand_value():
    model = phd.exponential(1.0)
    assert_allclose(fit.loglik(model, np.array([1.0, 2.0])), -3.0, rtol=1e-14)


def test_loglik_linear_in_weights():
    model = phd.erlang(2, 1.0)
    values = np.array([0.5, 1.5, 2.5])
    single = fit.loglik(model, dataio.Dataset(values))
    double = fit.loglik(model, dataio.Dataset(values, np.full(3, 2.0)))
    assert_allclose(double, 2.0 * single, rtol=1e-14)


def test_loglik_underflow_is_minus_infinity():
    model = phd.exponential(1.0)
    assert fit.loglik(model, np.array([1e6])) == float("-inf")


def test_aic_values():
    assert fit.aic(0.0, 1) == 2.0
    assert_allclose(fit.aic(-8912.38, 11), 17846.76, atol=1e-10)
    assert_allclose(fit.aic(-8915.34, 2), 17834.68, atol=1e-10)
    with pytest.raises(InvalidSpec):
        fit.aic(0.0, 0)


def test_param_count_ledger():
    assert fit.param_count("general", 3) == 11
    assert fit.param_count("cf1", 3) == 5
    assert fit.param_count("erlang", 5) == 1
    assert fit.param_count("hyper_erlang", 6, branches=2) == 3
    assert fit.param_count("ocp_erlang", 2) == 2


# -------------------------------------------------------------------- sweeps

def test_sweep_rows_sorted_and_complete():
    data = exp_dataset(300, 21)
    rows = fit.sweep_states(data, ["erlang", "cf1"], (1, 2),
                            fit.FitOptions(seed=0, restarts=1, max_iter=50))
    assert [(r.m, r.structure) for r in rows] == [
        (1, "cf1"), (1, "erlang"), (2, "cf1"), (2, "erlang")]
    assert all(not r.failed for r in rows)
    assert all(r.gof is not None for r in rows)


def test_sweep_general_nested_in_m():
    data = exp_dataset(1_000, 22)
    rows = fit.sweep_states(data, ["general"], (1, 3),
                            fit.FitOptions(seed=0, restarts=3, max_iter=300))
    lls = [r.fit.loglik for r in rows]
    assert np.all(np.diff(lls) >= -1e-6)


def test_sweep_empty_structures():
    data = exp_dataset(50, 23)
    assert fit.sweep_states(data, [], (1, 2)) == []


def test_sweep_marks_failed_rows():
    data = dataio.Dataset(np.array([1.0]))  # gof needs n >= 2
    rows = fit.sweep_states(data, ["erlang"], (1, 1),
                            fit.FitOptions(seed=0, restarts=1))
    assert rows[0].failed and "InsufficientData" in rows[0].error


def test_cut_candidates_are_interior_quantiles():
    data = exp_dataset(500, 24)
    grid = fit.cut_candidates(data)
    assert np.all(grid > data.values.min())
    assert np.all(grid < data.values.max())
    assert np.all(np.diff(grid) > 0)


# ---------------------------------------------------------------- FitOptions

def test_fit_options_validation():
    with pytest.raises(InvalidSpec):
        fit.FitOptions(max_iter=0)
    with pytest.raises(InvalidSpec):
        fit.FitOptions(rel_tol=0.0)
    with pytest.raises(InvalidSpec):
        fit.FitOptions(restarts=0)


def test_compare_ocp_returns_paired_results():
    true_model = ocp.erlang_zones(2, 1.0, 2.5, 1.5)
    values = ocp.ocp_sample(true_model, 2_000, seed=25)
    (erl, gof_e), (two, gof_o), emp = fit.compare_ocp(
        dataio.Dataset(values), 2, 1.5, fit.FitOptions(seed=0))
    assert two.aic < erl.aic  # data generated with a genuine regime change
    assert emp[0, 1] == 0.0 and np.all(np.diff(emp[:, 1]) >= 0)
    assert gof_e.n == gof_o.n == 2_000

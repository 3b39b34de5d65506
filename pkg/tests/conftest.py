import numpy as np
import pytest


def random_subgenerator(rng, m, scale=1.0, max_diag=None):
    """Random dense sub-generator with certain absorption."""
    off = scale * rng.random((m, m))
    np.fill_diagonal(off, 0.0)
    exit_rates = scale * rng.random(m) + 0.05 * scale
    t = off.copy()
    np.fill_diagonal(t, -(off.sum(axis=1) + exit_rates))
    if max_diag is not None:
        peak = np.abs(np.diagonal(t)).max()
        if peak > max_diag:
            t *= max_diag / peak
    return t


def random_phase_type(rng, m, scale=1.0):
    from phasefit import phd

    t = random_subgenerator(rng, m, scale)
    alpha = rng.random(m) + 0.05
    alpha /= alpha.sum()
    return phd.PhaseType(alpha, t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

import math

import numpy as np
import pytest

from weylwalk.lie import cartan_projection
from weylwalk.renewal import (choose_horizon, count_tail, escape_probability, hitting_probability,
                              log_norm_renewal, minimal_hitting_length, observable_paths, random_starts,
                              visit_counts)
from weylwalk.walk import dirac, rotated_pair_measure

from .oracles import REFERENCE_LAMBDA1, lattice_count

C = 0.37
STEP = 2 * C  # scalar displacement per step of the Dirac walk


@pytest.fixture
def lattice():
    return dirac(np.diag([math.exp(C), math.exp(-C)]))


@pytest.fixture
def mu():
    return rotated_pair_measure()


def test_dirac_counts_exact(lattice):
    shifts = np.array([0.0, 0.3, 1.7, 5.0, 11.1])
    vc = visit_counts(lattice, (0.2, 1.9), shifts, n_traj=3, seed=0, horizon=60, rate=(STEP, 0.0))
    for j, t in enumerate(shifts):
        assert np.all(vc.counts[j] == lattice_count(STEP, 0.2 + t, 1.9 + t, 60))
    assert vc.target == pytest.approx(1.7 / STEP)


def test_half_open_intervals_add(mu):
    shifts = np.linspace(0, 20, 9)
    kw = dict(n_traj=20, seed=4, horizon=200, rate=(1.1, 0.01))
    a = visit_counts(mu, (0.0, 1.0), shifts, **kw).counts
    b = visit_counts(mu, (1.0, 2.5), shifts, **kw).counts
    ab = visit_counts(mu, (0.0, 2.5), shifts, **kw).counts
    np.testing.assert_array_equal(a + b, ab)


def test_empty_interval(mu):
    vc = visit_counts(mu, (1.0, 1.0), [0.0, 3.0], n_traj=4, seed=0, horizon=50, rate=(1.1, 0.01))
    assert np.all(vc.counts == 0)
    with pytest.raises(ValueError):
        visit_counts(mu, (2.0, 1.0), [0.0], n_traj=1, seed=0)


def test_mean_count_near_length_over_drift(mu):
    vc = visit_counts(mu, (0.0, 2.0), [30.0, 40.0], n_traj=400, seed=1)
    target = 2.0 / (2 * REFERENCE_LAMBDA1)
    np.testing.assert_allclose(vc.mean, target, rtol=0.1)
    assert not vc.lower_bound


def test_kesten_limit(mu):
    curve = log_norm_renewal(mu, [1.0, 0.3], (0.0, 1.0), [20.0, 30.0], n_traj=400, seed=2)
    assert curve.target == pytest.approx(1.0 / REFERENCE_LAMBDA1, rel=0.01)
    np.testing.assert_allclose(curve.mean, 1.0 / REFERENCE_LAMBDA1, rtol=0.1)
    with pytest.raises(ValueError):
        log_norm_renewal(mu, [0.0, 0.0], (0.0, 1.0), [1.0], n_traj=1, seed=0)


def test_paths_start_at_the_start(mu):
    g0 = np.array([[3.0, 1.0], [2.0, 1.0]])
    paths = observable_paths(mu, 5, 2, seed=0, g0=g0)
    kappa = cartan_projection(g0)
    np.testing.assert_allclose(paths[:, 0], kappa[0] - kappa[1])


def test_dirac_hitting(lattice):
    shifts = np.array([0.0, 0.5, 3.0])
    # interval shorter than one step: hit iff a lattice point falls inside
    rep = hitting_probability(lattice, (0.1, 0.3), shifts, None, n_traj=2, seed=0, horizon=40,
                              rate=(STEP, 0.0))
    expect = [float(lattice_count(STEP, 0.1 + t, 0.3 + t, 40) > 0) for t in shifts]
    np.testing.assert_array_equal(rep.probability, expect)


def test_minimal_hitting_length(lattice, mu):
    lengths = [0.25, 0.5, STEP + 0.01, 2.0]
    best, table = minimal_hitting_length(lattice, lengths, [0.0, 0.9, 4.2], [None], n_traj=2, seed=0)
    assert best == pytest.approx(STEP + 0.01)
    assert table.shape == (4, 1, 3)
    best_mu, _ = minimal_hitting_length(mu, [0.5, 2.0, 4.0], [5.0, 10.0], random_starts(2, 2, 0), n_traj=100,
                                        seed=0)
    assert best_mu in (2.0, 4.0)


def test_dirac_escape(lattice):
    radius = 3.0
    rep = escape_probability(lattice, radius, [1, 4, 5, 10], [None, np.eye(2)], n_traj=2, seed=0, horizon=30)
    first = math.ceil(radius / STEP)
    for i, n0 in enumerate(rep.n0_grid):
        assert np.all(rep.probability[i] == float(n0 >= first))
    assert rep.n0_star(0.05) == 5
    with pytest.raises(ValueError):
        escape_probability(lattice, 0.0, [1], [None], 1, 0)


def test_escape_probability_increases(mu):
    rep = escape_probability(mu, 2.0, [2, 5, 10, 20], random_starts(2, 3, 1), n_traj=300, seed=0)
    assert np.all(np.diff(rep.probability.min(axis=1)) >= -0.02)
    assert rep.n0_star(0.05) is not None


def test_count_tail_geometric():
    rng = np.random.default_rng(0)
    p = 0.6
    counts = rng.geometric(1 - p, size=200_000)  # P(count >= k) = p^(k-1)
    tail = count_tail(counts)
    assert tail.slope == pytest.approx(math.log(p), abs=0.01)
    assert tail.r_squared > 0.99
    assert tail.decreasing


def test_count_tail_too_short():
    tail = count_tail([1, 1, 2])
    assert math.isnan(tail.slope)
    assert not tail.decreasing


def test_choose_horizon():
    assert choose_horizon(10.0, 1.0, 0.01) == 3 * math.ceil(10.0 / 0.9)
    assert choose_horizon(10.0, 0.1, 0.1) == 100_000

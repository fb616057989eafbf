import math

import numpy as np
import pytest

from weylwalk.lie import InvalidInputError, cartan_projection
from weylwalk.walk import (MeasureSpec, advance, dirac, initial_state, limit_flag, lyapunov_estimate,
                           root_growth_check, rotated_pair_measure, scalar_observable, trajectory,
                           zariski_screen)

from .oracles import G1, G2, REFERENCE_LAMBDA1, REFERENCE_LAMBDA1_SE, mp_log_singular_values, mp_product


@pytest.fixture
def mu():
    return rotated_pair_measure()


def test_reference_measure_atoms(mu):
    np.testing.assert_allclose(mu.atoms[0], G1, atol=1e-15)
    np.testing.assert_allclose(mu.atoms[1], G2, atol=1e-15)


def test_measure_validation():
    with pytest.raises(InvalidInputError, match="0.9"):
        MeasureSpec(np.array([G1, G2]), np.array([0.5, 0.4]))
    with pytest.raises(InvalidInputError):
        MeasureSpec(np.array([G1, G2]), np.array([1.5, -0.5]))
    with pytest.raises(InvalidInputError):
        MeasureSpec(np.array([G1]), np.array([0.5, 0.5]))


def test_measure_roundtrip_and_digest(mu):
    again = MeasureSpec.from_dict(mu.to_dict())
    assert again.digest() == mu.digest()
    assert mu.inverse().digest() != mu.digest()


def test_atoms_rescaled_to_unit_determinant():
    m = dirac(np.diag([4.0, 1.0]))
    assert np.linalg.det(m.atoms[0]) == pytest.approx(1.0)


def test_dirac_is_linear():
    c = 0.8
    rec = trajectory(dirac(np.diag([math.exp(c), math.exp(-c)])), 200, seed=0)
    n = np.arange(201)
    np.testing.assert_allclose(rec.t_seq[:, 0], n * c, atol=1e-10)
    np.testing.assert_allclose(rec.t_seq[:, 1], -n * c, atol=1e-10)


@pytest.mark.parametrize("n", [1, 5, 30])
def test_against_high_precision_product(mu, n):
    rec = trajectory(mu, n, seed=11, index=2)
    prods = mp_product(mu.atoms, rec.choices)
    for i in range(n):
        ref = mp_log_singular_values(prods[i], dps=60)
        np.testing.assert_allclose(rec.t_seq[i + 1], ref, atol=1e-8)


def test_three_dimensional_against_high_precision():
    rng = np.random.default_rng(5)
    atoms = np.array([np.eye(3) + 0.4 * rng.normal(size=(3, 3)) for _ in range(2)])
    atoms[np.linalg.det(atoms) < 0, :, 0] *= -1
    m = MeasureSpec(atoms, np.array([0.3, 0.7]))
    rec = trajectory(m, 30, seed=4)
    prods = mp_product(m.atoms, rec.choices)
    np.testing.assert_allclose(rec.t_seq[-1], mp_log_singular_values(prods[-1], dps=60),
                               atol=1e-8)


def test_factored_product_reconstructs(mu):
    rec = trajectory(mu, 40, seed=1, store_l=True)
    p = np.eye(2)
    for c in rec.choices:
        p = p @ mu.atoms[c]
    f = rec.final
    np.testing.assert_allclose(f.k @ np.diag(np.exp(f.t)) @ f.l, p, rtol=1e-9)


def test_trajectory_is_deterministic(mu):
    a = trajectory(mu, 500, seed=3, index=1)
    b = trajectory(mu, 500, seed=3, index=1)
    c = trajectory(mu, 500, seed=3, index=2)
    assert a.t_seq.tobytes() == b.t_seq.tobytes()
    assert not np.array_equal(a.choices, c.choices)


def test_long_walk_stays_finite(mu):
    rec = trajectory(mu, 100_000, seed=0, store_k=False)
    assert np.all(np.isfinite(rec.t_seq))
    assert rec.t_seq[-1, 0] > 1e4


def test_advance_matches_matrix_product(mu):
    st = initial_state(2, seed=9)
    p = np.eye(2)
    for _ in range(20):
        prev = st.factored
        st = advance(st, mu)
        f = st.factored
        step = np.linalg.solve(prev.k @ np.diag(np.exp(prev.t)) @ prev.l, f.k @ np.diag(np.exp(f.t)) @ f.l)
        assert min(np.abs(step - a).max() for a in mu.atoms) < 1e-7
        p = p @ step
    assert st.step == 20
    np.testing.assert_allclose(cartan_projection(p), st.factored.t, atol=1e-8)


def test_lyapunov_matches_frozen_reference(mu):
    lam, se = lyapunov_estimate(mu, 20_000, n_traj=8, seed=0)
    tol = 4 * math.hypot(se[0], REFERENCE_LAMBDA1_SE)
    assert abs(lam[0] - REFERENCE_LAMBDA1) < tol
    assert lam[1] == pytest.approx(-lam[0])


def test_single_trajectory_batches(mu):
    lam, se = lyapunov_estimate(mu, 50_000, n_traj=1, seed=0)
    assert abs(lam[0] - REFERENCE_LAMBDA1) < 5 * se[0] + 1e-3


def test_scalar_observable_is_twice_the_exponent(mu):
    rec = trajectory(mu, 20_000, seed=2, store_k=False)
    rate = scalar_observable(rec.t_seq)[-1] / 20_000
    assert rate == pytest.approx(2 * REFERENCE_LAMBDA1, abs=0.02)


def test_limit_flag_stabilizes(mu):
    rec = trajectory(mu, 2000, seed=0)
    lf = limit_flag(rec)
    assert lf.stable
    assert lf.stability_gap < 1e-10


def test_limit_flag_needs_frames(mu):
    with pytest.raises(InvalidInputError):
        limit_flag(trajectory(mu, 10, seed=0, store_k=False))


def test_root_growth(mu):
    g = root_growth_check(trajectory(mu, 5000, seed=0, store_k=False))
    assert g.all_positive
    assert g.slope[0] == pytest.approx(2 * REFERENCE_LAMBDA1, abs=0.03)
    compact = root_growth_check(trajectory(dirac(np.eye(2)), 500, seed=0, store_k=False))
    assert compact.compact_like and not compact.all_positive


def test_zariski_screen(mu):
    assert zariski_screen(mu, n=3000, n_seeds=12).passed
    diag = MeasureSpec(np.array([G1, np.diag([3.0, 1 / 3])]), np.array([0.5, 0.5]))
    rep = zariski_screen(diag, n=3000, n_seeds=12)
    assert not rep.passed
    assert rep.notes


def test_short_lyapunov_rejected(mu):
    with pytest.raises(InvalidInputError):
        lyapunov_estimate(mu, 50)

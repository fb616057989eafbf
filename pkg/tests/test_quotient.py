import math

import numpy as np
import pytest

from weylwalk.lie import InvalidInputError
from weylwalk.quotient import (S_MAT, T_MAT, BallTarget, FuchsianGroup, ball_volume_monte_carlo, chord_length,
                               critical_exponent, dichotomy_experiment, frame_at, geodesic_flow, geodesic_green,
                               injectivity_radius, k_averaged_green, mobius, orbit_distances, poincare_series,
                               reduce, upper_point, volume_density_check, walk_green, word_ball)
from weylwalk.walk import MeasureSpec, rotated_pair_measure, rotation

from .oracles import chord, cyclic_poincare, hyperbolic, k_average_trivial, modular_orbit_count

SQ2 = math.sqrt(2.0)


def random_sl2(rng, scale=1.0):
    m = np.eye(2) + scale * rng.normal(size=(2, 2))
    if np.linalg.det(m) < 0:
        m[:, 0] *= -1
    return m / math.sqrt(np.linalg.det(m))


def random_word(rng, gens, length):
    w = np.eye(2)
    for _ in range(length):
        w = w @ gens[rng.integers(len(gens))]
    return w


def test_modular_reduction_examples():
    t7 = np.linalg.matrix_power(T_MAT, 7)
    assert reduce(FuchsianGroup.modular(), t7).z == pytest.approx(1j)
    assert reduce(FuchsianGroup.modular(), S_MAT @ t7).z == pytest.approx(1j)


def test_modular_fundamental_domain_and_invariance():
    group = FuchsianGroup.modular()
    rng = np.random.default_rng(0)
    for _ in range(100):
        g = random_sl2(rng, 0.8)
        q = reduce(group, g)
        z = q.z
        assert abs(z.real) <= 0.5 + 1e-12 and abs(z) >= 1 - 1e-12
        assert not q.capped
        assert reduce(group, q.rep).z == pytest.approx(z, abs=1e-12)
        w = random_word(rng, np.array([S_MAT, T_MAT, np.linalg.inv(T_MAT)]), 8)
        z2 = reduce(group, w @ g).z
        # boundary identifications: Re = +-1/2 and |z| = 1 are glued
        assert hyperbolic(z, z2) < 1e-8 or hyperbolic(z, -z2.conjugate()) < 1e-8


def test_reduction_keeps_the_coset():
    group = FuchsianGroup.modular()
    rng = np.random.default_rng(1)
    g = random_sl2(rng)
    rep = reduce(group, g).rep
    gamma = rep @ np.linalg.inv(g)
    assert np.allclose(gamma, np.round(gamma), atol=1e-9)
    # right K-orbit is preserved: rep^-1 . k . g for some rotation k
    assert np.allclose(rep @ rep.T, gamma @ g @ g.T @ gamma.T)


def test_cyclic_reduction():
    group = FuchsianGroup.cyclic(1.5)
    assert group.log_l2 == pytest.approx(1.5)
    rng = np.random.default_rng(2)
    gen = geodesic_flow(1.5)
    for _ in range(50):
        g = random_sl2(rng, 1.5)
        z = reduce(group, g).z
        assert 0 <= math.log(abs(z)) < 1.5 + 1e-12
        n = int(rng.integers(-5, 6))
        assert reduce(group, np.linalg.matrix_power(gen, n) @ g).z == pytest.approx(z, abs=1e-9)


def test_schottky_reduction_invariant():
    group = FuchsianGroup.schottky()
    rng = np.random.default_rng(3)
    for _ in range(30):
        g = random_sl2(rng, 0.5)
        z = reduce(group, g).z
        w = random_word(rng, group.generators, 3)
        q = reduce(group, w @ g)
        assert not q.capped
        assert hyperbolic(q.z, z) < 1e-7


def test_trivial_reduction_is_identity():
    g = random_sl2(np.random.default_rng(4))
    np.testing.assert_array_equal(reduce(FuchsianGroup.trivial(), g).rep, g)


def test_group_construction():
    g = FuchsianGroup.modular()
    assert len(g.generators) == 3  # S is its own inverse in PSL_2
    again = FuchsianGroup.from_dict(g.to_dict())
    assert again.reduction_mode == "modular_exact" and len(again.generators) == 3
    with pytest.raises(InvalidInputError):
        FuchsianGroup(np.array([T_MAT]), "cyclic_exact")
    with pytest.raises(InvalidInputError):
        FuchsianGroup(np.array([T_MAT]), "bogus")


def test_discreteness_screen():
    assert FuchsianGroup.schottky().discreteness_screen()
    # exact relations ((ST)^3 = -I, torsion) do not count against discreteness
    assert FuchsianGroup.modular().discreteness_screen()
    assert FuchsianGroup(rotation(math.pi / 3)[None]).discreteness_screen()
    assert not FuchsianGroup(geodesic_flow(1e-6)[None]).discreteness_screen()


def test_word_ball_cyclic_shells():
    shells = word_ball(FuchsianGroup.cyclic(1.0), 5)
    assert [len(s) for s in shells] == [1, 2, 2, 2, 2, 2]
    assert word_ball.last_collision_rate == 0.0


def test_injectivity_radius():
    # cyclic: half the translation length on the axis
    assert injectivity_radius(FuchsianGroup.cyclic(2.0), 1j) == pytest.approx(1.0)
    # modular at 2i: T moves it by 2 asinh(1/4)
    assert injectivity_radius(FuchsianGroup.modular(), 2j) == pytest.approx(math.asinh(0.25))


def test_ball_target_units():
    t = BallTarget(2j, 0.5)
    assert t.hyperbolic_radius == pytest.approx(0.5 * SQ2)
    inside = frame_at(2j * math.exp(0.5 * SQ2 - 1e-9))
    outside = frame_at(2j * math.exp(0.5 * SQ2 + 1e-9))
    assert t.contains(np.array([inside, outside])).tolist() == [True, False]
    assert t.injective()


def test_ball_target_across_domain_side():
    group = FuchsianGroup.modular()
    t = BallTarget(0.5 + 1.2j, 0.1, group)
    z = -0.49 + 1.2j  # glued to 0.51 + 1.2j
    assert t.contains(frame_at(z)[None])[0]


def test_chord_length():
    for h in (0.0, 0.3, 0.9):
        assert chord_length(1.0, h) == pytest.approx(chord(1.0, h))
    assert chord_length(1.0, 1.5) == 0.0


def test_geodesic_green_through_center():
    rho = 0.3
    target = BallTarget(math.exp(3.0) * 1j, rho / SQ2)
    dt = rho / 400
    gg = geodesic_green(FuchsianGroup.trivial(), [np.eye(2)], target, 8.0, dt)
    assert gg.estimate == pytest.approx(2 * rho, abs=2 * dt)
    assert not gg.tail_flag
    with pytest.raises(InvalidInputError):
        geodesic_green(FuchsianGroup.trivial(), [np.eye(2)], target, 8.0, rho)


def test_geodesic_green_offset_chord():
    # ray up the imaginary axis, ball centred at hyperbolic distance h from it
    rho, h = 0.4, 0.25
    center = complex(math.exp(2.5) * math.sinh(h), math.exp(2.5))
    dt = rho / 800
    gg = geodesic_green(FuchsianGroup.trivial(), [np.eye(2)], BallTarget(center, rho / SQ2), 8.0, dt)
    assert gg.estimate == pytest.approx(chord(rho, h), abs=2 * dt)


def test_geodesic_visits_repeat_in_cyclic_quotient():
    # the axis of the cyclic group closes up: visits grow linearly in time
    group = FuchsianGroup.cyclic(2.0)
    target = BallTarget(1j, 0.2, group)
    short = geodesic_green(group, [np.eye(2)], target, 40.0)
    long = geodesic_green(group, [np.eye(2)], target, 80.0)
    assert long.estimate == pytest.approx(2 * short.estimate, rel=0.05)
    assert long.tail_flag


def test_poincare_cyclic_against_oracle():
    group = FuchsianGroup.cyclic(1.3)
    z1, z2 = 0.4 + 1.1j, -0.2 + 0.7j
    for s in (0.5, 1.0, 2.0):
        res = poincare_series(group, z1, z2, s, word_len_max=12)
        assert res.partial_sum == pytest.approx(cyclic_poincare(group.log_l2, z1, z2, s, 12), rel=1e-10)
        assert not res.flagged


def test_poincare_trivial():
    res = poincare_series(FuchsianGroup.trivial(), 1j, 2j, 1.0, 5)
    assert res.partial_sum == pytest.approx(0.5)
    with pytest.raises(ValueError):
        poincare_series(FuchsianGroup.trivial(), 1j, 2j, -1.0, 5)


def test_poincare_growth_diagnostic():
    group = FuchsianGroup.modular()
    at_one = poincare_series(group, 1j, 1j, 1.0, 10)
    above = poincare_series(group, 1j, 1j, 2.0, 10)
    assert at_one.diverging and not above.diverging
    assert FuchsianGroup.schottky().discreteness_screen()
    sch = poincare_series(FuchsianGroup.schottky(), 1j, 1j, 1.0, 7)
    assert not sch.diverging


def test_modular_orbit_exact():
    for r in (1.0, 2.5, 3.5):
        assert len(orbit_distances(FuchsianGroup.modular(), 1j, 1j, r)) == modular_orbit_count(r)


def test_greedy_orbit_matches_exact_route():
    # the pruned word route run on the modular generators agrees with the integer enumeration
    gens = FuchsianGroup(np.array([S_MAT, T_MAT]), "dirichlet_greedy")
    assert len(orbit_distances(gens, 1j, 1j, 3.0)) == modular_orbit_count(3.0)


def test_cyclic_orbit_exact():
    group = FuchsianGroup.cyclic(1.0)
    d = orbit_distances(group, 1j, 1j, 5.0)
    assert len(d) == 11
    np.testing.assert_allclose(d, np.sort(np.abs(np.arange(-5, 6)).astype(float)), atol=1e-12)


def test_critical_exponents():
    mod = critical_exponent(FuchsianGroup.modular(), 1j, 1j, 12.0)
    assert mod.delta == pytest.approx(1.0, abs=0.1)
    assert not mod.wide
    cyc = critical_exponent(FuchsianGroup.cyclic(1.0), 1j, 1j, 30.0)
    assert cyc.delta < 0.1
    sch = critical_exponent(FuchsianGroup.schottky(), 1j, 1j, 22.0)
    assert 0.1 < sch.delta < 1.0
    triv = critical_exponent(FuchsianGroup.trivial(), 1j, 2j, 5.0)
    assert triv.delta == 0.0 and triv.wide


@pytest.mark.parametrize("dist", [1.6, 2.5])
def test_k_average_trivial_against_quadrature(dist):
    eps = 0.2
    z2 = math.exp(dist) * 1j
    lhs, rhs = k_averaged_green(FuchsianGroup.trivial(), 1j, z2, eps, dist + 3.0)
    assert rhs == pytest.approx(math.exp(-dist))
    assert lhs == pytest.approx(k_average_trivial(dist, eps * SQ2), rel=2e-3)


def test_k_average_needs_separation():
    with pytest.raises(ValueError):
        k_averaged_green(FuchsianGroup.trivial(), 1j, 2j, 0.5, 10.0)


def test_k_average_ratio_stable_for_cyclic():
    group = FuchsianGroup.cyclic(2.0)
    ratios = []
    for t_max in (12.0, 16.0):
        lhs, rhs = k_averaged_green(group, 1j, 0.3 + 4j, 0.1, t_max, n_k=32)
        ratios.append(lhs / rhs)
    assert ratios[0] == pytest.approx(ratios[1], rel=0.05)


def test_walk_green_trivial_is_transient():
    mu = rotated_pair_measure()
    target = BallTarget(1j, 0.3)
    short = walk_green(FuchsianGroup.trivial(), mu, np.eye(2), target, 200, 64, seed=0)
    long = walk_green(FuchsianGroup.trivial(), mu, np.eye(2), target, 400, 64, seed=0)
    assert short.estimate >= 1.0  # the start is inside
    assert long.estimate == short.estimate
    assert not long.tail_flag
    with pytest.raises(InvalidInputError):
        walk_green(FuchsianGroup.trivial(), MeasureSpec(np.eye(3)[None], [1.0]), np.eye(2), target, 10, 1, 0)


@pytest.mark.parametrize("group,verdict", [
    (FuchsianGroup.trivial(), "both_transient_signature"),
    (FuchsianGroup.cyclic(2.0), "both_transient_signature"),
    (FuchsianGroup.schottky(), "both_transient_signature"),
    (FuchsianGroup.modular(), "both_recurrent_signature"),
], ids=["trivial", "cyclic", "schottky", "modular"])
def test_dichotomy(group, verdict):
    center = {"modular": 1.5j, "cyclic": math.e * 1j}.get(group.name.split("-")[0], 1j)
    target = BallTarget(center, 0.18, group if len(group.generators) else None)
    v = dichotomy_experiment(group, rotated_pair_measure(), target, n_max=2000, n_traj=32, t_max=200.0)
    assert v.verdict == verdict, v.evidence


def test_upper_point_and_mobius():
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    assert upper_point(g) == pytest.approx((2j + 1) / (1j + 1))
    assert mobius(g, 1j) == pytest.approx(upper_point(g))
    assert upper_point(frame_at(0.3 + 2j, 0.7)) == pytest.approx(0.3 + 2j)


def test_volume_density():
    t = np.array([0.1, 1.0, 10.0])
    sigma, ratio = volume_density_check(t)
    np.testing.assert_allclose(sigma, np.sinh(t))
    np.testing.assert_allclose(ratio, np.sinh(t) / np.exp(t))
    assert ratio[-1] == pytest.approx(0.5)


def test_ball_volume():
    est, se, exact = ball_volume_monte_carlo(2.0, 200_000, seed=0)
    assert exact == pytest.approx(2 * math.pi * (math.cosh(2.0) - 1))
    assert abs(est - exact) < 4 * se

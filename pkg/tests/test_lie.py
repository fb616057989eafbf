import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylwalk.lie import (
    HYPERBOLIC_SCALE,
    FlagPoint,
    InvalidInputError,
    NotTransverseError,
    OptimizerWarning,
    as_group_element,
    base_pair,
    cartan_decompose,
    cartan_projection,
    diag_exp,
    distance_to_flat,
    flag_distance,
    flag_of,
    flat_from_flags,
    flat_projection,
    highest_weight_constant,
    is_chamber_vector,
    is_transverse,
    random_group_element,
    same_flat,
    standard_flag,
    standard_opposite_flag,
    symspace_distance,
    weyl_orbit,
)
from weylwalk.walk import rotation

from .oracles import distance_to_imaginary_axis, hyperbolic, mp_log_singular_values, upper_half


def rng(seed=0):
    return np.random.default_rng(seed)


def seeds_matrices(d, n, seed=0, scale=1.0):
    r = rng(seed)
    return [random_group_element(d, r, scale) for _ in range(n)]


class TestGroupElement:
    def test_unimodular_rescale(self):
        g = as_group_element(np.diag([2.0, 8.0]))
        assert np.linalg.det(g) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            as_group_element([[1.0, np.nan], [0.0, 1.0]])

    def test_rejects_singular(self):
        with pytest.raises(InvalidInputError):
            as_group_element([[1.0, 2.0], [2.0, 4.0]])

    def test_negative_det_even_dim(self):
        with pytest.raises(InvalidInputError):
            as_group_element(np.diag([1.0, -1.0]))

    def test_negative_det_odd_dim_flips_sign(self):
        g = as_group_element(np.diag([1.0, 1.0, -8.0]))
        assert np.linalg.det(g) == pytest.approx(1.0)


class TestCartan:
    def test_identity(self):
        c = cartan_decompose(np.eye(3))
        assert np.allclose(c.t, 0)
        assert np.allclose(c.matrix(), np.eye(3))

    def test_diagonal_sl2(self):
        c = cartan_decompose(np.diag([math.e, 1 / math.e]))
        assert np.allclose(c.t, [1, -1], atol=1e-15)
        assert np.allclose(np.abs(c.k), np.eye(2))
        assert np.allclose(np.abs(c.l), np.eye(2))

    def test_diagonal_sl3(self):
        assert np.allclose(cartan_projection(diag_exp([-1, 2, -1])), [2, -1, -1], atol=1e-14)

    def test_rotation_projects_to_zero(self):
        assert np.allclose(cartan_projection(rotation(0.7)), 0, atol=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_reconstruction_and_frames(self, d):
        for g in seeds_matrices(d, 200, seed=d):
            c = cartan_decompose(g)
            assert np.linalg.norm(c.matrix() - g) / np.linalg.norm(g) <= 1e-12
            assert np.allclose(c.k.T @ c.k, np.eye(d), atol=1e-12)
            assert np.allclose(c.l.T @ c.l, np.eye(d), atol=1e-12)
            assert np.linalg.det(c.k) * np.linalg.det(c.l) == pytest.approx(1.0)
            assert is_chamber_vector(c.t)
            assert abs(c.logscale) < 1e-12

    def test_canonical_signs(self):
        for g in seeds_matrices(4, 50):
            k = cartan_decompose(g).k
            for j in range(4):
                col = k[:, j]
                assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0

    def test_against_high_precision_svd(self):
        for g in seeds_matrices(3, 100, seed=5):
            assert np.abs(cartan_projection(g) - mp_log_singular_values(g)).max() < 1e-12

    @pytest.mark.parametrize("d", [2, 3, 6])
    def test_inverse_symmetry(self, d):
        for g in seeds_matrices(d, 100, seed=11, scale=2.0):
            t = cartan_projection(g)
            assert np.abs(cartan_projection(np.linalg.inv(g)) + t[::-1]).max() <= 1e-9

    def test_degenerate_flagged(self):
        assert cartan_decompose(rotation(0.3)).degenerate
        assert not cartan_decompose(np.diag([2.0, 0.5])).degenerate

    def test_subadditivity(self):
        r = rng(3)
        for _ in range(2000):
            d = int(r.integers(2, 5))
            g, h = random_group_element(d, r, 1.5), random_group_element(d, r, 1.5)
            lhs = np.linalg.norm(cartan_projection(g @ h))
            assert lhs <= np.linalg.norm(cartan_projection(g)) + np.linalg.norm(cartan_projection(h)) + 1e-9


class TestDistance:
    def test_origin_to_diagonal(self):
        s = np.array([1.5, -0.25, -1.25])
        assert symspace_distance(np.eye(3), diag_exp(s)) == pytest.approx(np.linalg.norm(s), abs=1e-14)

    def test_k_fiber(self):
        g = seeds_matrices(3, 1)[0]
        q, _ = np.linalg.qr(rng(1).normal(size=(3, 3)))
        assert symspace_distance(g, g @ q) < 1e-12

    def test_sl2_matches_hyperbolic(self):
        for g, h in zip(seeds_matrices(2, 50, 1), seeds_matrices(2, 50, 2)):
            d_h = hyperbolic(upper_half(g), upper_half(h))
            assert HYPERBOLIC_SCALE * symspace_distance(g, h) == pytest.approx(d_h, rel=1e-9, abs=1e-12)

    def test_sl2_half_exponent_example(self):
        g = np.diag([math.exp(0.5), math.exp(-0.5)])
        # hyperbolic distance from i to e i is 1; the chamber norm is 1/sqrt 2
        assert symspace_distance(np.eye(2), g) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
        assert math.acosh(np.trace(g @ g.T) / 2) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            symspace_distance(np.eye(2), np.eye(3))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
    def test_metric_axioms(self, seed, d):
        r = rng(seed)
        a, b, c = (random_group_element(d, r, 1.0) for _ in range(3))
        ab, bc, ac = symspace_distance(a, b), symspace_distance(b, c), symspace_distance(a, c)
        assert ab == pytest.approx(symspace_distance(b, a), rel=1e-9, abs=1e-12)
        assert ac <= ab + bc + 1e-9
        assert symspace_distance(a, a) < 1e-12


class TestFlags:
    def test_self_distance(self):
        f = flag_of(seeds_matrices(3, 1)[0])
        assert flag_distance(f, f) < 1e-12

    def test_projective_line(self):
        for th, ph in [(0.1, 0.9), (0.0, 2.0), (1.3, -0.4)]:
            d = flag_distance(FlagPoint(rotation(th)), FlagPoint(rotation(ph)))
            assert d == pytest.approx(abs(math.sin(th - ph)), abs=1e-14)

    def test_sign_flip_invariance(self):
        k = cartan_decompose(seeds_matrices(3, 1)[0]).k
        assert FlagPoint(k) == FlagPoint(k * np.array([-1, 1, -1]))

    def test_left_invariance(self):
        ks = [cartan_decompose(g).k for g in seeds_matrices(4, 3, seed=8)]
        q = ks[2]
        assert flag_distance(FlagPoint(q @ ks[0]), FlagPoint(q @ ks[1])) == pytest.approx(
            flag_distance(FlagPoint(ks[0]), FlagPoint(ks[1])), abs=1e-12)

    def test_permutation_is_far(self):
        w = np.eye(3)[:, [1, 0, 2]]
        assert flag_distance(standard_flag(3), FlagPoint(w)) > 0.5

    def test_base_pair_transverse(self):
        p = is_transverse(standard_opposite_flag(3), standard_flag(3))
        assert p.margin == pytest.approx(1.0)

    def test_same_point_rejected(self):
        f = FlagPoint(rotation(0.4))
        # an opposite flag keeps its line in the first column too
        same = FlagPoint(rotation(0.4) * np.array([-1, 1]))
        with pytest.raises(NotTransverseError) as err:
            is_transverse(same, f)
        assert err.value.index == 1

    def test_random_translate_transverse(self):
        for g in seeds_matrices(3, 20):
            pair = base_pair(3)
            is_transverse(pair.minus.moved_by(g), pair.plus.moved_by(g))


class TestFlats:
    def test_base_pair_gives_identity(self):
        flat = flat_from_flags(base_pair(3))
        assert np.allclose(flat.base, np.eye(3))

    def test_geodesic_between_ideal_points(self):
        # boundary points x- and x+ of the upper half-plane
        for xm, xp in [(-1.0, 2.0), (0.3, -4.0), (5.0, 5.5)]:
            def line(x):
                v = np.array([x, 1.0])
                return v / np.linalg.norm(v)
            plus = FlagPoint(np.column_stack([line(xp), [-line(xp)[1], line(xp)[0]]]))
            minus = FlagPoint(np.column_stack([line(xm), [-line(xm)[1], line(xm)[0]]]))
            flat = flat_from_flags(is_transverse(minus, plus))
            c, r = (xm + xp) / 2, abs(xp - xm) / 2
            for s in np.linspace(-3, 3, 7):
                z = upper_half(flat.point([s, -s]))
                assert abs(abs(z - c) - r) < 1e-9 * max(1.0, r)

    def test_equivariance(self):
        r = rng(4)
        for d in (2, 3, 4):
            for _ in range(5):
                g, h = random_group_element(d, r), random_group_element(d, r)
                p = base_pair(d)
                pg = is_transverse(p.minus.moved_by(g), p.plus.moved_by(g))
                ph = is_transverse(pg.minus.moved_by(h), pg.plus.moved_by(h))
                assert same_flat(flat_from_flags(ph), flat_from_flags(pg).moved_by(h), n_samples=6) < 1e-8

    @pytest.mark.parametrize("d", [2, 3])
    def test_weyl_orbit(self, d):
        g = seeds_matrices(d, 1, seed=6)[0]
        p = is_transverse(base_pair(d).minus.moved_by(g), base_pair(d).plus.moved_by(g))
        orbit = weyl_orbit(p)
        assert len(orbit) == math.factorial(d)
        flat = flat_from_flags(p)
        for q in orbit:
            assert same_flat(flat_from_flags(q), flat, n_samples=8) < 1e-8
        # distinct pairs
        plus = [q.plus for q in orbit]
        assert all(flag_distance(a, b) > 1e-3 for i, a in enumerate(plus) for b in plus[i + 1:])


class TestDistanceToFlat:
    def test_point_on_flat(self):
        flat = flat_from_flags(base_pair(3))
        assert distance_to_flat(diag_exp([1.0, 0.5, -1.5]), flat) < 1e-12

    def test_k_fiber(self):
        flat = flat_from_flags(base_pair(3))
        q, _ = np.linalg.qr(rng(2).normal(size=(3, 3)))
        g = diag_exp([2.0, -0.5, -1.5]) @ q
        assert distance_to_flat(g, flat) < 1e-12

    def test_sl2_closed_form(self):
        flat = flat_from_flags(base_pair(2))
        for g in seeds_matrices(2, 300, seed=9, scale=1.5):
            exact = distance_to_imaginary_axis(upper_half(g)) / HYPERBOLIC_SCALE
            assert distance_to_flat(g, flat) == pytest.approx(exact, abs=1e-9)

    def test_left_invariance(self):
        r = rng(7)
        for d in (3, 4):
            g, h = random_group_element(d, r), random_group_element(d, r)
            p = base_pair(d)
            flat = flat_from_flags(is_transverse(p.minus.moved_by(g), p.plus.moved_by(g)))
            x = random_group_element(d, r, 1.5)
            assert distance_to_flat(h @ x, flat.moved_by(h)) == pytest.approx(distance_to_flat(x, flat), abs=1e-6)

    def test_multistart_agrees(self):
        r = rng(12)
        flat = flat_from_flags(base_pair(4))
        for _ in range(10):
            x = random_group_element(4, r, 2.0)
            _, v0, _ = flat_projection(x, flat)
            _, v8, _ = flat_projection(x, flat, multistart=8)
            assert v0 == pytest.approx(v8, abs=1e-9)

    def test_brute_force_sl3(self):
        # compare with a dense grid plus local polish by scipy
        from scipy import optimize

        r = rng(13)
        flat = flat_from_flags(base_pair(3))
        for _ in range(5):
            x = random_group_element(3, r, 1.0)

            def f(y):
                s = np.array([y[0], y[1], -y[0] - y[1]])
                return symspace_distance(x, diag_exp(s))

            grid = np.linspace(-4, 4, 33)
            y0 = min(((a, b) for a in grid for b in grid), key=f)
            res = optimize.minimize(f, y0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
            assert distance_to_flat(x, flat) == pytest.approx(res.fun, abs=1e-7)

    def test_warns_without_convergence(self):
        flat = flat_from_flags(base_pair(3))
        x = random_group_element(3, rng(1), 3.0)
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            import weylwalk.lie as lie

            _, val, conv = lie.flat_projection(x, flat, max_iter=0)
            assert not conv
            assert np.isfinite(val)
        assert not w  # flat_projection itself reports, distance_to_flat warns

    def test_distance_to_flat_warning(self, monkeypatch):
        import weylwalk.lie as lie

        monkeypatch.setattr(lie, "flat_projection", lambda g, flat, multistart=0: (None, 1.0, False))
        with pytest.warns(OptimizerWarning):
            assert lie.distance_to_flat(np.eye(2), flat_from_flags(base_pair(2))) == 1.0


def test_highest_weight_inequality():
    r = rng(21)
    for d in (2, 3, 4):
        c2 = highest_weight_constant(d)
        worst = 0.0
        n = 0
        while n < 2000:
            u = np.triu(r.normal(scale=0.3, size=(d, d)), 1) + np.eye(d)
            a = r.normal(scale=0.05, size=(d, d))
            k, _ = np.linalg.qr(np.eye(d) + a - a.T)
            k *= np.sign(np.diag(k))
            uk = u @ k
            inv = np.linalg.inv(uk)
            if any(abs(np.linalg.det(m[:j, :j])) < 0.5 for m in (uk, inv) for j in range(1, d + 1)):
                continue
            s = r.normal(scale=5, size=d)
            s -= s.mean()
            t = r.normal(scale=5, size=d)
            t -= t.mean()
            kap = np.linalg.norm(cartan_projection(diag_exp(-s) @ uk @ diag_exp(t)))
            worst = max(worst, np.linalg.norm(s - t) / (kap + 1.0))
            n += 1
        assert worst <= c2

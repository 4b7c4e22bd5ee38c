"""Tests for polynomial differentials, natural coordinates, half-planes."""

import cmath

import numpy as np
import pytest

from asl.cubic import (
    AffineMap,
    PolyCubic,
    continue_cube_root,
    cubic_from_json,
    cubic_to_json,
    develop,
    mu_action,
    normalize_cubic,
    phi_distance,
    pullback,
    standard_half_planes,
)
from asl.errors import InvalidInput, ZeroDifferential, ZeroOnPath


class TestNormalize:
    def test_already_normalized(self):
        C = PolyCubic(3, [0, 0, 1])  # z^2 dz^3
        N, T = normalize_cubic(C)
        assert N.isclose(C)
        assert abs(T.a - 1) < 1e-14 and abs(T.b) < 1e-14

    def test_constant_rescale(self):
        # 4 dz^3 -> dz^3 via a = 4^(-1/3); oracle: pullback formula applied
        # symbolically gives coefficient c_d a^(d+3) = 4 * 4^(-1) = 1
        N, T = normalize_cubic(PolyCubic(3, [4.0]))
        assert N.isclose(PolyCubic(3, [1.0]))
        assert abs(T.a - 4 ** (-1 / 3)) < 1e-14

    def test_centering_moves_root_sum_to_zero(self):
        N, _ = normalize_cubic(PolyCubic(3, [0, 2, 1]))  # (z^2+2z) dz^3
        assert N.is_normalized
        assert abs(np.sum(N.roots())) < 1e-12  # companion-matrix oracle

    def test_zero_differential(self):
        with pytest.raises(ZeroDifferential):
            PolyCubic(3, [0.0, 0.0])

    def test_pullback_consistency(self):
        rng = np.random.default_rng(1)
        c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        C = PolyCubic(3, c)
        T = AffineMap(0.7 - 0.2j, 1.1 + 0.4j)
        P = pullback(C, T)
        for z in rng.standard_normal(5) + 1j * rng.standard_normal(5):
            assert abs(P(z) - C(T(z)) * T.a**3) < 1e-10

    def test_orbit_invariance_of_normal_form(self):
        # normalizing an affine pushforward lands in the same mu orbit
        rng = np.random.default_rng(2)
        for _ in range(5):
            c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            C = PolyCubic(3, c)
            N1, _ = normalize_cubic(C)
            T = AffineMap(complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2)))
            if abs(T.a) < 0.2:
                continue
            N2, _ = normalize_cubic(pullback(C, T))
            d = C.degree
            best = min(
                max(abs(a - b) for a, b in zip(mu_action(j, N1).coeffs, N2.coeffs))
                for j in range(d + 3)
            )
            assert best < 1e-10


class TestMuAction:
    def test_identity(self):
        C = PolyCubic(3, [0.2 + 0.1j, 0, 1])
        assert mu_action(0, C).isclose(C)

    def test_quadratic_example(self):
        # paper's quadratic example: c -> zeta^3 c with zeta = exp(2 pi i/5)
        c = 0.37 - 0.21j
        C = PolyCubic(3, [c, 0, 1])
        M = mu_action(1, C)
        assert abs(M.coeffs[0] - np.exp(2j * np.pi / 5) ** 3 * c) < 1e-14

    def test_order_d_plus_three(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        C = PolyCubic(3, list(c) + [0, 1])  # degree 4, normalized
        A = C
        for _ in range(C.degree + 3):
            A = mu_action(1, A)
        assert max(abs(a - b) for a, b in zip(A.coeffs, C.coeffs)) < 1e-13

    def test_requires_normalized(self):
        with pytest.raises(InvalidInput):
            mu_action(1, PolyCubic(3, [1, 1]))


class TestDevelop:
    def test_constant_two(self):
        C = PolyCubic(3, [2.0])
        for z in (1.0, -0.3 + 2j, 1.5 + 0.5j):
            assert abs(develop(C, 0, z, 1.0) - z) < 1e-12

    def test_monomial_real_axis(self):
        # z^d dz^3 along R+: w real with the symbolic-integration value
        for d in (1, 2, 3):
            coeffs = [0] * d + [1.0]
            C = PolyCubic(3, coeffs)
            seed = (C(1.0) / 2) ** (1 / 3)
            w = develop(C, 1.0, 4.0, seed)
            exact = 2 ** (-1 / 3) * 3 / (d + 3) * (4.0 ** ((d + 3) / 3) - 1.0)
            assert abs(w - exact) < 1e-10 * abs(exact)
            assert abs(w.imag) < 1e-11

    def test_zero_on_path(self):
        C = PolyCubic(3, [0, 1.0])
        with pytest.raises(ZeroOnPath):
            develop(C, -1.0, 1.0, ((-1 + 0j) / 2) ** (1 / 3))

    def test_path_independence(self):
        # homotopic two-leg path agrees with the straight segment
        C = PolyCubic(3, [1.0, 0, 1.0])  # zeros at +-i
        z0, z1 = -2.0, 2.0 + 1.0j
        seed = (C(z0) / 2) ** (1 / 3)
        w_straight = develop(C, z0, z1, seed)
        mid = 0.0 - 0.4j  # kinked path through the corridor between the zeros
        w1 = develop(C, z0, mid, seed)
        g_mid = continue_cube_root(C, z0, mid, seed)
        w2 = develop(C, mid, z1, g_mid)
        assert abs((w1 + w2) - w_straight) < 1e-9

    def test_cone_angle(self):
        # total turning of the developed image around a zero of
        # multiplicity m is 2 pi (3+m)/3
        for m in (1, 2):
            coeffs = [0] * m + [1.0]
            C = PolyCubic(3, coeffs)
            assert abs(_cone_turning(C, 0.8) - 2 * np.pi * (3 + m) / 3) < 1e-8


def _cone_turning(C, radius, n=60):
    zs = radius * np.exp(1j * np.linspace(0, 2 * np.pi, n + 1))
    g = (C(zs[0]) / 2) ** (1 / 3)
    turn, prev = 0.0, None
    for i in range(n + 1):
        if i > 0:
            g = continue_cube_root(C, zs[i - 1], zs[i], g)
        a = cmath.phase(g * 1j * zs[i])
        if prev is not None:
            turn += (a - prev + np.pi) % (2 * np.pi) - np.pi
        prev = a
    return turn


class TestHalfPlanes:
    def test_monomial_sectors(self):
        C = PolyCubic(3, [0, 0, 1.0])
        hps = standard_half_planes(C)
        assert len(hps) == 5
        # star ray eventually inside its own half-plane, neighbors excluded
        for hp in hps:
            beta = hp.star_angle
            far = 4.0 * hp.sector_radius
            assert hp.contains(far * np.exp(1j * beta))
            assert not hp.contains(far * np.exp(1j * (beta + 2 * np.pi / 5)))
            assert not hp.contains(far * np.exp(1j * (beta - 2 * np.pi / 5)))

    def test_overlap_transition(self):
        # w_{k+1} = omega^{-1} w_k + const on overlaps
        C = PolyCubic(3, [1.0, 0.5j, 1.0])
        hps = standard_half_planes(C)
        om = np.exp(2j * np.pi / 3)
        d = C.degree
        for k in range(d + 3):
            h0, h1 = hps[k], hps[(k + 1) % (d + 3)]
            ang = h0.star_angle + np.pi / (d + 3)
            rr = 3.0 * max(h0.sector_radius, h1.sector_radius)
            pts = [r * np.exp(1j * ang) for r in (rr, 1.4 * rr, 2.0 * rr)]
            cs = [h1.w_of(p) - h0.w_of(p) / om for p in pts]
            assert abs(cs[0] - cs[1]) < 1e-8 and abs(cs[1] - cs[2]) < 1e-8

    def test_overlap_is_pi_third_sector(self):
        # the overlap maps to a sector of angle pi/3 in either coordinate:
        # check that points on the overlap's two bounding directions span
        # a w_k-argument range of pi/3
        C = PolyCubic(3, [0, 0, 1.0])
        hps = standard_half_planes(C)
        h0 = hps[0]
        far, inset = 40.0, 0.01
        # overlap of U_0 and U_1 for z^2 dz^3 is the euclidean sector
        # (pi/10, 3pi/10); its w_0-image has argument range pi/3, with the
        # probe insets magnified by the exponent 5/3 of the coordinate
        w_low = h0.w_of(far * np.exp(1j * (np.pi / 10 + inset)))
        w_high = h0.w_of(far * np.exp(1j * (3 * np.pi / 10 - inset)))
        spread = abs(cmath.phase(w_high) - cmath.phase(w_low))
        assert abs(spread - (np.pi / 3 - 2 * inset * 5 / 3)) < 0.01

    def test_five_half_planes_for_fig_example(self):
        C, _ = normalize_cubic(PolyCubic(3, [-((3 + 1j) ** 2), 0, 1.0]))
        hps = standard_half_planes(C)
        assert len(hps) == 5

    def test_random_rays_eventually_covered(self):
        C = PolyCubic(3, [0.3, -0.2j, 1.0])
        hps = standard_half_planes(C)
        d = C.degree
        rng = np.random.default_rng(7)
        for _ in range(6):
            theta = rng.uniform(0, 2 * np.pi)
            # stay away from sector boundaries where membership flips
            spacing = 2 * np.pi / (d + 3)
            k = int(np.round(theta / spacing)) % (d + 3)
            if abs(((theta - hps[k].star_angle + np.pi) % (2 * np.pi)) - np.pi) > 0.4 * spacing:
                continue
            far = 5.0 * max(h.sector_radius for h in hps)
            assert hps[k].contains(far * np.exp(1j * theta))

    def test_requires_monic(self):
        with pytest.raises(InvalidInput):
            standard_half_planes(PolyCubic(3, [0, 2.0]))


class TestPhiDistance:
    def test_radial_monomial(self):
        # C = z dz^3: r(p) = (3/4) p^(4/3) by 1-d quadrature
        C = PolyCubic(3, [0, 1.0])
        for p in (0.5, 2.0, 5.0):
            exact = 0.75 * p ** (4 / 3)
            assert abs(phi_distance(C, p) - exact) < 1e-3 * exact

    def test_zero_at_zero(self):
        C = PolyCubic(3, [1.0, 0, 1.0])
        z = C.roots()[0]
        assert phi_distance(C, z) < 1e-10

    def test_triangle_inequality(self):
        C = PolyCubic(3, [0.2, 0.5, 1.0])
        rng = np.random.default_rng(11)
        from asl.cubic import _flat_length

        for _ in range(5):
            p, q = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            seg = _flat_length(C, np.array([q, p]))
            assert phi_distance(C, p) <= phi_distance(C, q) + seg + 1e-6

    def test_no_zeros(self):
        assert phi_distance(PolyCubic(3, [2.0]), 1.0) == np.inf

    def test_higher_order_metric(self):
        # order-4 differential z dz^4: r(p) = (4/5) p^(5/4)
        C = PolyCubic(4, [0, 1.0])
        p = 3.0
        exact = 0.8 * p ** 1.25
        assert abs(phi_distance(C, p) - exact) < 1e-3 * exact


class TestJson:
    def test_round_trip(self):
        C = PolyCubic(3, [0.5 - 0.25j, 0, 1.0])
        blob = cubic_to_json(C)
        assert blob["order"] == 3
        assert cubic_from_json(blob).isclose(C)

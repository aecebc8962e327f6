import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pass_covert.errors import ConfigurationError, SingularityError
from oracles import dense_echo, dense_row
from pass_covert.geometry import (PassGeometry, PhysicalConstants, bob_channel,
                                  build_channels, combination_vector, doppler_vector,
                                  free_space_vector, in_waveguide_vector, projected_velocity,
                                  willie_channels)

C0 = 299792458.0
K = PhysicalConstants()
BOB = np.array([3.0, 5.0, 0.0])
WILLIE = np.array([1.0, 4.0, 2.0, 1.0])


def random_geometry(rng):
    g = PassGeometry()
    return g.with_initial(rng.uniform(0, g.x_init_upper, g.n_waveguides))


class TestConstants:
    def test_wavenumbers(self):
        lam = C0 / 15e9
        assert K.wavelength == pytest.approx(lam, rel=1e-15)
        assert K.k_c == pytest.approx(2 * math.pi / lam, rel=1e-14)
        assert K.k_g == pytest.approx(K.k_c * 1.4, rel=1e-14)
        assert K.k_lcx == pytest.approx(K.k_c * 1.1, rel=1e-14)
        assert K.eta == pytest.approx(lam / (4 * math.pi), rel=1e-14)

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            PhysicalConstants(carrier_freq=0.0)


class TestGeometry:
    def test_default_layout(self):
        g = PassGeometry()
        assert g.slots_per_lcx == 11
        np.testing.assert_allclose(g.slot_x, np.arange(11.0))
        np.testing.assert_allclose(g.waveguide_y, [0.0, 5.0, 10.0])
        np.testing.assert_allclose(g.lcx_y, [0.5, 5.5, 10.5])
        assert g.x_init_upper == pytest.approx(10 - 3 * C0 / 15e9 / 2)

    def test_uniform_placement_spacing(self):
        g = PassGeometry().with_initial([1.0, 2.0, 3.0])
        np.testing.assert_allclose(np.diff(g.pa_x, axis=0), K.wavelength / 2, rtol=1e-12)
        np.testing.assert_allclose(g.pa_x[0], [1.0, 2.0, 3.0])

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigurationError):
            PassGeometry().with_initial([9.99, 0.0, 0.0])

    def test_rejects_close_pas(self):
        g = PassGeometry()
        x = g.pa_x.copy()
        x[1, 0] = x[0, 0] + 1e-3
        with pytest.raises(ConfigurationError):
            g.with_pa_x(x)

    def test_pa_x_read_only(self):
        g = PassGeometry()
        with pytest.raises(ValueError):
            g.pa_x[0, 0] = 1.0


class TestInWaveguide:
    def test_zero_positions(self):
        np.testing.assert_allclose(in_waveguide_vector(np.zeros(4), K), 0.5 + 0j)

    def test_half_guided_wavelength(self):
        lam_g = K.wavelength / 1.4
        v = in_waveguide_vector(np.array([0.0, lam_g / 2]), K)
        np.testing.assert_allclose(v, np.array([1, -1]) / math.sqrt(2), atol=1e-12)

    def test_scalar_phase_oracle(self):
        x = np.array([0.1, 0.7, 2.3, 9.1])
        v = in_waveguide_vector(x, K)
        k_g = 2 * math.pi * 1.4 / (C0 / 15e9)
        for m in range(4):
            assert v[m] == pytest.approx(cmath.exp(-1j * k_g * x[m]) / 2, abs=1e-12)

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=8))
    def test_unit_norm(self, xs):
        v = in_waveguide_vector(np.array(xs), K)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(v), 1 / math.sqrt(len(xs)), rtol=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ConfigurationError):
            in_waveguide_vector(np.array([-1.0, 0.0]), K)

    def test_combination_unit_modulus(self):
        v = combination_vector(np.arange(11.0), K)
        np.testing.assert_allclose(np.abs(v) * math.sqrt(11), 1.0, rtol=1e-12)


class TestFreeSpace:
    def test_single_element(self):
        v = free_space_vector(np.zeros(3), np.array([[0.0, 0.0, 3.0]]), K)
        assert abs(v[0]) == pytest.approx(K.eta / 3, rel=1e-14)
        assert cmath.phase(v[0]) == pytest.approx(
            math.remainder(K.k_c * 3, 2 * math.pi), abs=1e-9)

    def test_inverse_distance(self):
        pos = np.array([[0.0, 0.0, 3.0], [1.0, 2.0, 3.0]])
        near = free_space_vector(np.array([1.0, 1.0, 1.0]), pos, K)
        # doubling all distances around the target halves the moduli
        far = free_space_vector(np.array([1.0, 1.0, 1.0]), 2 * pos - np.array([1.0, 1.0, 1.0]), K)
        np.testing.assert_allclose(np.abs(far), np.abs(near) / 2, rtol=1e-13)

    def test_bob_elementwise_oracle(self):
        g = PassGeometry().with_initial([2.0, 3.0, 4.0])
        pos = g.pa_positions().reshape(-1, 3)
        v = free_space_vector(BOB, pos, K)
        for i, p in enumerate(pos):
            r = math.dist(BOB, p)
            assert v[i] == pytest.approx((K.eta * cmath.exp(-1j * K.k_c * r) / r).conjugate(),
                                         abs=1e-12)

    def test_singularity(self):
        with pytest.raises(SingularityError):
            free_space_vector(np.array([0.0, 0.0, 3.0]), np.array([[0.0, 0.0, 3.0]]), K)

    @given(st.floats(0.1, 50), st.floats(0.1, 50))
    def test_modulus_decreasing(self, r1, r2):
        if r1 >= r2:
            r1, r2 = r2, r1 + 1e-3
        pos = np.array([[0.0, 0.0, r1], [0.0, 0.0, r2]])
        v = np.abs(free_space_vector(np.zeros(3), pos, K))
        assert v[0] > v[1]


class TestDoppler:
    def test_projection_cases(self):
        ant = np.array([0.0, 0.0, 3.0])
        tgt = np.array([1.0, 4.0, 0.0])
        assert projected_velocity(np.zeros(3), ant, tgt) == 0.0
        u = (tgt - ant) / np.linalg.norm(tgt - ant)
        assert projected_velocity(2.5 * u, ant, tgt) == pytest.approx(2.5)
        assert projected_velocity(-2.5 * u, ant, tgt) == pytest.approx(-2.5)

    def test_projection_oracle(self):
        d = (1.0, 4.0, -3.0)
        expected = (2 * d[0] + 1 * d[1]) / math.sqrt(sum(c * c for c in d))
        got = projected_velocity(np.array([2.0, 1.0, 0.0]), np.array([0.0, 0.0, 3.0]),
                                 np.array([1.0, 4.0, 0.0]))
        assert got == pytest.approx(expected, rel=1e-14)

    def test_zero_velocity_ones(self):
        pos = PassGeometry().pa_positions().reshape(-1, 3)
        np.testing.assert_array_equal(doppler_vector(np.zeros(3), BOB, pos, K), 1.0)

    def test_phase_oracle(self):
        pos = PassGeometry().with_initial([1.0, 2.0, 3.0]).pa_positions().reshape(-1, 3)
        v = np.array([2.0, 1.0, 0.0])
        tgt = np.array([1.0, 4.0, 0.0])
        d = doppler_vector(v, tgt, pos, K)
        for i, p in enumerate(pos):
            vm = projected_velocity(v, p, tgt)
            assert d[i] == pytest.approx(cmath.exp(-1j * K.k_c * 1e-4 * vm).conjugate(), abs=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-20, 20), min_size=3, max_size=3))
    def test_unit_modulus(self, v):
        pos = PassGeometry().pa_positions().reshape(-1, 3)
        d = doppler_vector(np.array(v), np.array([1.0, 4.0, 0.0]), pos, K)
        np.testing.assert_allclose(np.abs(d), 1.0, rtol=1e-12)


class TestChannels:
    def test_single_element_collapse(self):
        g = PassGeometry(n_waveguides=1, pas_per_waveguide=1, n_lcx=1)
        h = bob_channel(g, np.zeros(3), K)
        assert h.shape == (1,)
        expected = (K.eta / 3) * cmath.exp(1j * K.k_c * 3)
        assert h[0] == pytest.approx(expected, abs=1e-15)

    def test_bob_dense_row(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            g = random_geometry(rng)
            row = dense_row(g, K, BOB)
            np.testing.assert_allclose(bob_channel(g, BOB, K).conj(), row, rtol=0, atol=1e-12)

    def test_willie_dense_row(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = random_geometry(rng)
            h_w, H_w, echo = willie_channels(g, WILLIE, K)
            row = dense_row(g, K, np.array([1.0, 4.0, 0.0]), np.array([2.0, 1.0, 0.0]))
            np.testing.assert_allclose(h_w.conj(), row, atol=1e-12)

    def test_round_trip_triple_product(self):
        g = PassGeometry().with_initial([2.0, 3.0, 6.0])
        target, vel = np.array([1.0, 4.0, 0.0]), np.array([2.0, 1.0, 0.0])
        _, H_w, _ = willie_channels(g, WILLIE, K)
        u = dense_echo(g, K, target, vel)
        row = dense_row(g, K, target, vel)
        np.testing.assert_allclose(H_w, np.outer(u, row), atol=1e-12 * np.abs(H_w).max())

    def test_static_willie_has_no_doppler(self):
        g = PassGeometry().with_initial([2.0, 3.0, 4.0])
        h_static, _, _ = willie_channels(g, np.array([1.0, 4.0, 0.0, 0.0]), K)
        np.testing.assert_allclose(h_static, bob_channel(g, np.array([1.0, 4.0, 0.0]), K),
                                   rtol=1e-14)

    def test_rank_one_and_null(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = random_geometry(rng)
            xi = np.r_[rng.uniform(0, 10), rng.uniform(0, 12), rng.normal(0, 2, 2)]
            ch = build_channels(g, BOB, xi, K)
            s = np.linalg.svd(ch.H_w, compute_uv=False)
            assert s[1] <= 1e-10 * s[0]
            w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            w -= ch.h_w * np.vdot(ch.h_w, w) / np.vdot(ch.h_w, ch.h_w)
            assert np.linalg.norm(ch.H_w @ w) <= 1e-12 * np.linalg.norm(ch.H_w) * np.linalg.norm(w)

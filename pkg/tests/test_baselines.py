import cmath
import itertools
import math

import numpy as np
import pytest

from pass_covert.baselines import (BaselineKind, greedy_placement, greedy_spacing,
                                   mimo_baseline, mimo_layout, one_d_search, search_grid)
from pass_covert.geometry import ChannelSet, PassGeometry, PhysicalConstants, build_channels
from pass_covert.optimizer import solve_cpi, solve_or_fallback

K = PhysicalConstants()
NOISE = 10 ** ((-174 + 40 - 30) / 10)
BOB = np.array([3.0, 5.0, 0.0])
XI0 = np.array([1.0, 4.0, 2.0, 1.0])
GAMMA = 1e-15


def evaluator(geom, xi=XI0):
    def evaluate(x):
        ch = build_channels(geom.with_initial(x), BOB, xi, K)
        return solve_or_fallback(ch, 1.0, GAMMA, NOISE, NOISE)
    return evaluate


class TestGrid:
    def test_eleven_points(self):
        g = search_grid(PassGeometry())
        assert g.size == 11
        np.testing.assert_allclose(g[:-1], np.arange(10.0))
        assert g[-1] == pytest.approx(PassGeometry().x_init_upper)

    def test_kinds(self):
        assert {k.value for k in BaselineKind} == {"1d_search", "greedy", "mimo"}
        assert BaselineKind("greedy") is BaselineKind.GREEDY


class TestOneDSearch:
    def test_single_waveguide_brute_force(self):
        geom = PassGeometry(n_waveguides=1, n_lcx=3)
        evaluate = evaluator(geom)
        grid = search_grid(geom)
        x, sol = one_d_search(evaluate, grid, 1)
        rates = [evaluate(np.array([v])).rate for v in grid]
        assert sol.rate == max(rates)
        assert x[0] == grid[int(np.argmax(rates))]

    def test_cartesian_brute_force(self):
        geom = PassGeometry()
        evaluate = evaluator(geom)
        grid = search_grid(geom)[::3]
        x, sol = one_d_search(evaluate, grid, 3, mode="cartesian")
        best_rate, best_x = -1.0, None
        for cand in itertools.product(grid, repeat=3):
            r = evaluate(np.array(cand)).rate
            if r > best_rate:
                best_rate, best_x = r, cand
        assert sol.rate == best_rate
        np.testing.assert_array_equal(x, best_x)

    def test_argmax_contract(self):
        geom = PassGeometry()
        evaluate = evaluator(geom)
        grid = search_grid(geom)
        seen = []

        def spy(x):
            sol = evaluate(x)
            seen.append(sol.rate)
            return sol

        _, sol = one_d_search(spy, grid, 3, start=[3.0, 3.0, 3.0])
        assert len(seen) == 33
        assert sol.rate >= max(seen[-11:])
        assert all(sol.rate >= r for r in seen[:11])

    def test_ties_keep_smallest(self):
        class Flat:
            rate = 1.0

        x, _ = one_d_search(lambda x: Flat(), np.arange(5.0), 2, mode="cartesian")
        np.testing.assert_array_equal(x, [0.0, 0.0])
        x, _ = one_d_search(lambda x: Flat(), np.arange(5.0), 2)
        np.testing.assert_array_equal(x, [0.0, 0.0])

    def test_all_infeasible(self):
        geom = PassGeometry()

        def evaluate(x):
            ch = build_channels(geom.with_initial(x), BOB, XI0, K)
            return solve_or_fallback(ch, 1.0, 1e-8, NOISE, NOISE)

        _, sol = one_d_search(evaluate, search_grid(geom), 3)
        assert not sol.feasible and sol.rate == 0.0

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            one_d_search(lambda x: None, [0.0], 1, mode="random")
        with pytest.raises(ValueError):
            one_d_search(lambda x: None, np.arange(11.0), 3, mode="cartesian", max_points=100)


class TestGreedy:
    def test_bob_coordinate(self):
        np.testing.assert_array_equal(greedy_placement(PassGeometry(), BOB), [3.0, 3.0, 3.0])

    def test_clamped(self):
        g = PassGeometry()
        np.testing.assert_allclose(greedy_placement(g, [12.0, 5.0, 0.0]), g.x_init_upper)
        np.testing.assert_array_equal(greedy_placement(g, [-1.0, 5.0, 0.0]), 0.0)

    def test_half_wavelength_spacing(self):
        lam = 299792458.0 / 15e9
        assert greedy_spacing(PassGeometry(), K) == pytest.approx(lam / 2)
        assert lam / 2 == pytest.approx(0.00999, abs=1e-5)
        geom = PassGeometry().with_initial(greedy_placement(PassGeometry(), BOB))
        np.testing.assert_allclose(np.diff(geom.pa_x, axis=0), lam / 2, rtol=1e-12)

    def test_spacing_respects_minimum(self):
        g = PassGeometry(inter_pa_spacing=0.05, min_spacing=0.02)
        assert greedy_spacing(g, K) == 0.02


class TestMimo:
    def test_element_positions(self):
        lay = mimo_layout(PassGeometry(), K)
        lam = K.wavelength
        np.testing.assert_allclose(lay.tx_positions[:, 0, 0], [-lam / 2, 0.0, lam / 2], atol=1e-15)
        np.testing.assert_array_equal(lay.tx_positions[:, 0, 1:], [[0.0, 3.0]] * 3)

    def test_cpi0_oracle(self):
        geom = PassGeometry()
        lay = mimo_layout(geom, K)
        sol = mimo_baseline(lay, BOB, XI0, K, 1.0, GAMMA, NOISE, NOISE)
        # single-element spherical waves, no waveguide phase
        pos = [np.array([d, 0.0, 3.0]) for d in (-K.wavelength / 2, 0.0, K.wavelength / 2)]
        tgt, vel = np.array([1.0, 4.0, 0.0]), np.array([2.0, 1.0, 0.0])

        def elem(p, t, v=None):
            d = t - p
            r = math.sqrt(float(d @ d))
            e = K.eta * cmath.exp(-1j * K.k_c * r) / r
            if v is not None:
                e *= cmath.exp(-1j * K.k_c * K.cpi_duration * float(v @ d) / r)
            return e  # propagation factor; the channel entry is its conjugate

        h_b = np.array([elem(p, BOB) for p in pos]).conj()
        h_w = np.array([elem(p, tgt, vel) for p in pos]).conj()
        slots = geom.slot_positions()
        echo = np.array([sum(cmath.exp(-1j * K.k_lcx * s[0]) / math.sqrt(11)
                             * elem(s, tgt, vel).conjugate() for s in row) for row in slots])
        ch = ChannelSet(h_b, h_w, np.outer(echo, h_w.conj()), echo)
        ref = solve_cpi(ch, 1.0, GAMMA, NOISE, NOISE)
        assert sol.feasible
        assert sol.rate == pytest.approx(ref.rate, rel=1e-9)
        assert sol.kl_audit <= 1e-12

    def test_perfect_csi_covert(self):
        lay = mimo_layout(PassGeometry(), K)
        rng = np.random.default_rng(0)
        for _ in range(20):
            xi = np.r_[rng.uniform(0, 10), rng.uniform(0, 12), rng.normal(0, 2, 2)]
            sol = mimo_baseline(lay, BOB, xi, K, 1.0, GAMMA, NOISE, NOISE)
            assert sol.kl_audit <= 1e-12

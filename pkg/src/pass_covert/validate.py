"""Quick numerical self-checks behind ``pass-covert validate``."""

from __future__ import annotations

import numpy as np

from .geometry import ChannelSet, build_channels
from .optimizer import solve_cpi
from .tracking import (EchoObservation, MobilityState, ekf_update, observation_jacobian,
                       predict, synthesize_observation, update)


def _random_channels(rng, n=3, n_r=3, scale=1e-3):
    h_b = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    h_w = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    echo = scale * (rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r))
    return ChannelSet(h_b, h_w, np.outer(echo, h_w.conj()), echo)


def check_jacobian(cfg, rng, n=20):
    consts, geom = cfg.build_constants(), cfg.build_geometry()
    worst = 0.0
    for _ in range(n):
        layout = geom.with_initial(rng.uniform(0, geom.x_init_upper, geom.n_waveguides)).layout(consts)
        xi = np.r_[rng.uniform(0, 10, 1), rng.uniform(0, 15, 1), rng.normal(0, 3, 2)]
        c = rng.standard_normal(geom.n_waveguides) + 1j * rng.standard_normal(geom.n_waveguides)
        J = observation_jacobian(xi, layout, consts, c)
        fd = np.empty_like(J)
        for i in range(4):
            e = np.zeros(4)
            e[i] = 1e-6
            fd[:, i] = (synthesize_observation(xi + e, layout, consts, c)
                        - synthesize_observation(xi - e, layout, consts, c)) / 2e-6
        worst = max(worst, np.max(np.abs(J - fd)) / max(np.max(np.abs(fd)), 1e-12))
    return "jacobian vs finite differences", worst <= 1e-4, f"max rel err {worst:.2e}"


def check_solver(cfg, rng, n=200):
    p_max, noise = 1.0, 1e-12
    leak = tight = budget = 0.0
    for _ in range(n):
        ch = _random_channels(rng)
        # threshold at a random fraction of the best achievable echo power
        best = p_max * np.linalg.norm(ch.echo_gain) ** 2 * np.linalg.norm(ch.h_w) ** 2
        gamma = rng.uniform(0.01, 0.5) * best
        sol = solve_cpi(ch, p_max, gamma, noise, noise)
        leak = max(leak, abs(np.vdot(ch.h_w, sol.w)) ** 2 / (p_max * np.vdot(ch.h_w, ch.h_w).real))
        tight = max(tight, abs(sol.sensing_power / gamma - 1.0))
        budget = max(budget, abs(np.vdot(sol.w, sol.w).real + np.vdot(sol.q, sol.q).real - p_max))
    ok = leak <= 1e-18 and tight <= 1e-6 and budget <= 1e-9
    return "beamformer/AN constraints", ok, \
        f"leak {leak:.1e}, sensing tightness {tight:.1e}, budget {budget:.1e}"


def check_linear_kf(cfg, rng):
    P = rng.standard_normal((4, 4))
    P = P @ P.T + np.eye(4)
    pred = MobilityState(rng.standard_normal(4), P)
    H = np.array([[1.0, 0, 0, 0]])
    z = rng.standard_normal()
    r = 0.3
    post = ekf_update(pred, np.array([z + 0j]), np.array([pred.xi[0] + 0j]), H + 0j, 2 * r)
    S = H @ P @ H.T + r
    K = P @ H.T / S
    xi = pred.xi + (K * (z - pred.xi[0])).ravel()
    cov = (np.eye(4) - K @ H) @ P
    err = max(np.max(np.abs(post.xi - xi)), np.max(np.abs(post.cov - cov)))
    return "EKF update vs linear Kalman filter", err <= 1e-12, f"max diff {err:.1e}"


def check_covariance(cfg, rng, n=1000):
    consts, geom, motion = cfg.build_constants(), cfg.build_geometry(), cfg.build_motion()
    layout = geom.with_initial([3.0] * geom.n_waveguides).layout(consts)
    state = MobilityState(cfg.willie_xi0, np.diag(cfg.willie.init_cov_diag))
    c = np.ones(geom.n_waveguides, dtype=complex) * np.sqrt(cfg.power.p_max / geom.n_waveguides)
    noise = cfg.power.noise
    worst_sym = 0.0
    worst_eig = np.inf
    for _ in range(n):
        state = predict(state, motion)
        y = synthesize_observation(state, layout, consts, c)
        state = update(state, EchoObservation(y, noise), layout, consts, c)
        worst_sym = max(worst_sym, np.max(np.abs(state.cov - state.cov.T)))
        worst_eig = min(worst_eig, np.linalg.eigvalsh(state.cov).min())
    ok = worst_sym <= 1e-10 and worst_eig >= -1e-10
    return "EKF covariance symmetric PSD", ok, f"asym {worst_sym:.1e}, min eig {worst_eig:.1e}"


def check_default_cpi(cfg, rng):
    consts, geom = cfg.build_constants(), cfg.build_geometry()
    ch = build_channels(geom.with_initial([cfg.bob[0]] * geom.n_waveguides), cfg.bob,
                        cfg.willie_xi0, consts)
    best = cfg.power.p_max * np.linalg.norm(ch.echo_gain) ** 2 * np.linalg.norm(ch.h_w) ** 2
    feasible = best >= cfg.power.gamma_sen
    return "sensing threshold reachable at CPI 0", bool(feasible), \
        f"max echo power {best:.2e} W vs threshold {cfg.power.gamma_sen:.2e} W"


def run_checks(cfg, rng):
    return [f(cfg, rng) for f in (check_jacobian, check_solver, check_linear_kf,
                                  check_covariance, check_default_cpi)]

"""Extended Kalman filter tracking of the warden's position and velocity.

The state is ``xi = [x_w, y_w, v_x, v_y]``.  Observations are the complex
LCX echoes ``y = H_w(xi) c + n``; the filter works on the real-augmented
vector ``[Re y; Im y]`` so the state update stays real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, TrackingDivergenceError
from .geometry import ArrayLayout, PhysicalConstants, _as_layout


@dataclass(frozen=True, eq=False)
class MobilityState:
    """Mean ``xi`` and covariance ``cov`` of the warden's mobility state."""

    xi: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(4)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (4, 4):
            raise ConfigurationError(f"covariance must be 4x4, got {cov.shape}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "cov", cov)

    @property
    def position(self) -> np.ndarray:
        return self.xi[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.xi[2:]


@dataclass(frozen=True)
class MotionNoise:
    """Per-CPI velocity increments ``N(0, sigma^2)`` and CPI duration ``dt``."""

    sigma_vx2: float = 0.01
    sigma_vy2: float = 0.02
    dt: float = 1e-4

    def __post_init__(self):
        if self.sigma_vx2 < 0 or self.sigma_vy2 < 0 or self.dt < 0:
            raise ConfigurationError("motion variances and dt must be non-negative")

    @property
    def Q(self) -> np.ndarray:
        return np.diag([0.0, 0.0, self.sigma_vx2, self.sigma_vy2])

    @property
    def transition(self) -> np.ndarray:
        G = np.eye(4)
        G[0, 2] = G[1, 3] = self.dt
        return G


@dataclass(frozen=True, eq=False)
class EchoObservation:
    y_w: np.ndarray
    noise_power: float


def simulate_motion(state, noise: MotionNoise, rng) -> MobilityState:
    """Advance the ground truth one CPI.

    Positions move with the previous velocity, then the velocity receives a
    Gaussian increment.
    """
    xi = np.asarray(getattr(state, "xi", state), dtype=float)
    z = rng.standard_normal(2)
    nxt = noise.transition @ xi
    nxt[2] += np.sqrt(noise.sigma_vx2) * z[0]
    nxt[3] += np.sqrt(noise.sigma_vy2) * z[1]
    cov = getattr(state, "cov", np.zeros((4, 4)))
    return MobilityState(nxt, cov)


def predict(state: MobilityState, noise: MotionNoise) -> MobilityState:
    G = noise.transition
    return MobilityState(G @ state.xi, G @ state.cov @ G.T + noise.Q)


def _element_response(positions, target, velocity, k, dt, sign, eta):
    """Spherical-wave element response and its derivative w.r.t. the state.

    Returns ``e`` with ``e = eta / r * exp(sign * 1j * k * (r + dt * v_p))``
    and ``de`` holding the derivatives with respect to
    ``(x_w, y_w, v_x, v_y)`` in the last axis.
    """
    d = target - positions
    r = np.sqrt(np.sum(d * d, axis=-1))
    unit = d / r[..., None]
    vp = unit @ velocity
    e = eta / r * np.exp(sign * 1j * k * (r + dt * vp))

    de = np.empty(e.shape + (4,), dtype=complex)
    for i in range(2):
        dr = unit[..., i]
        dvp = (velocity[i] - unit[..., i] * vp) / r
        pathloss = -dr / r
        position_phase = sign * 1j * k * dr
        doppler_phase = sign * 1j * k * dt * dvp
        de[..., i] = e * (pathloss + position_phase + doppler_phase)
    for i in range(2):
        de[..., 2 + i] = e * (sign * 1j * k * dt * unit[..., i])
    return e, de


def _observation_parts(xi, layout: ArrayLayout, consts: PhysicalConstants, c):
    xi = np.asarray(getattr(xi, "xi", xi), dtype=float)
    target = np.array([xi[0], xi[1], 0.0])
    velocity = np.array([xi[2], xi[3], 0.0])
    c = np.asarray(c, dtype=complex).reshape(layout.n_tx)
    k, dt, eta = consts.k_c, consts.cpi_duration, consts.eta

    # transmit side: s = a_t^H G c
    e_t, de_t = _element_response(layout.tx_positions, target, velocity, k, dt, -1, eta)
    drive = layout.tx_feed * c[:, None]
    s = np.sum(e_t * drive)
    ds = np.einsum("nm,nmk->k", drive, de_t)

    # receive side: u = sqrt(beta) V^T a_r
    e_r, de_r = _element_response(layout.rx_positions, target, velocity, k, dt, +1, eta)
    gain = np.sqrt(consts.rcs)
    u = gain * np.sum(layout.rx_weights * e_r, axis=-1)
    du = gain * np.einsum("jm,jmk->jk", layout.rx_weights, de_r)
    return s, ds, u, du


def synthesize_observation(state, geom, consts: PhysicalConstants, c) -> np.ndarray:
    """Noiseless echo ``H_w(xi) c``."""
    s, _, u, _ = _observation_parts(state, _as_layout(geom, consts), consts, c)
    return u * s


def observation_jacobian(state, geom, consts: PhysicalConstants, c) -> np.ndarray:
    """Complex ``N_r x 4`` Jacobian of the echo with respect to the state."""
    s, ds, u, du = _observation_parts(state, _as_layout(geom, consts), consts, c)
    return du * s + np.outer(u, ds)


def _kalman_step(pred: MobilityState, residual, J, R) -> MobilityState:
    P = pred.cov
    S = J @ P @ J.T + R
    try:
        factor = scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError as exc:
        raise TrackingDivergenceError("innovation covariance is singular") from exc
    if np.linalg.cond(S) > 1e15:
        raise TrackingDivergenceError("innovation covariance is ill-conditioned")
    # K = P J^T S^-1, computed as (S^-1 J P)^T
    K = scipy.linalg.cho_solve(factor, J @ P).T
    xi = pred.xi + K @ residual
    cov = (np.eye(4) - K @ J) @ P
    return MobilityState(xi, 0.5 * (cov + cov.T))


def ekf_update(pred: MobilityState, y, y_pred, jacobian, noise_power: float) -> MobilityState:
    """Generic real-augmented update for a complex observation.

    Circular noise of power ``noise_power`` contributes ``noise_power / 2``
    per real component.
    """
    residual = np.asarray(y) - np.asarray(y_pred)
    jacobian = np.asarray(jacobian)
    r = np.concatenate([residual.real, residual.imag])
    J = np.vstack([jacobian.real, jacobian.imag])
    R = 0.5 * noise_power * np.eye(r.size)
    return _kalman_step(pred, r, J, R)


def update(pred: MobilityState, obs: EchoObservation, geom, consts: PhysicalConstants,
           c) -> MobilityState:
    """EKF posterior update from the echo received with transmit signal ``c``."""
    layout = _as_layout(geom, consts)
    s, ds, u, du = _observation_parts(pred, layout, consts, c)
    y_pred = u * s
    J = du * s + np.outer(u, ds)
    return ekf_update(pred, obs.y_w, y_pred, J, obs.noise_power)


class EKFTracker:
    """Mutable single-owner wrapper around :func:`predict` and :func:`update`."""

    def __init__(self, initial: MobilityState, noise: MotionNoise, consts: PhysicalConstants):
        self.state = initial
        self.noise = noise
        self.consts = consts

    def predict(self) -> MobilityState:
        self.state = predict(self.state, self.noise)
        return self.state

    def update(self, y, geom, c, noise_power: float) -> MobilityState:
        self.state = update(self.state, EchoObservation(np.asarray(y), noise_power),
                            geom, self.consts, c)
        return self.state

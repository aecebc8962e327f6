"""Pinching-antenna geometry and line-of-sight near-field channel models.

Conventions
-----------
Waveguide ``n`` (0-based) runs parallel to the x-axis at ``y = n * D`` and
height ``H``; its feed point sits at ``x = 0``.  LCX ``j`` runs at
``y = j * D + lcx_offset``, also at height ``H``, with slots every
``slot_spacing`` metres starting at ``x = 0``.

Free-space and Doppler vectors carry an outer conjugate, so the physical
propagation factor ``eta * exp(-1j * k_c * r) / r`` appears in the
Hermitian-transposed channel.  Downlink channels are returned as column
vectors ``h`` with the received sample ``y = h.conj() @ c``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SingularityError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Distances below this are treated as coincident points.
_MIN_DISTANCE = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    """Carrier, refractive indices, CPI duration and radar cross-section."""

    carrier_freq: float = 15e9
    guided_index: float = 1.4
    lcx_index: float = 1.1
    cpi_duration: float = 1e-4
    rcs: float = 1.0

    def __post_init__(self):
        for name in ("carrier_freq", "guided_index", "lcx_index", "rcs"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.cpi_duration) or self.cpi_duration < 0:
            raise ConfigurationError(
                f"cpi_duration must be non-negative, got {self.cpi_duration}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def k_c(self) -> float:
        """Free-space wavenumber (rad/m)."""
        return 2.0 * np.pi / self.wavelength

    @property
    def k_g(self) -> float:
        """Guided wavenumber inside the transmit waveguides (rad/m)."""
        return self.k_c * self.guided_index

    @property
    def k_lcx(self) -> float:
        """Guided wavenumber inside the leaky coaxial cables (rad/m)."""
        return self.k_c * self.lcx_index

    @property
    def eta(self) -> float:
        """Free-space propagation constant lambda / (4 pi)."""
        return self.wavelength / (4.0 * np.pi)


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Element positions and fixed element weights of a transmit/receive pair.

    ``tx_positions`` has shape ``(N_t, M_t, 3)`` and ``tx_feed`` holds the
    in-waveguide coefficients (shape ``(N_t, M_t)``).  The receive side is
    described the same way with ``rx_weights`` being the LCX combination
    vectors.
    """

    tx_positions: np.ndarray
    tx_feed: np.ndarray
    rx_positions: np.ndarray
    rx_weights: np.ndarray

    @property
    def n_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def n_rx(self) -> int:
        return self.rx_positions.shape[0]


@dataclass(frozen=True, eq=False)
class PassGeometry:
    """Waveguide/LCX layout together with the current PA x-coordinates.

    ``pa_x`` has shape ``(M_t, N_t)``: column ``n`` lists the PA
    coordinates on waveguide ``n`` from the feed point outwards.
    """

    n_waveguides: int = 3
    pas_per_waveguide: int = 4
    n_lcx: int = 3
    height: float = 3.0
    waveguide_spacing: float = 5.0
    lcx_offset: float = 0.5
    waveguide_length: float = 10.0
    slot_spacing: float = 1.0
    inter_pa_spacing: float = SPEED_OF_LIGHT / 15e9 / 2
    min_spacing: float = SPEED_OF_LIGHT / 15e9 / 2
    pa_x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.pa_x is None:
            object.__setattr__(self, "pa_x", self.uniform_x(
                np.zeros(self.n_waveguides)))
        pa_x = np.array(self.pa_x, dtype=float)
        pa_x.setflags(write=False)
        object.__setattr__(self, "pa_x", pa_x)
        self.validate()

    def validate(self):
        for name in ("n_waveguides", "pas_per_waveguide", "n_lcx"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        for name in ("height", "waveguide_length", "slot_spacing"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.min_spacing < 0 or self.inter_pa_spacing < self.min_spacing:
            raise ConfigurationError(
                "inter_pa_spacing must be at least min_spacing >= 0")
        if self.x_init_upper < 0:
            raise ConfigurationError(
                "waveguide too short for the PA sub-array: "
                f"L_max={self.waveguide_length}, spacing={self.inter_pa_spacing}")
        shape = (self.pas_per_waveguide, self.n_waveguides)
        if self.pa_x.shape != shape:
            raise ConfigurationError(
                f"pa_x must have shape {shape}, got {self.pa_x.shape}")
        if not np.all(np.isfinite(self.pa_x)):
            raise ConfigurationError("pa_x must be finite")
        tol = 1e-9
        if self.pa_x.min() < -tol or self.pa_x.max() > self.waveguide_length + tol:
            raise ConfigurationError("PA coordinates must lie in [0, L_max]")
        if self.pas_per_waveguide > 1:
            gaps = np.diff(self.pa_x, axis=0)
            if gaps.min() < self.min_spacing - tol:
                raise ConfigurationError(
                    f"adjacent PAs closer than min_spacing={self.min_spacing}")

    @property
    def slots_per_lcx(self) -> int:
        return int(np.floor(self.waveguide_length / self.slot_spacing + 1e-9)) + 1

    @property
    def slot_x(self) -> np.ndarray:
        return np.arange(self.slots_per_lcx) * self.slot_spacing

    @property
    def waveguide_y(self) -> np.ndarray:
        return np.arange(self.n_waveguides) * self.waveguide_spacing

    @property
    def lcx_y(self) -> np.ndarray:
        return np.arange(self.n_lcx) * self.waveguide_spacing + self.lcx_offset

    @property
    def x_init_upper(self) -> float:
        """Largest admissible coordinate of the first PA on a waveguide."""
        return self.waveguide_length - (self.pas_per_waveguide - 1) * self.inter_pa_spacing

    @property
    def x_init(self) -> np.ndarray:
        return self.pa_x[0].copy()

    def uniform_x(self, x_init, spacing=None) -> np.ndarray:
        """PA matrix with first PAs at ``x_init`` and a fixed spacing."""
        spacing = self.inter_pa_spacing if spacing is None else spacing
        x_init = np.asarray(x_init, dtype=float).reshape(self.n_waveguides)
        return x_init[None, :] + spacing * np.arange(self.pas_per_waveguide)[:, None]

    def with_initial(self, x_init, spacing=None) -> "PassGeometry":
        """Copy with the sub-array of every waveguide starting at ``x_init``."""
        return dataclasses.replace(self, pa_x=self.uniform_x(x_init, spacing))

    def with_pa_x(self, pa_x) -> "PassGeometry":
        return dataclasses.replace(self, pa_x=np.asarray(pa_x, dtype=float))

    def pa_positions(self) -> np.ndarray:
        """PA positions, shape ``(N_t, M_t, 3)``."""
        pos = np.empty((self.n_waveguides, self.pas_per_waveguide, 3))
        pos[..., 0] = self.pa_x.T
        pos[..., 1] = self.waveguide_y[:, None]
        pos[..., 2] = self.height
        return pos

    def slot_positions(self) -> np.ndarray:
        """LCX slot positions, shape ``(N_r, M_r, 3)``."""
        pos = np.empty((self.n_lcx, self.slots_per_lcx, 3))
        pos[..., 0] = self.slot_x[None, :]
        pos[..., 1] = self.lcx_y[:, None]
        pos[..., 2] = self.height
        return pos

    def layout(self, consts: PhysicalConstants) -> ArrayLayout:
        feed = np.stack([in_waveguide_vector(self.pa_x[:, n], consts)
                         for n in range(self.n_waveguides)])
        combine = combination_vector(self.slot_x, consts)
        return ArrayLayout(
            tx_positions=self.pa_positions(),
            tx_feed=feed,
            rx_positions=self.slot_positions(),
            rx_weights=np.broadcast_to(combine, (self.n_lcx, combine.size)),
        )

    def to_dict(self) -> dict:
        return {
            "n_waveguides": self.n_waveguides,
            "pas_per_waveguide": self.pas_per_waveguide,
            "n_lcx": self.n_lcx,
            "height": self.height,
            "waveguide_spacing": self.waveguide_spacing,
            "lcx_offset": self.lcx_offset,
            "waveguide_length": self.waveguide_length,
            "slot_spacing": self.slot_spacing,
            "inter_pa_spacing": self.inter_pa_spacing,
            "min_spacing": self.min_spacing,
        }


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Bob channel, warden downlink channel and round-trip matrix of one CPI.

    ``echo_gain`` is the receive-side vector ``sqrt(beta) V^T a_r`` so that
    ``H_w == np.outer(echo_gain, h_w.conj())``.
    """

    h_b: np.ndarray
    h_w: np.ndarray
    H_w: np.ndarray
    echo_gain: np.ndarray
    geometry: object = None


def in_waveguide_vector(x_n, consts: PhysicalConstants) -> np.ndarray:
    """Equal-power in-waveguide coefficients ``exp(-j k_g x) / sqrt(M)``."""
    x_n = np.asarray(x_n, dtype=float)
    if x_n.ndim != 1:
        raise ConfigurationError(f"x_n must be 1-D, got shape {x_n.shape}")
    if not np.all(np.isfinite(x_n)) or np.any(x_n < 0):
        raise ConfigurationError("PA coordinates must be finite and non-negative")
    return np.exp(-1j * consts.k_g * x_n) / np.sqrt(x_n.size)


def combination_vector(slot_x, consts: PhysicalConstants) -> np.ndarray:
    """LCX slot combining weights ``exp(-j k_lcx x) / sqrt(M_r)``."""
    slot_x = np.asarray(slot_x, dtype=float)
    return np.exp(-1j * consts.k_lcx * slot_x) / np.sqrt(slot_x.size)


def _offsets(target, antenna_positions):
    target = np.asarray(target, dtype=float)
    pos = np.asarray(antenna_positions, dtype=float)
    if target.shape != (3,) or pos.shape[-1] != 3:
        raise ConfigurationError("positions must be 3-vectors")
    d = target - pos
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r <= _MIN_DISTANCE):
        raise SingularityError("target coincides with an antenna element")
    return d, r


def free_space_vector(target, antenna_positions, consts: PhysicalConstants) -> np.ndarray:
    """Conjugated spherical-wave response ``conj(eta exp(-j k_c r) / r)``."""
    _, r = _offsets(target, antenna_positions)
    return consts.eta * np.exp(1j * consts.k_c * r) / r


def projected_velocity(v, antenna_pos, target) -> np.ndarray:
    """Radial velocity of the target along the antenna-to-target direction."""
    v = np.asarray(v, dtype=float)
    d, r = _offsets(target, antenna_pos)
    return (d @ v) / r


def doppler_vector(v, target, antenna_positions, consts: PhysicalConstants) -> np.ndarray:
    """Conjugated Doppler phase ``conj(exp(-j k_c dT v_proj))`` per element."""
    vp = projected_velocity(v, antenna_positions, target)
    return np.exp(1j * consts.k_c * consts.cpi_duration * vp)


def transmit_channel(layout: ArrayLayout, target, velocity, consts: PhysicalConstants,
                     ) -> np.ndarray:
    """Downlink column ``h`` with ``h^H = a^H G`` for a (moving) target.

    Pass ``velocity=None`` for a static receiver (no Doppler factor).
    """
    a = free_space_vector(target, layout.tx_positions, consts)
    if velocity is not None:
        a = a * doppler_vector(velocity, target, layout.tx_positions, consts)
    row = np.sum(a.conj() * layout.tx_feed, axis=-1)
    return row.conj()


def echo_gain(layout: ArrayLayout, target, velocity, consts: PhysicalConstants) -> np.ndarray:
    """Receive-side vector ``sqrt(beta) V^T a_r`` of length ``N_r``."""
    a = free_space_vector(target, layout.rx_positions, consts)
    if velocity is not None:
        a = a * doppler_vector(velocity, target, layout.rx_positions, consts)
    return np.sqrt(consts.rcs) * np.sum(layout.rx_weights * a, axis=-1)


def _as_layout(geom, consts) -> ArrayLayout:
    return geom if isinstance(geom, ArrayLayout) else geom.layout(consts)


def mobility_vectors(state):
    """Position and velocity 3-vectors from a state vector or MobilityState."""
    xi = np.asarray(getattr(state, "xi", state), dtype=float)
    if xi.shape != (4,):
        raise ConfigurationError(f"mobility state must have 4 entries, got {xi.shape}")
    return np.array([xi[0], xi[1], 0.0]), np.array([xi[2], xi[3], 0.0])


def bob_channel(geom, bob, consts: PhysicalConstants) -> np.ndarray:
    """Bob's channel ``h_b`` (static receiver, no Doppler)."""
    return transmit_channel(_as_layout(geom, consts), bob, None, consts)


def willie_channels(geom, willie_state, consts: PhysicalConstants):
    """Warden downlink channel ``h_w`` and rank-one round-trip matrix ``H_w``.

    Returns ``(h_w, H_w, echo)`` where ``H_w = echo h_w^H``.
    """
    layout = _as_layout(geom, consts)
    pos, vel = mobility_vectors(willie_state)
    h_w = transmit_channel(layout, pos, vel, consts)
    echo = echo_gain(layout, pos, vel, consts)
    return h_w, np.outer(echo, h_w.conj()), echo


def build_channels(geom, bob, willie_state, consts: PhysicalConstants) -> ChannelSet:
    layout = _as_layout(geom, consts)
    h_w, H_w, echo = willie_channels(layout, willie_state, consts)
    return ChannelSet(h_b=bob_channel(layout, bob, consts), h_w=h_w, H_w=H_w,
                      echo_gain=echo, geometry=geom)

"""Benchmark placement strategies sharing the per-CPI optimizer."""

from __future__ import annotations

import enum
import logging

import numpy as np

from .geometry import ArrayLayout, PassGeometry, PhysicalConstants, build_channels
from .optimizer import BeamSolution, solve_or_fallback

log = logging.getLogger(__name__)


class BaselineKind(str, enum.Enum):
    ONE_D_SEARCH = "1d_search"
    GREEDY = "greedy"
    MIMO_PERFECT_CSI = "mimo"


def search_grid(geom: PassGeometry, n_steps: int = 10) -> np.ndarray:
    """Grid ``{0, L/n, ..., L}`` clipped to the admissible starting range."""
    grid = np.linspace(0.0, geom.waveguide_length, n_steps + 1)
    return np.minimum(grid, geom.x_init_upper)


def one_d_search(evaluate, grid, n_waveguides: int, start=None, mode: str = "coordinate",
                 max_points: int = 2000):
    """Grid search over the first-PA coordinates.

    Parameters
    ----------
    evaluate : callable
        ``evaluate(x_init) -> BeamSolution``.
    grid : array_like
        Candidate coordinates shared by every waveguide, ascending.
    start : array_like, optional
        Coordinates the coordinate-wise scan starts from (the previous
        optimum); defaults to the first grid point.
    mode : {"coordinate", "cartesian"}
        ``"coordinate"`` scans one waveguide at a time holding the others
        fixed; ``"cartesian"`` enumerates the full product grid.

    Returns
    -------
    x_init, solution
        Best placement and its solution.  Ties keep the smallest coordinate.
    """
    grid = np.asarray(grid, dtype=float)
    if mode == "cartesian":
        if grid.size ** n_waveguides > max_points:
            raise ValueError("Cartesian grid too large; use the coordinate mode")
        mesh = np.meshgrid(*([grid] * n_waveguides), indexing="ij")
        candidates = np.stack([m.ravel() for m in mesh], axis=1)
        best_x, best = None, None
        for x in candidates:
            sol = evaluate(x)
            if best is None or sol.rate > best.rate:
                best_x, best = x.copy(), sol
        return best_x, best
    if mode != "coordinate":
        raise ValueError(f"unknown search mode {mode!r}")

    x = np.full(n_waveguides, grid[0]) if start is None else np.array(start, dtype=float)
    best = None
    for n in range(n_waveguides):
        best_n = None
        for value in grid:
            trial = x.copy()
            trial[n] = value
            sol = evaluate(trial)
            if best_n is None or sol.rate > best_n[1].rate:
                best_n = (value, sol)
        x[n] = best_n[0]
        best = best_n[1]
    return x, best


def greedy_spacing(geom: PassGeometry, consts: PhysicalConstants) -> float:
    spacing = max(consts.wavelength / 2, geom.min_spacing)
    if spacing > consts.wavelength / 2:
        log.info("greedy spacing clamped to the minimum PA spacing %.4g m", spacing)
    return spacing


def greedy_placement(geom: PassGeometry, bob) -> np.ndarray:
    """First PA of every waveguide at Bob's x-coordinate, clamped to range."""
    xb = float(np.asarray(bob)[0])
    x = min(max(xb, 0.0), geom.x_init_upper)
    if x != xb:
        log.info("Bob's x-coordinate %.3f m clamped to %.3f m", xb, x)
    return np.full(geom.n_waveguides, x)


def mimo_layout(geom: PassGeometry, consts: PhysicalConstants, center=(0.0, 0.0, 3.0),
                n_elements: int | None = None) -> ArrayLayout:
    """Half-wavelength uniform linear array along x, with the LCX receive chain."""
    n = geom.n_waveguides if n_elements is None else n_elements
    offsets = (np.arange(n) - (n - 1) / 2) * consts.wavelength / 2
    tx = np.zeros((n, 1, 3))
    tx[:, 0, :] = np.asarray(center, dtype=float)
    tx[:, 0, 0] += offsets
    rx_layout = geom.layout(consts)
    return ArrayLayout(
        tx_positions=tx,
        tx_feed=np.ones((n, 1), dtype=complex),
        rx_positions=rx_layout.rx_positions,
        rx_weights=rx_layout.rx_weights,
    )


def mimo_baseline(layout: ArrayLayout, bob, ground_truth_state, consts: PhysicalConstants,
                  p_max, gamma_sen, noise_b, noise_w) -> BeamSolution:
    """Solve one CPI for the fixed array with perfect warden CSI."""
    ch = build_channels(layout, bob, ground_truth_state, consts)
    return solve_or_fallback(ch, p_max, gamma_sen, noise_b, noise_w)

"""Per-CPI covert beamforming and artificial-noise design.

The information beam lives in the null space of the warden's channel, so
the warden only ever sees the AN.  The AN direction maximises a generalised
Rayleigh quotient; its power is the smallest that still meets the sensing
threshold, and the rest of the budget goes to the beam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covertness import kl_divergence, lambda_pair
from .errors import DegenerateChannelError, EmptySubspaceError, SensingInfeasibleError

EIG_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class BeamSolution:
    w: np.ndarray
    q: np.ndarray
    p_an: float
    p_beam: float
    rate: float
    sensing_power: float
    kl_audit: float
    feasible: bool = True
    quotient: float = float("nan")


@dataclass(frozen=True, eq=False)
class RayleighProblem:
    """Matrices of the quotient ``c * (q^H A q) / (q^H B q)``."""

    A: np.ndarray
    B: np.ndarray
    c_scalar: float
    U_plus: np.ndarray
    Lambda_plus: np.ndarray
    H_w: np.ndarray

    @property
    def C(self) -> np.ndarray:
        scale = 1.0 / np.sqrt(self.Lambda_plus)
        M = self.U_plus.conj().T @ self.A @ self.U_plus
        C = scale[:, None] * M * scale[None, :]
        return 0.5 * (C + C.conj().T)

    def quotient(self, q) -> float:
        q = np.asarray(q)
        num = np.real(np.vdot(q, self.A @ q))
        den = np.real(np.vdot(q, self.B @ q))
        return num / den


def optimal_beamformer(h_b, h_w, p_beam: float) -> np.ndarray:
    """Bob-matched beam projected onto the null space of ``h_w``."""
    h_b = np.asarray(h_b, dtype=complex)
    h_w = np.asarray(h_w, dtype=complex)
    if p_beam < 0:
        raise ValueError(f"beam power must be non-negative, got {p_beam}")
    proj = h_b - h_w * (np.vdot(h_w, h_b) / np.vdot(h_w, h_w).real)
    norm = np.linalg.norm(proj)
    if norm <= 1e-12 * np.linalg.norm(h_b):
        raise DegenerateChannelError("Bob's channel is parallel to the warden's channel")
    return np.sqrt(p_beam) * proj / norm


def build_rayleigh(h_b, H_w, p_max: float, gamma_sen: float, noise_b: float, w_unit,
                   rtol: float = EIG_RTOL) -> RayleighProblem:
    h_b = np.asarray(h_b, dtype=complex)
    H_w = np.asarray(H_w, dtype=complex)
    n = h_b.size
    HH = H_w.conj().T @ H_w
    A = p_max * HH - gamma_sen * np.eye(n)
    B = gamma_sen * np.outer(h_b, h_b.conj()) + noise_b * HH
    A = 0.5 * (A + A.conj().T)
    B = 0.5 * (B + B.conj().T)
    c_scalar = float(abs(np.vdot(h_b, w_unit)) ** 2)
    U, lam = positive_subspace(B, rtol)
    return RayleighProblem(A, B, c_scalar, U, lam, H_w)


def positive_subspace(B, rtol: float = EIG_RTOL):
    """Eigenpairs of ``B`` with eigenvalue above ``rtol * lambda_max``."""
    lam, U = np.linalg.eigh(B)
    top = lam[-1]
    if not top > 0:
        raise EmptySubspaceError("matrix has no positive eigenvalue")
    keep = lam > rtol * top
    return U[:, keep], lam[keep]


def optimal_an(problem: RayleighProblem, p_max: float, gamma_sen: float):
    """Unit AN direction and the power that makes the sensing constraint tight."""
    if problem.U_plus.shape[1] == 0:
        raise EmptySubspaceError("empty positive subspace")
    lam, V = np.linalg.eigh(problem.C)
    q_white = V[:, -1]
    # map back from the whitened coordinates
    q = problem.U_plus @ (q_white / np.sqrt(problem.Lambda_plus))
    q = q / np.linalg.norm(q)
    gain = float(np.linalg.norm(problem.H_w @ q) ** 2)
    if gain <= 0:
        raise SensingInfeasibleError("AN direction does not illuminate the warden")
    p_an = gamma_sen / gain
    if not p_an <= p_max:
        raise SensingInfeasibleError(
            f"sensing needs {p_an:.3e} W of AN, budget is {p_max:.3e} W")
    return q, p_an


def covert_rate(h_b, w, q, noise_b: float) -> float:
    """``log2(1 + |h_b^H w|^2 / (|h_b^H q|^2 + sigma_b^2))``."""
    if not noise_b > 0:
        raise ValueError("noise power must be positive")
    signal = abs(np.vdot(h_b, w)) ** 2
    jam = abs(np.vdot(h_b, q)) ** 2
    return float(np.log2(1.0 + signal / (jam + noise_b)))


def solve_cpi(channels, p_max: float, gamma_sen: float, noise_b: float, noise_w: float,
              rtol: float = EIG_RTOL) -> BeamSolution:
    """Beamformer, AN and rate for one CPI from (estimated) channels."""
    h_b, h_w, H_w = channels.h_b, channels.h_w, channels.H_w
    w_unit = optimal_beamformer(h_b, h_w, 1.0)
    problem = build_rayleigh(h_b, H_w, p_max, gamma_sen, noise_b, w_unit, rtol)
    q_unit, p_an = optimal_an(problem, p_max, gamma_sen)
    p_beam = max(p_max - p_an, 0.0)
    w = np.sqrt(p_beam) * w_unit
    q = np.sqrt(p_an) * q_unit
    lam0, lam1 = lambda_pair(h_w, w, q, noise_w)
    return BeamSolution(
        w=w, q=q, p_an=p_an, p_beam=p_beam,
        rate=covert_rate(h_b, w, q, noise_b),
        sensing_power=p_an * float(np.linalg.norm(H_w @ q_unit) ** 2),
        kl_audit=kl_divergence(lam0, lam1),
        quotient=problem.quotient(q_unit),
    )


def fallback_solution(channels, p_max: float, noise_w: float) -> BeamSolution:
    """Silent-Alice solution for an infeasible CPI.

    No covert symbol is sent and the whole budget is spent on AN matched
    to the warden, the best achievable sensing power.
    """
    h_w, H_w = channels.h_w, channels.H_w
    w = np.zeros_like(h_w)
    q = np.sqrt(p_max) * h_w / np.linalg.norm(h_w)
    return BeamSolution(
        w=w, q=q, p_an=p_max, p_beam=0.0, rate=0.0,
        sensing_power=float(np.linalg.norm(H_w @ q) ** 2),
        kl_audit=0.0, feasible=False,
    )


def solve_or_fallback(channels, p_max, gamma_sen, noise_b, noise_w, rtol=EIG_RTOL):
    try:
        return solve_cpi(channels, p_max, gamma_sen, noise_b, noise_w, rtol)
    except (SensingInfeasibleError, EmptySubspaceError, DegenerateChannelError):
        return fallback_solution(channels, p_max, noise_w)

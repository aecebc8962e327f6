"""Warden detection statistics for the radiometer test on ``|y_w|^2``.

Under both hypotheses ``|y_w|^2`` is exponential with mean ``lambda0``
(Alice silent, AN only) or ``lambda1`` (covert symbol present).  Equal
priors are assumed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTestError, DomainError


@dataclass(frozen=True)
class DetectionStats:
    lambda0: float
    lambda1: float
    kl: float
    error_lower_bound: float


def _power(h, v) -> float:
    h = np.asarray(h)
    v = np.asarray(v)
    if h.shape != v.shape or h.ndim != 1:
        raise ValueError(f"shape mismatch: {h.shape} vs {v.shape}")
    return float(abs(np.vdot(h, v)) ** 2)


def lambda_pair(h_w, w, q, noise_w: float) -> tuple[float, float]:
    """Mean received power at the warden without and with the covert signal."""
    if not noise_w > 0:
        raise DomainError(f"noise power must be positive, got {noise_w}")
    lambda0 = _power(h_w, q) + noise_w
    return lambda0, lambda0 + _power(h_w, w)


def kl_divergence(lambda0: float, lambda1: float) -> float:
    """``D(p0 || p1)`` between the two exponential laws, in nats."""
    if not (lambda0 > 0 and lambda1 > 0):
        raise DomainError("exponential means must be positive")
    ratio = lambda0 / lambda1
    # Direct evaluation cancels near ratio == 1; use the series
    # ln(1/x) + x - 1 = d^2/2 + d^3/3 + d^4/4 + ... with d = 1 - x.
    delta = 1.0 - ratio
    if abs(delta) < 1e-4:
        return float(delta**2 / 2 + delta**3 / 3 + delta**4 / 4)
    return float(-np.log(ratio) + ratio - 1.0)


def error_lower_bound(kl: float) -> float:
    """Pinsker lower bound ``max(0, 1 - sqrt(kl/2))`` on the total error."""
    if kl < 0:
        raise DomainError(f"KL divergence must be non-negative, got {kl}")
    return max(0.0, 1.0 - np.sqrt(kl / 2.0))


def detection_threshold(lambda0: float, lambda1: float) -> float:
    """Likelihood-ratio threshold on ``|y_w|^2`` for equal priors."""
    if not lambda0 > 0:
        raise DomainError("lambda0 must be positive")
    if lambda1 <= lambda0:
        raise DegenerateTestError(
            "lambda1 must exceed lambda0; the hypotheses are indistinguishable")
    # lambda0 * lambda1 / (lambda1 - lambda0) * ln(lambda1 / lambda0)
    gap = (lambda1 - lambda0) / lambda0
    return float(lambda1 * np.log1p(gap) / gap)


def total_error(lambda0: float, lambda1: float) -> float:
    """Exact false-alarm plus miss probability of the threshold test."""
    tau = detection_threshold(lambda0, lambda1)
    return float(np.exp(-tau / lambda0) - np.expm1(-tau / lambda1))


def detection_stats(h_w, w, q, noise_w: float) -> DetectionStats:
    lambda0, lambda1 = lambda_pair(h_w, w, q, noise_w)
    kl = kl_divergence(lambda0, lambda1)
    return DetectionStats(lambda0, lambda1, kl, error_lower_bound(kl))

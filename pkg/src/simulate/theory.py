"""
Closed-form completion-time results.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from src.exceptions import ConfigurationError, FieldDomainError
from src.schemas import SimConfig
from src.simulate.delays import build_delay_model, expected_packet_service


def _sorted_betas(expected_betas: Sequence[float]) -> np.ndarray:
    betas = np.sort(np.asarray(expected_betas, dtype=np.float64))
    if betas.size == 0 or np.any(betas <= 0):
        raise ConfigurationError("expected service times must be positive")
    return betas


def prac_completion_estimate(
    expected_betas: Sequence[float],
    z: int,
    b: int,
    epsilon: float,
    rtt: Optional[Sequence[float]] = None,
) -> float:
    """(b + eps) / sum_{i=z+1..n} 1/E[beta_i], workers fastest first.

    With `rtt` the largest round trip is added on top.
    """
    betas = _sorted_betas(expected_betas)
    if not 0 <= z < betas.size:
        raise ConfigurationError(f"need 0 <= z < n, got z={z}, n={betas.size}")
    estimate = (b + epsilon) / float(np.sum(1.0 / betas[z:]))
    if rtt is not None and len(rtt):
        estimate += float(np.max(rtt))
    return estimate


def config_betas(config: SimConfig, trial: int = 0) -> np.ndarray:
    """Analytic E[beta_i] for the trial's worker profile."""
    return expected_packet_service(build_delay_model(config, trial), config.b)


def config_completion_estimate(config: SimConfig, epsilon: float, trial: int = 0) -> float:
    """PRAC completion estimate for `config` with analytic E[beta_i]."""
    return prac_completion_estimate(config_betas(config, trial), config.z, config.b, epsilon)


def config_gap_bound(config: SimConfig, d_star: int, epsilon: float, trial: int = 0) -> float:
    """Staircase-minus-PRAC lower bound for `config` with analytic E[beta_i]."""
    return staircase_gap_bound(config_betas(config, trial), config.z, config.b, d_star, epsilon)


def homogeneous_estimate(expected_beta: float, n: int, z: int, b: int, epsilon: float) -> float:
    """(b + eps) E[beta] / (n - z)."""
    return (b + epsilon) * expected_beta / (n - z)


def staircase_gap_bound(
    expected_betas: Sequence[float],
    z: int,
    b: int,
    d_star: int,
    epsilon: float,
) -> float:
    """Lower bound on E[T_SC] - E[T_PRAC].

    x = (n - d*)/E[beta_n] and y = (d* - z)/E[beta_d*] on the sorted
    betas; the bound is (b x - eps y) / (y (x + y)).

    Raises:
        FieldDomainError: unless z < d* <= n
    """
    betas = _sorted_betas(expected_betas)
    n = betas.size
    if not z < d_star <= n:
        raise FieldDomainError(f"need z < d* <= n, got d*={d_star}, z={z}, n={n}")
    x = (n - d_star) / betas[-1]
    y = (d_star - z) / betas[d_star - 1]
    return float((b * x - epsilon * y) / (y * (x + y)))


def optimal_d(expected_betas: Sequence[float], z: int, b: int, k: Optional[int] = None) -> int:
    """argmin over d in k..n of b/(d - z) * E[beta_(d)]; ties go to the smaller d."""
    betas = _sorted_betas(expected_betas)
    n = betas.size
    k = z + 1 if k is None else k
    if not z < k <= n:
        raise ConfigurationError(f"need z < k <= n, got k={k}, z={z}, n={n}")
    best, best_value = k, math.inf
    for d in range(k, n + 1):
        value = b / (d - z) * betas[d - 1]
        if value < best_value:
            best, best_value = d, value
    return best


def staircase_expected(expected_betas: Sequence[float], z: int, b: int, k: Optional[int] = None) -> float:
    """Dominant-term Staircase time at the optimal d."""
    betas = _sorted_betas(expected_betas)
    d = optimal_d(betas, z, b, k)
    return b / (d - z) * float(betas[d - 1])

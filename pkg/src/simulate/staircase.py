"""
Staircase-code baseline.

Each worker receives its whole share up front: b/(k-z) blocks' worth of
work plus one round trip. With the d fastest workers done the master needs
only a (k-z)/(d-z) fraction of each share, so

    T_SC(n, k, z) = min_{d in k..n} (k - z)/(d - z) * T_(d).

Task times for every k reuse the same per-block draws (common random
numbers), so the choice of k is not blurred by sampling noise.
"""
from __future__ import annotations

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from src.exceptions import ConfigurationError
from src.schemas import CompletionRecord, DelayModel, Scheme, SimConfig
from src.simulate.delays import (
    STREAM_LINK,
    STREAM_SERVICE,
    build_delay_model,
    sample_packet_service,
    stream_rng,
    trial_seed,
)

logger = logging.getLogger(__name__)


def threshold_completion_time(t_sorted: Sequence[float], k: int, z: int) -> float:
    """Inner minimization over d for one k; `t_sorted` ascending."""
    n = len(t_sorted)
    if not z < k <= n:
        raise ConfigurationError(f"need z < k <= n, got k={k}, z={z}, n={n}")
    return min((k - z) / (d - z) * float(t_sorted[d - 1]) for d in range(k, n + 1))


def staircase_by_k(times_by_k: Dict[int, np.ndarray], z: int) -> Dict[int, float]:
    """Threshold completion time for every k."""
    return {k: threshold_completion_time(np.sort(times), k, z) for k, times in times_by_k.items()}


def staircase_time(by_k: Dict[int, float]) -> float:
    """Outer minimization over k."""
    return min(by_k.values())


def best_k(by_k: Dict[int, float]) -> int:
    return min(by_k, key=lambda k: (by_k[k], k))


def task_times(
    config: SimConfig,
    model: DelayModel,
    trial: int,
    salt: Optional[int] = None,
) -> Dict[int, np.ndarray]:
    """Whole-task time of every worker, for every k in z+1..n."""
    n, z, b = config.n, config.z, config.b
    cumulative = np.zeros((n, b + 1))
    draws = np.zeros((n, b))
    rates = np.zeros(n)
    for w in range(n):
        service_rng = stream_rng(config.seed, trial, STREAM_SERVICE, worker=w, salt=salt)
        draws[w] = [sample_packet_service(model, w, b, service_rng) for _ in range(b)]
        cumulative[w, 1:] = np.cumsum(draws[w])
        link_rng = stream_rng(config.seed, trial, STREAM_LINK, worker=w, salt=salt)
        rates[w] = max(int(link_rng.poisson(model.capacities[w])), 1)

    times: Dict[int, np.ndarray] = {}
    for k in range(z + 1, n + 1):
        share = b / (k - z)
        whole = int(np.floor(share))
        frac = share - whole
        compute = cumulative[:, whole].copy()
        if whole < b and frac > 0:
            compute += frac * draws[:, whole]
        rows = config.m / (k - z)
        rtt = 8.0 * rows * (config.ell + 1) / rates
        times[k] = compute + rtt
    return times


def staircase_trial(config: SimConfig, trial: int = 0, salt: Optional[int] = None) -> Dict[int, float]:
    """Completion time of one trial for every k."""
    model = build_delay_model(config, trial, salt=salt)
    return staircase_by_k(task_times(config, model, trial, salt=salt), config.z)


def run_staircase(
    config: SimConfig,
    trial: int = 0,
    salt: Optional[int] = None,
    k: Optional[int] = None,
) -> CompletionRecord:
    """One Staircase trial at a fixed k, or at this trial's best k."""
    by_k = staircase_trial(config, trial, salt)
    chosen = best_k(by_k) if k is None else k
    if chosen not in by_k:
        raise ConfigurationError(f"k={chosen} outside {config.z + 1}..{config.n}")
    return staircase_record(config, trial, by_k[chosen])


def staircase_record(config: SimConfig, trial: int, completion_time: float) -> CompletionRecord:
    return CompletionRecord(
        scheme=Scheme.STAIRCASE,
        n=config.n,
        z=config.z,
        b=config.b,
        m=config.m,
        ell=config.ell,
        scenario=config.scenario,
        adversary_rule=config.adversary_rule,
        trial=trial,
        seed=trial_seed(config.seed, trial),
        completion_time_s=completion_time,
        packets_sent=config.n,
        epsilon_observed=None,
    )

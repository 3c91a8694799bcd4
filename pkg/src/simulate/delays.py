"""
Worker delay model: shifted-exponential computing, Poisson-rate links.

A whole task at worker i takes c_i + Exp(lambda_i) with c_i = 1/lambda_i.
Split into b packets, each packet takes c_i/b + Exp(b * lambda_i), so the b
packet times add up to the same mean 2/lambda_i.

Every random stream is its own generator seeded from
(seed, trial, stream[, worker][, salt]); schemes that share a salt see
identical draws.
"""
from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np

from src.exceptions import ConfigurationError
from src.schemas import DelayModel, Scenario, SimConfig

logger = logging.getLogger(__name__)

STREAM_PROFILE = 0
STREAM_SERVICE = 1
STREAM_LINK = 2
STREAM_PROTOCOL = 3
STREAM_ADVERSARY = 4
STREAM_DATA = 5

FAST_LAMBDA = 9.0
REGULAR_LAMBDA = 3.0
SLOW_LAMBDA = 1.0
SCENARIO3_RANGE = (0.5, 9.0)


def trial_seed(seed: int, trial: int) -> int:
    """Per-trial seed derived from the base seed and the trial counter."""
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, dtype=np.uint32)[0])


def stream_rng(
    seed: int,
    trial: int,
    stream: int,
    worker: Optional[int] = None,
    salt: Optional[int] = None,
) -> np.random.Generator:
    entropy = [trial_seed(seed, trial), stream]
    if worker is not None:
        entropy.append(worker)
    if salt is not None:
        entropy.append(1000 + salt)
    return np.random.default_rng(entropy)


def scenario_lambdas(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-worker rates for the configured scenario, in worker order."""
    n, z = config.n, config.z
    scenario = config.scenario
    if scenario == Scenario.ONE:
        half, quarter = n // 2, n // 4
        groups = [(half, REGULAR_LAMBDA), (quarter, SLOW_LAMBDA), (n - half - quarter, FAST_LAMBDA)]
    elif scenario == Scenario.TWO:
        third = n // 3
        groups = [(third, SLOW_LAMBDA), (third, REGULAR_LAMBDA), (n - 2 * third, FAST_LAMBDA)]
    elif scenario == Scenario.THREE:
        return rng.uniform(*SCENARIO3_RANGE, size=n)
    elif scenario == Scenario.HOMOGENEOUS:
        groups = [(n, config.lam)]
    elif scenario == Scenario.CLUSTERED:
        fast = z // 2
        groups = [(fast, FAST_LAMBDA), (z - fast, REGULAR_LAMBDA), (n - z, SLOW_LAMBDA)]
    elif scenario == Scenario.CUSTOM:
        return np.asarray(config.lambdas, dtype=np.float64)
    else:
        raise ConfigurationError(f"unknown scenario {scenario!r}")
    return np.concatenate([np.full(count, lam, dtype=np.float64) for count, lam in groups])


def build_delay_model(config: SimConfig, trial: int, salt: Optional[int] = None) -> DelayModel:
    """Draw the trial's worker profile (rates and link capacities)."""
    rng = stream_rng(config.seed, trial, STREAM_PROFILE, salt=salt)
    lambdas = scenario_lambdas(config, rng)
    low, high = config.capacity_range
    capacities = rng.uniform(low, high, size=config.n)
    return DelayModel(
        lambdas=lambdas.tolist(),
        shifts=(1.0 / lambdas).tolist(),
        capacities=capacities.tolist(),
    )


def sample_packet_service(model: DelayModel, worker: int, b: int, rng: np.random.Generator) -> float:
    """One packet's computing time at `worker`."""
    lam = model.lambdas[worker]
    return model.shifts[worker] / b + float(rng.exponential(1.0 / (b * lam)))


def sample_transmission(model: DelayModel, worker: int, bits: float, rng: np.random.Generator) -> float:
    """Link time for `bits`: the rate is Poisson(C_i), floored at 1 bit/s."""
    if bits <= 0:
        raise ConfigurationError(f"packet size must be positive, got {bits} bits")
    rate = max(int(rng.poisson(model.capacities[worker])), 1)
    return bits / rate


def expected_packet_service(model: DelayModel, b: int) -> np.ndarray:
    """E[beta_i] = (c_i + 1/lambda_i) / b."""
    lambdas = np.asarray(model.lambdas)
    return (np.asarray(model.shifts) + 1.0 / lambdas) / b


def packet_bits(config: SimConfig) -> int:
    """Bits in one packet (block_rows x ell bytes)."""
    return 8 * config.block_rows * config.ell


def result_bits(config: SimConfig) -> int:
    return 8 * config.block_rows


class DelaySampler:
    """Per-worker service and link streams for one trial."""

    def __init__(self, model: DelayModel, b: int, seed: int, trial: int, salt: Optional[int] = None):
        self.model = model
        self.b = b
        self._service: List[np.random.Generator] = [
            stream_rng(seed, trial, STREAM_SERVICE, worker=w, salt=salt) for w in range(model.n)
        ]
        self._link: List[np.random.Generator] = [
            stream_rng(seed, trial, STREAM_LINK, worker=w, salt=salt) for w in range(model.n)
        ]

    def service(self, worker: int) -> float:
        return sample_packet_service(self.model, worker, self.b, self._service[worker])

    def transmission(self, worker: int, bits: float) -> float:
        return sample_transmission(self.model, worker, bits, self._link[worker])

    def mean_transmission(self, worker: int, bits: float) -> float:
        return bits / self.model.capacities[worker]

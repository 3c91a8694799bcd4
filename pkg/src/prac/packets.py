"""
Protocol messages and the per-worker service-time estimator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

import numpy as np

from src.coding.fountain import FountainSpec
from src.coding.gf256 import FieldMatrix, mat_vec_mul
from src.exceptions import FieldDomainError


class PacketKind(str, Enum):
    """Key packets carry R_{t,j}; secure packets carry nu + g_j R."""
    KEY = "key"
    SECURE = "secure"


@dataclass(frozen=True)
class Packet:
    """One unit sent master -> worker.

    Rounds and slots are 1-based; workers are 0-based indices.
    For key packets `key_index` equals the slot. Secure packets carry the
    fountain spec and the generator row of their pad (the slot). With z = 0
    the pad is empty and the packet is a plain fountain packet.
    """

    worker: int
    round: int
    slot: int
    kind: PacketKind
    payload: FieldMatrix
    key_index: Optional[int] = None
    spec: Optional[FountainSpec] = None
    g_row: Optional[int] = None

    def __post_init__(self):
        if self.round < 1 or self.slot < 1:
            raise FieldDomainError(f"round and slot are 1-based, got t={self.round}, j={self.slot}")
        if self.kind is PacketKind.KEY:
            if self.key_index is None or self.spec is not None:
                raise FieldDomainError("key packet needs key_index and no fountain spec")
        else:
            if self.spec is None or self.g_row is None:
                raise FieldDomainError("secure packet needs a fountain spec and a generator row")

    @property
    def is_key(self) -> bool:
        return self.kind is PacketKind.KEY


@dataclass(frozen=True)
class ResultMsg:
    """A worker's product payload . x for one packet."""

    worker: int
    round: int
    slot: int
    result: np.ndarray = field(repr=False)

    def __post_init__(self):
        result = np.asarray(self.result, dtype=np.uint8).reshape(-1)
        object.__setattr__(self, "result", result)


def worker_compute(payload: FieldMatrix, x: FieldMatrix) -> np.ndarray:
    """What a worker returns: payload . x as a flat byte vector."""
    return mat_vec_mul(payload, x).vector().copy()


class BetaEstimator:
    """Running mean of observed per-packet service times, per worker."""

    def __init__(self):
        self._count: Dict[int, int] = {}
        self._mean: Dict[int, float] = {}

    def observe(self, worker: int, sample: float) -> float:
        """Fold one sample into the worker's mean; returns the new mean."""
        sample = max(float(sample), 0.0)
        count = self._count.get(worker, 0) + 1
        mean = self._mean.get(worker, 0.0)
        mean += (sample - mean) / count
        self._count[worker] = count
        self._mean[worker] = mean
        return mean

    def mean(self, worker: int) -> Optional[float]:
        return self._mean.get(worker)

    def count(self, worker: int) -> int:
        return self._count.get(worker, 0)


def observed_service_time(
    sent_at: float,
    result_at: float,
    prev_result_at: Optional[float],
    one_way: float,
    return_way: Optional[float] = None,
) -> float:
    """Service time seen from the master's timestamps.

    The worker starts when the packet lands (sent + one_way) or when it
    finished the previous packet (previous result minus return_way), whichever
    is later, and its result needs return_way to come back. `return_way`
    defaults to `one_way` for symmetric links.
    """
    return_way = one_way if return_way is None else return_way
    start = sent_at + one_way + return_way
    if prev_result_at is not None:
        start = max(start, prev_result_at)
    return max(result_at - start, 0.0)

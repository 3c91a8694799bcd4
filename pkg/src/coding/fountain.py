"""
LT fountain coding over row blocks.

An information packet is the XOR of the row blocks named by its
FountainSpec (all coefficients are 0/1). The master keeps producing packets
with fresh specs until the peeling decoder holds every block.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.coding.gf256 import FieldMatrix
from src.coding.utils import U16, U32, read_struct
from src.exceptions import DecoderIntegrityError, DecoderStateError, FieldDomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FountainSpec:
    """Sorted, distinct block indices combined into one information packet."""

    block_indices: Tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.block_indices)
        if not indices:
            raise FieldDomainError("a fountain spec needs at least one block")
        if any(a >= b for a, b in zip(indices, indices[1:])) or indices[0] < 0:
            raise FieldDomainError(f"spec indices must be strictly increasing and >= 0: {indices}")
        object.__setattr__(self, "block_indices", indices)

    @property
    def degree(self) -> int:
        return len(self.block_indices)

    def check_bound(self, b: int) -> None:
        if self.block_indices[-1] >= b:
            raise FieldDomainError(f"spec index {self.block_indices[-1]} out of range for b={b}")

    def to_bytes(self) -> bytes:
        """2-byte big-endian count, then 4-byte big-endian indices."""
        return U16.pack(self.degree) + b"".join(U32.pack(i) for i in self.block_indices)

    @classmethod
    def read_from(cls, buf: bytes, offset: int = 0) -> Tuple["FountainSpec", int]:
        (count,), offset = read_struct(U16, buf, offset)
        indices = []
        for _ in range(count):
            (index,), offset = read_struct(U32, buf, offset)
            indices.append(index)
        return cls(tuple(indices)), offset


@dataclass(frozen=True, eq=False)
class DegreeDistribution:
    """Robust soliton distribution over degrees 1..b."""

    b: int
    c: float
    delta: float
    pmf: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    def probability(self, degree: int) -> float:
        return float(self.pmf[degree - 1])


def robust_soliton(b: int, c: float = 0.03, delta: float = 0.5) -> DegreeDistribution:
    """Build the robust soliton distribution (ideal soliton plus ripple spike)."""
    if b < 1:
        raise FieldDomainError(f"b must be positive, got {b}")
    degrees = np.arange(1, b + 1, dtype=np.float64)

    rho = np.zeros(b, dtype=np.float64)
    rho[0] = 1.0 / b
    if b > 1:
        rho[1:] = 1.0 / (degrees[1:] * (degrees[1:] - 1.0))

    tau = np.zeros(b, dtype=np.float64)
    ripple = c * math.log(b / delta) * math.sqrt(b)
    if ripple > 0:
        spike = min(max(int(b / ripple), 1), b)
        tau[: spike - 1] = ripple / (degrees[: spike - 1] * b)
        tau[spike - 1] = max(ripple * math.log(ripple / delta) / b, 0.0)

    mass = rho + tau
    pmf = mass / mass.sum()
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    for arr in (pmf, cdf):
        arr.setflags(write=False)
    return DegreeDistribution(b=b, c=c, delta=delta, pmf=pmf, cdf=cdf)


def sample_spec(dist: DegreeDistribution, rng: np.random.Generator) -> FountainSpec:
    """Draw a degree from `dist`, then that many distinct blocks uniformly."""
    degree = int(np.searchsorted(dist.cdf, rng.random(), side="right")) + 1
    degree = min(degree, dist.b)
    chosen = rng.choice(dist.b, size=degree, replace=False)
    return FountainSpec(tuple(sorted(int(i) for i in chosen)))


def encode(blocks: Sequence[FieldMatrix], spec: FountainSpec) -> FieldMatrix:
    """XOR-sum of the row blocks named by `spec`."""
    spec.check_bound(len(blocks))
    shape = blocks[0].shape
    acc = np.zeros(shape, dtype=np.uint8)
    for i in spec.block_indices:
        if blocks[i].shape != shape:
            raise FieldDomainError(f"block {i} has shape {blocks[i].shape}, expected {shape}")
        acc ^= blocks[i].data
    return FieldMatrix(acc)


class PeelingState:
    """Peeling (belief-propagation) decoder for computed packets.

    Single owner; packets are ingested sequentially.
    """

    def __init__(self, b: int, block_len: int):
        if b < 1 or block_len < 1:
            raise FieldDomainError(f"invalid decoder dimensions b={b}, block_len={block_len}")
        self.b = b
        self.block_len = block_len
        self.recovered: Dict[int, np.ndarray] = {}
        self.received_count = 0
        # pending id -> (residual indices, residual payload)
        self._pending: Dict[int, Tuple[Set[int], np.ndarray]] = {}
        self._by_block: Dict[int, Set[int]] = {}
        self._by_residual: Dict[frozenset, int] = {}
        self._next_id = 0

    @property
    def pending(self) -> List[Tuple[FountainSpec, np.ndarray]]:
        return [
            (FountainSpec(tuple(sorted(indices))), payload.copy())
            for indices, payload in self._pending.values()
        ]

    @property
    def overhead(self) -> int:
        """Packets received beyond b (epsilon once complete)."""
        return self.received_count - self.b

    def _drop_pending(self, pid: int) -> None:
        indices, _ = self._pending.pop(pid)
        self._by_residual.pop(frozenset(indices), None)
        for i in indices:
            self._by_block.get(i, set()).discard(pid)

    def _recover(self, index: int, value: np.ndarray, ripple: List[int]) -> None:
        known = self.recovered.get(index)
        if known is not None:
            if not np.array_equal(known, value):
                raise DecoderIntegrityError(f"block {index} decoded twice with different values")
            return
        value = value.copy()
        value.setflags(write=False)
        self.recovered[index] = value
        ripple.append(index)

    def _store(self, indices: Set[int], payload: np.ndarray, ripple: List[int]) -> None:
        if not indices:
            if payload.any():
                raise DecoderIntegrityError("packet is inconsistent with recovered blocks")
            return
        if len(indices) == 1:
            self._recover(next(iter(indices)), payload, ripple)
            return
        key = frozenset(indices)
        existing = self._by_residual.get(key)
        if existing is not None:
            if not np.array_equal(self._pending[existing][1], payload):
                raise DecoderIntegrityError(f"conflicting payloads for residual spec {sorted(indices)}")
            return
        pid = self._next_id
        self._next_id += 1
        self._pending[pid] = (indices, payload)
        self._by_residual[key] = pid
        for i in indices:
            self._by_block.setdefault(i, set()).add(pid)

    def ingest(self, spec: FountainSpec, payload: np.ndarray) -> int:
        """Add one computed packet; returns how many blocks became known.

        Raises:
            FieldDomainError: payload length or spec indices are wrong
            DecoderIntegrityError: packet conflicts with an earlier one
        """
        spec.check_bound(self.b)
        payload = np.asarray(payload, dtype=np.uint8).reshape(-1)
        if payload.shape[0] != self.block_len:
            raise FieldDomainError(f"payload length {payload.shape[0]} != block length {self.block_len}")
        self.received_count += 1

        residual = set()
        reduced = payload.copy()
        for i in spec.block_indices:
            known = self.recovered.get(i)
            if known is None:
                residual.add(i)
            else:
                reduced ^= known

        ripple: List[int] = []
        before = len(self.recovered)
        self._store(residual, reduced, ripple)

        # Peeling cascade
        while ripple:
            index = ripple.pop()
            value = self.recovered[index]
            for pid in list(self._by_block.pop(index, ())):
                if pid not in self._pending:
                    continue
                indices, residual_payload = self._pending[pid]
                self._drop_pending(pid)
                indices = set(indices)
                indices.discard(index)
                self._store(indices, residual_payload ^ value, ripple)

        gained = len(self.recovered) - before
        if gained:
            logger.debug(f"# PEEL | +{gained} blocks ({len(self.recovered)}/{self.b})")
        return gained

    def is_complete(self) -> bool:
        return len(self.recovered) == self.b

    def decoded(self) -> List[np.ndarray]:
        """Recovered blocks in index order."""
        if not self.is_complete():
            raise DecoderStateError(f"decoder holds {len(self.recovered)} of {self.b} blocks")
        return [self.recovered[i] for i in range(self.b)]


def is_complete(state: PeelingState) -> bool:
    return state.is_complete()


def decoded(state: PeelingState) -> List[np.ndarray]:
    return state.decoded()


def ingest(state: PeelingState, spec: FountainSpec, payload: np.ndarray) -> int:
    return state.ingest(spec, payload)


def nominal_overhead(b: int, fraction: float = 0.05) -> int:
    """The flat overhead charged in place of a measured one."""
    return int(math.ceil(fraction * b))


def measure_overhead(
    b: int,
    rng: np.random.Generator,
    dist: Optional[DegreeDistribution] = None,
    block_len: int = 1,
) -> int:
    """Stream random packets into a fresh decoder until complete; returns epsilon."""
    dist = dist or robust_soliton(b)
    blocks = [rng.integers(0, 256, size=block_len, dtype=np.uint8) for _ in range(b)]
    state = PeelingState(b, block_len)
    while not state.is_complete():
        spec = sample_spec(dist, rng)
        payload = np.zeros(block_len, dtype=np.uint8)
        for i in spec.block_indices:
            payload ^= blocks[i]
        state.ingest(spec, payload)
    return state.overhead

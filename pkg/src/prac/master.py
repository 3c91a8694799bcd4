"""
Master-side PRAC state machine.

Transport-agnostic: the simulator and the networked runtime both drive a
MasterState through `next_packet`, `record_send`, `on_result` and
`try_finish`, and ask `dispatch_time` when the next packet for a worker is
due. All mutations go through one owner.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.coding import fountain, keycode
from src.coding.fountain import DegreeDistribution, FountainSpec, PeelingState
from src.coding.gf256 import FieldMatrix, row_blocks
from src.coding.keycode import KeyGenerator, RoundKeys
from src.exceptions import FieldDomainError, ProtocolError, ProtocolStateError
from src.logging_config import log_prac_operation
from src.prac.packets import BetaEstimator, Packet, PacketKind, ResultMsg, observed_service_time

logger = logging.getLogger(__name__)


@dataclass
class MasterState:
    """Everything the master knows about one multiplication task."""

    n: int
    z: int
    b: int
    m: int
    block_shape: Tuple[int, int]
    generator: Optional[KeyGenerator]
    dist: DegreeDistribution
    decoder: PeelingState
    worker_round: List[int]
    round_rank: Dict[int, int] = field(default_factory=dict)
    round_keys: Dict[int, RoundKeys] = field(default_factory=dict)
    key_results: Dict[int, Dict[int, np.ndarray]] = field(default_factory=dict)
    secure_pending: Dict[int, List[Tuple[int, FountainSpec, np.ndarray]]] = field(default_factory=dict)
    outstanding: Dict[Tuple[int, int], Packet] = field(default_factory=dict)
    completed: Set[Tuple[int, int]] = field(default_factory=set)
    consumed_rounds: Set[int] = field(default_factory=set)
    beta: BetaEstimator = field(default_factory=BetaEstimator)
    sent_at: Dict[Tuple[int, int], float] = field(default_factory=dict)
    last_result_at: Dict[int, float] = field(default_factory=dict)
    packets_sent: int = 0
    stopped: bool = False
    result: Optional[FieldMatrix] = None

    @property
    def private(self) -> bool:
        return self.z > 0

    def keys_complete(self, t: int) -> bool:
        return len(self.key_results.get(t, ())) == self.z


def create_master_state(
    n: int,
    z: int,
    b: int,
    m: int,
    ell: int,
    generator: Optional[KeyGenerator] = None,
    dist: Optional[DegreeDistribution] = None,
) -> MasterState:
    """Fresh master for an m x ell task split into b blocks over n workers.

    z = 0 runs the non-private adaptive scheme (no keys, plain fountain
    packets).

    Raises:
        FieldDomainError: z >= n, or a supplied generator does not match (n, z)
    """
    if not 0 <= z < n:
        raise FieldDomainError(f"need 0 <= z < n, got n={n}, z={z}")
    if z > 0:
        generator = generator or keycode.build_generator(n, z)
        if (generator.n, generator.z) != (n, z):
            raise FieldDomainError(f"generator is ({generator.n}, {generator.z}), expected ({n}, {z})")
    else:
        generator = None
    block_rows = -(-m // b)
    return MasterState(
        n=n,
        z=z,
        b=b,
        m=m,
        block_shape=(block_rows, ell),
        generator=generator,
        dist=dist or fountain.robust_soliton(b),
        decoder=PeelingState(b, block_rows),
        worker_round=[1] * n,
    )


def split_blocks(state: MasterState, A: FieldMatrix) -> List[FieldMatrix]:
    """Row blocks of A as the master encodes them."""
    if A.rows != state.m or A.cols != state.block_shape[1]:
        raise FieldDomainError(f"A has shape {A.shape}, master expects ({state.m}, {state.block_shape[1]})")
    return row_blocks(A, state.b)


def next_packet(
    state: MasterState,
    worker: int,
    blocks: Sequence[FieldMatrix],
    rng: np.random.Generator,
    spec: Optional[FountainSpec] = None,
) -> Packet:
    """Build the next packet for `worker` at its current round.

    The worker's arrival rank j at round t picks the packet: j <= z gets
    the key R_{t,j}, any later arrival a fresh fountain packet padded with
    g_j R. A given `spec` replaces the sampled one (scripted traces).

    Raises:
        ProtocolStateError: master already stopped
    """
    if state.stopped:
        raise ProtocolStateError("master has stopped; no further packets")
    if not 0 <= worker < state.n:
        raise FieldDomainError(f"worker {worker} out of range 0..{state.n - 1}")

    t = state.worker_round[worker]
    j = state.round_rank.get(t, 0) + 1
    if j > state.n:
        raise ProtocolError(f"round {t} already has {state.n} packets")

    keys = None
    if state.private:
        keys = state.round_keys.get(t)
        if keys is None:
            keys = keycode.fresh_round_keys(t, state.block_shape, state.z, rng)
            state.round_keys[t] = keys
            logger.debug(f"Round {t} # KEY | {state.z} fresh keys")

    if j <= state.z:
        packet = Packet(
            worker=worker, round=t, slot=j, kind=PacketKind.KEY,
            payload=keys.keys[j - 1], key_index=j,
        )
    else:
        if spec is None:
            spec = fountain.sample_spec(state.dist, rng)
        spec.check_bound(state.b)
        payload = fountain.encode(blocks, spec)
        if keys is not None:
            payload = payload + keycode.encode_key_row(state.generator, j, keys)
        packet = Packet(
            worker=worker, round=t, slot=j, kind=PacketKind.SECURE,
            payload=payload, spec=spec, g_row=j,
        )

    state.round_rank[t] = j
    state.worker_round[worker] = t + 1
    state.outstanding[(worker, t)] = packet
    state.packets_sent += 1
    logger.debug(f"Worker {worker} # PACKET | round {t} slot {j} {packet.kind.value}")
    return packet


def record_send(state: MasterState, packet: Packet, at: float) -> None:
    """Note the send timestamp used for service-time estimation."""
    state.sent_at[(packet.worker, packet.round)] = at


def _unpad(state: MasterState, t: int, g_row: int, result: np.ndarray) -> np.ndarray:
    if not state.private:
        return result
    key_results = state.key_results[t]
    pad = keycode.combine_key_results(
        state.generator, g_row, [key_results[i] for i in range(1, state.z + 1)]
    )
    return result ^ pad


def _flush(state: MasterState, t: int) -> int:
    gained = 0
    for g_row, spec, result in state.secure_pending.pop(t, []):
        state.consumed_rounds.add(t)
        gained += state.decoder.ingest(spec, _unpad(state, t, g_row, result))
    return gained


def on_result(
    state: MasterState,
    msg: ResultMsg,
    arrived_at: Optional[float] = None,
    one_way: float = 0.0,
    return_way: Optional[float] = None,
) -> int:
    """Take one computed result; returns the number of blocks newly decoded.

    `one_way` and `return_way` are the packet and result link times used to
    turn arrival timestamps into a service-time sample.

    Secure results of round t wait until all z key results of round t are in.
    Duplicates are ignored.

    Raises:
        ProtocolError: the result matches no outstanding packet
        FieldDomainError: result length differs from the block height
    """
    key = (msg.worker, msg.round)
    if key in state.completed:
        logger.debug(f"Worker {msg.worker} # RESULT | duplicate for round {msg.round} ignored")
        return 0
    packet = state.outstanding.get(key)
    if packet is None or packet.slot != msg.slot:
        raise ProtocolError(
            f"no outstanding packet for worker {msg.worker} round {msg.round} slot {msg.slot}"
        )
    if msg.result.shape[0] != state.block_shape[0]:
        raise FieldDomainError(
            f"result length {msg.result.shape[0]} != block height {state.block_shape[0]}"
        )
    del state.outstanding[key]
    state.completed.add(key)

    if arrived_at is not None:
        sent_at = state.sent_at.pop(key, None)
        if sent_at is not None:
            sample = observed_service_time(
                sent_at, arrived_at, state.last_result_at.get(msg.worker), one_way, return_way
            )
            state.beta.observe(msg.worker, sample)
        state.last_result_at[msg.worker] = arrived_at

    if state.stopped:
        return 0

    t = msg.round
    if packet.is_key:
        state.key_results.setdefault(t, {})[packet.key_index] = msg.result
        if not state.keys_complete(t):
            return 0
        gained = _flush(state, t)
        if gained:
            logger.debug(f"Round {t} # GATE | keys complete, +{gained} blocks")
        return gained

    state.secure_pending.setdefault(t, []).append((packet.g_row, packet.spec, msg.result))
    if state.private and not state.keys_complete(t):
        return 0
    return _flush(state, t)


def try_finish(state: MasterState) -> Optional[FieldMatrix]:
    """Assemble Ax once every block is decoded; stops the master."""
    if state.result is not None:
        return state.result
    if not state.decoder.is_complete():
        return None
    stacked = np.concatenate(state.decoder.decoded())[: state.m]
    state.result = FieldMatrix.column(stacked)
    state.stopped = True
    log_prac_operation(
        logger,
        "decode_complete",
        round_index=max(state.consumed_rounds, default=0),
        details={
            "packets_sent": state.packets_sent,
            "received": state.decoder.received_count,
            "epsilon": state.decoder.overhead,
        },
    )
    return state.result


def dispatch_time(
    state: MasterState,
    worker: int,
    now: float,
    last_sent: Optional[float],
    last_result: Optional[float],
) -> float:
    """When the next packet for `worker` should go out.

    `last_sent` is the send time of the worker's latest packet and
    `last_result` the arrival of that packet's result (None while pending).
    Returns inf when the master must wait for the pending result.
    """
    if last_sent is None:
        return now
    beta = state.beta.mean(worker)
    if beta is None or beta <= 0.0:
        if last_result is None:
            return math.inf
        return max(now, last_result)
    due = last_sent + beta
    if last_result is not None:
        due = min(due, last_result)
    return max(now, due)

"""
In-process driver: runs the protocol with immediate computation.

Workers are picked in random order and results come back in random order,
so round gating is exercised without any timing model.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.coding.fountain import DegreeDistribution
from src.coding.gf256 import FieldMatrix
from src.coding.keycode import KeyGenerator
from src.exceptions import FieldDomainError
from src.prac import master as prac_master
from src.prac.master import MasterState
from src.prac.packets import Packet, ResultMsg, worker_compute

logger = logging.getLogger(__name__)


@dataclass
class LocalRun:
    """Outcome of an in-process run."""

    result: FieldMatrix
    state: MasterState
    sent: List[Packet] = field(default_factory=list)
    # (step, worker, round) in delivery order
    deliveries: List[Tuple[int, int, int]] = field(default_factory=list)
    decode_step: int = 0


def run_local(
    A: FieldMatrix,
    x: FieldMatrix,
    n: int,
    z: int,
    rng: np.random.Generator,
    b: Optional[int] = None,
    generator: Optional[KeyGenerator] = None,
    dist: Optional[DegreeDistribution] = None,
    deliver_probability: float = 0.5,
) -> LocalRun:
    """Run PRAC end to end in this process and keep the full trace.

    Each step either hands a fresh packet to a random idle worker or
    delivers a random in-flight result, with `deliver_probability` steering
    the mix.
    """
    if x.cols != 1 or x.rows != A.cols:
        raise FieldDomainError(f"x must be a column of length {A.cols}, got shape {x.shape}")
    b = b or A.rows
    state = prac_master.create_master_state(n, z, b, A.rows, A.cols, generator=generator, dist=dist)
    blocks = prac_master.split_blocks(state, A)
    run = LocalRun(result=FieldMatrix.zeros(A.rows, 1), state=state)

    busy = [False] * n
    inflight: List[Packet] = []
    step = 0
    while True:
        result = prac_master.try_finish(state)
        if result is not None:
            run.result = result
            run.decode_step = step
            return run
        step += 1
        idle = [w for w in range(n) if not busy[w]]
        if idle and (not inflight or rng.random() >= deliver_probability):
            worker = idle[int(rng.integers(len(idle)))]
            packet = prac_master.next_packet(state, worker, blocks, rng)
            busy[worker] = True
            inflight.append(packet)
            run.sent.append(packet)
            continue
        packet = inflight.pop(int(rng.integers(len(inflight))))
        busy[packet.worker] = False
        msg = ResultMsg(packet.worker, packet.round, packet.slot, worker_compute(packet.payload, x))
        prac_master.on_result(state, msg)
        run.deliveries.append((step, packet.worker, packet.round))


def run_in_process(
    A: FieldMatrix,
    x: FieldMatrix,
    n: int,
    z: int,
    rng: np.random.Generator,
    **kwargs,
) -> FieldMatrix:
    """Ax computed by an in-process PRAC run."""
    return run_local(A, x, n, z, rng, **kwargs).result


Runner = Callable[..., FieldMatrix]

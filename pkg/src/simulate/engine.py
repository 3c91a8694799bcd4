"""
Discrete-event simulation of adaptive coded computing.

The engine drives the real MasterState under sampled delays. Each worker
serves its packets in FIFO order; links deliver in order. PRAC, C3P and
GC3P differ only in z and in the set of active workers.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.coding.gf256 import FieldMatrix, mat_vec_mul
from src.exceptions import ConfigurationError
from src.prac import master as prac_master
from src.prac.packets import Packet, ResultMsg, worker_compute
from src.schemas import AdversaryRule, C3PWorkers, CompletionRecord, DelayModel, Scheme, SimConfig
from src.simulate.delays import (
    STREAM_ADVERSARY,
    STREAM_DATA,
    STREAM_PROTOCOL,
    DelaySampler,
    build_delay_model,
    packet_bits,
    result_bits,
    stream_rng,
    trial_seed,
)

logger = logging.getLogger(__name__)

# Same-time ordering: results before timers
PRIORITY_RESULT = 0
PRIORITY_DISPATCH = 1


@dataclass
class SimTrace:
    """Timestamps needed to replay the round-gating invariant."""

    z: int
    decode_time: float = math.inf
    consumed_rounds: Tuple[int, ...] = ()
    # round -> result arrival times at the master
    result_times: Dict[int, List[float]] = field(default_factory=dict)
    sends: List[Tuple[float, int, int]] = field(default_factory=list)

    def gate_time(self) -> float:
        """When the (z+1)-st result of the highest consumed round arrived."""
        if not self.consumed_rounds:
            return math.inf
        top = max(self.consumed_rounds)
        times = sorted(self.result_times.get(top, ()))
        if len(times) <= self.z:
            return math.inf
        return times[self.z]

    def respects_gate(self) -> bool:
        return self.decode_time >= self.gate_time()

    def sends_before_stop(self) -> bool:
        return all(at <= self.decode_time for at, _, _ in self.sends)


@dataclass
class SimOutcome:
    completion_time: float
    packets_sent: int
    epsilon: int
    correct: bool
    trace: SimTrace


@dataclass(order=True)
class _Event:
    time: float
    priority: int
    worker: int
    seq: int
    packet: Optional[Packet] = field(default=None, compare=False)
    token: int = field(default=0, compare=False)


class _WorkerLane:
    """Master-side view of one worker plus its FIFO service timeline."""

    def __init__(self, model_index: int):
        self.model_index = model_index
        self.last_sent: Optional[float] = None
        self.last_key: Optional[Tuple[int, int]] = None
        self.last_result: Optional[float] = None
        self.timer_token = 0
        self.link_free_at = 0.0
        self.free_at = 0.0


def select_workers(config: SimConfig, scheme: Scheme, model: DelayModel, rng: np.random.Generator) -> List[int]:
    """Model indices of the workers a scheme uses.

    GC3P drops z adversaries picked by the configured rule; C3P with the
    n_minus_z option keeps the first n - z workers.
    """
    n, z = config.n, config.z
    everyone = list(range(n))
    if scheme == Scheme.C3P:
        return everyone if config.c3p_workers == C3PWorkers.ALL else everyone[: n - z]
    if scheme != Scheme.GC3P:
        return everyone
    lambdas = np.asarray(model.lambdas)
    rule = config.adversary_rule
    if rule == AdversaryRule.FASTEST:
        adversaries = np.argsort(-lambdas, kind="stable")[:z]
    elif rule == AdversaryRule.SLOWEST:
        adversaries = np.argsort(lambdas, kind="stable")[:z]
    else:
        adversaries = rng.choice(n, size=z, replace=False)
    dropped = {int(i) for i in adversaries}
    return [w for w in everyone if w not in dropped]


def simulate_protocol(
    config: SimConfig,
    workers: Sequence[int],
    z: int,
    model: DelayModel,
    trial: int,
    salt: Optional[int] = None,
) -> SimOutcome:
    """Run one trial of the adaptive protocol on `workers` with collusion bound z."""
    n = len(workers)
    if not 0 <= z < n:
        raise ConfigurationError(f"need 0 <= z < active workers, got z={z}, workers={n}")
    seed = config.seed
    data_rng = stream_rng(seed, trial, STREAM_DATA)
    A = FieldMatrix.random(config.m, config.ell, data_rng)
    x = FieldMatrix.random(config.ell, 1, data_rng)
    protocol_rng = stream_rng(seed, trial, STREAM_PROTOCOL, salt=salt)
    delays = DelaySampler(model, config.b, seed, trial, salt=salt)

    state = prac_master.create_master_state(n, z, config.b, config.m, config.ell)
    blocks = prac_master.split_blocks(state, A)
    down_bits, up_bits = packet_bits(config), result_bits(config)
    lanes = [_WorkerLane(i) for i in workers]
    down_time = [delays.mean_transmission(lane.model_index, down_bits) for lane in lanes]
    up_time = [delays.mean_transmission(lane.model_index, up_bits) for lane in lanes]
    trace = SimTrace(z=z)

    heap: List[_Event] = []
    seq = itertools.count()

    def send(w: int, now: float) -> None:
        lane = lanes[w]
        packet = prac_master.next_packet(state, w, blocks, protocol_rng)
        prac_master.record_send(state, packet, now)
        trace.sends.append((now, w, packet.round))
        mi = lane.model_index
        arrival = max(now + delays.transmission(mi, down_bits), lane.link_free_at)
        lane.link_free_at = arrival
        finish = max(arrival, lane.free_at) + delays.service(mi)
        lane.free_at = finish
        back = finish + delays.transmission(mi, up_bits)
        heapq.heappush(heap, _Event(back, PRIORITY_RESULT, w, next(seq), packet=packet))
        lane.last_sent = now
        lane.last_key = (w, packet.round)
        lane.last_result = None
        plan(w, now)

    def plan(w: int, now: float) -> None:
        lane = lanes[w]
        due = prac_master.dispatch_time(state, w, now, lane.last_sent, lane.last_result)
        if math.isinf(due):
            return
        lane.timer_token += 1
        if due <= now and lane.last_result is not None:
            send(w, now)
            return
        heapq.heappush(heap, _Event(max(due, now), PRIORITY_DISPATCH, w, next(seq), token=lane.timer_token))

    for w in range(n):
        send(w, 0.0)

    now = 0.0
    while heap:
        event = heapq.heappop(heap)
        now = event.time
        lane = lanes[event.worker]
        if event.priority == PRIORITY_DISPATCH:
            if event.token == lane.timer_token and not state.stopped:
                send(event.worker, now)
            continue

        packet = event.packet
        trace.result_times.setdefault(packet.round, []).append(now)
        msg = ResultMsg(packet.worker, packet.round, packet.slot, worker_compute(packet.payload, x))
        prac_master.on_result(
            state, msg, arrived_at=now, one_way=down_time[event.worker], return_way=up_time[event.worker]
        )
        result = prac_master.try_finish(state)
        if result is not None:
            trace.decode_time = now
            trace.consumed_rounds = tuple(sorted(state.consumed_rounds))
            correct = result == mat_vec_mul(A, x)
            return SimOutcome(
                completion_time=now,
                packets_sent=state.packets_sent,
                epsilon=state.decoder.overhead,
                correct=bool(correct),
                trace=trace,
            )
        if lane.last_key == (packet.worker, packet.round):
            lane.last_result = now
            plan(event.worker, now)

    raise ConfigurationError("simulation ran out of events before decoding")


def _record(config: SimConfig, scheme: Scheme, trial: int, outcome: SimOutcome) -> CompletionRecord:
    return CompletionRecord(
        scheme=scheme,
        n=config.n,
        z=config.z,
        b=config.b,
        m=config.m,
        ell=config.ell,
        scenario=config.scenario,
        adversary_rule=config.adversary_rule,
        trial=trial,
        seed=trial_seed(config.seed, trial),
        completion_time_s=outcome.completion_time,
        packets_sent=outcome.packets_sent,
        epsilon_observed=outcome.epsilon,
    )


def run_adaptive(
    config: SimConfig,
    scheme: Scheme,
    trial: int = 0,
    salt: Optional[int] = None,
) -> Tuple[CompletionRecord, SimOutcome]:
    """PRAC, C3P or GC3P for one trial."""
    if scheme == Scheme.STAIRCASE:
        raise ConfigurationError("Staircase is not an adaptive scheme; use run_staircase")
    model = build_delay_model(config, trial, salt=salt)
    adversary_rng = stream_rng(config.seed, trial, STREAM_ADVERSARY, salt=salt)
    workers = select_workers(config, scheme, model, adversary_rng)
    z = config.z if scheme == Scheme.PRAC else 0
    outcome = simulate_protocol(config, workers, z, model, trial, salt=salt)
    logger.debug(
        f"# SIM | {scheme.value} trial {trial}: {outcome.completion_time:.4f}s, "
        f"{outcome.packets_sent} packets"
    )
    return _record(config, scheme, trial, outcome), outcome


def run_prac(config: SimConfig, trial: int = 0, salt: Optional[int] = None) -> CompletionRecord:
    return run_adaptive(config, Scheme.PRAC, trial, salt)[0]


def run_c3p(config: SimConfig, trial: int = 0, salt: Optional[int] = None) -> CompletionRecord:
    return run_adaptive(config, Scheme.C3P, trial, salt)[0]


def run_gc3p(config: SimConfig, trial: int = 0, salt: Optional[int] = None) -> CompletionRecord:
    return run_adaptive(config, Scheme.GC3P, trial, salt)[0]

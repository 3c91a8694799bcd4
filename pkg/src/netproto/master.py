"""
Networked master.

One reader task per worker connection feeds a single asyncio queue; the
coroutine consuming that queue is the only code that touches MasterState.
Dispatch timers are loop callbacks that post onto the same queue.
"""
from __future__ import annotations

import asyncio
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.coding.gf256 import FieldMatrix
from src.config import Settings, get_settings
from src.exceptions import NetTimeoutError, ProtocolError
from src.logging_config import log_prac_operation
from src.netproto import frames
from src.netproto.frames import Frame, MsgType, PacketWire
from src.netproto.transcript import RECV, SEND, Transcript
from src.prac import master as prac_master
from src.prac.hiding import check_groups, mask_vector
from src.prac.master import MasterState
from src.prac.packets import ResultMsg

logger = logging.getLogger(__name__)


@dataclass
class NetRunResult:
    result: FieldMatrix
    state: MasterState
    transcript: Transcript
    elapsed: float
    rtt: List[float] = field(default_factory=list)


@dataclass
class _Link:
    """Master-side view of one worker connection."""

    index: int
    endpoint: str
    reader: asyncio.StreamReader
    writer: asyncio.StreamWriter
    rtt: float = 0.0
    alive: bool = True
    frames_sent: int = 0
    hello_seq: int = 0
    hello_sent: Dict[int, float] = field(default_factory=dict)
    last_sent: Optional[float] = None
    last_key: Optional[Tuple[int, int]] = None
    last_result: Optional[float] = None
    timer_token: int = 0
    timer: Optional[asyncio.TimerHandle] = None

    @property
    def one_way(self) -> float:
        return self.rtt / 2.0


async def _connect(endpoint: str, settings: Settings) -> Tuple[asyncio.StreamReader, asyncio.StreamWriter]:
    host, port = frames.parse_endpoint(endpoint)
    last_error: Optional[Exception] = None
    for _ in range(max(settings.connect_retries, 1)):
        try:
            return await asyncio.open_connection(host, port)
        except OSError as exc:
            last_error = exc
            await asyncio.sleep(settings.connect_retry_delay_s)
    raise ProtocolError(f"cannot reach worker {endpoint}: {last_error}")


class NetMaster:
    """Drives one PRAC run over live worker connections."""

    def __init__(
        self,
        endpoints: Sequence[str],
        A: FieldMatrix,
        x: FieldMatrix,
        z: int,
        rng: np.random.Generator,
        b: Optional[int] = None,
        settings: Optional[Settings] = None,
        transcript: Optional[Transcript] = None,
        label: str = "master",
    ):
        self.endpoints = list(endpoints)
        self.A = A
        self.x = x
        self.z = z
        self.rng = rng
        self.settings = settings or get_settings()
        self.transcript = transcript or Transcript()
        self.label = label
        n = len(self.endpoints)
        if n < z + 1:
            raise ProtocolError(f"need at least z+1={z + 1} workers, got {n}")
        self.state = prac_master.create_master_state(n, z, b or A.rows, A.rows, A.cols)
        self.blocks = prac_master.split_blocks(self.state, A)
        self.links: List[_Link] = []
        self.events: "asyncio.Queue[tuple]" = asyncio.Queue()
        self.loop = asyncio.get_running_loop()
        self.t0 = self.loop.time()
        self._readers: List[asyncio.Task] = []

    def now(self) -> float:
        return self.loop.time() - self.t0

    # -- sending ----------------------------------------------------------
    async def _send(self, link: _Link, frame: Frame, round_: Optional[int] = None, slot: Optional[int] = None) -> None:
        if not link.alive:
            return
        self.transcript.record(self.now(), SEND, link.index, frame.msg_type, frame.payload, round_, slot)
        try:
            await frames.write_frame(link.writer, frame)
        except (ConnectionError, OSError) as exc:
            self._mark_dead(link, f"write failed: {exc}")
            return
        link.frames_sent += 1
        if frame.msg_type == MsgType.PACKET and link.frames_sent % self.settings.rtt_refresh_frames == 0:
            await self._send_hello(link)

    async def _send_hello(self, link: _Link) -> None:
        link.hello_seq += 1
        link.hello_sent[link.hello_seq] = self.now()
        await self._send(link, frames.hello(link.hello_seq))

    def _mark_dead(self, link: _Link, reason: str) -> None:
        if link.alive:
            link.alive = False
            if link.timer is not None:
                link.timer.cancel()
            logger.warning(f"Worker {link.index} # LINK | ✗ {reason}; treated as infinitely slow")

    async def _dispatch(self, link: _Link) -> None:
        if self.state.stopped or not link.alive:
            return
        now = self.now()
        packet = prac_master.next_packet(self.state, link.index, self.blocks, self.rng)
        prac_master.record_send(self.state, packet, now)
        link.last_sent = now
        link.last_key = (link.index, packet.round)
        link.last_result = None
        await self._send(link, frames.packet_frame(PacketWire.from_packet(packet)), packet.round, packet.slot)
        self._plan(link)

    def _plan(self, link: _Link) -> None:
        """Arm the dispatch timer, or dispatch now when the result is already in."""
        now = self.now()
        due = prac_master.dispatch_time(self.state, link.index, now, link.last_sent, link.last_result)
        link.timer_token += 1
        if link.timer is not None:
            link.timer.cancel()
            link.timer = None
        if math.isinf(due):
            return
        token = link.timer_token
        if due <= now and link.last_result is not None:
            self.events.put_nowait(("dispatch", link.index, token))
            return
        link.timer = self.loop.call_at(
            self.t0 + due, self.events.put_nowait, ("dispatch", link.index, token)
        )

    # -- receiving --------------------------------------------------------
    async def _read_loop(self, link: _Link) -> None:
        try:
            while True:
                frame = await frames.read_frame(link.reader)
                if frame is None:
                    self.events.put_nowait(("closed", link.index, "EOF"))
                    return
                self.events.put_nowait(("frame", link.index, frame, self.now()))
        except (ProtocolError, ConnectionError, OSError) as exc:
            self.events.put_nowait(("closed", link.index, str(exc)))

    def _on_hello(self, link: _Link, frame: Frame, at: float) -> None:
        seq = frames.hello_seq(frame)
        sent = link.hello_sent.pop(seq, None)
        if sent is None:
            raise ProtocolError(f"worker {link.index} echoed unknown HELLO {seq}")
        alpha = self.settings.rtt_smoothing
        link.rtt = (1 - alpha) * link.rtt + alpha * (at - sent)

    async def _on_frame(self, link: _Link, frame: Frame, at: float) -> bool:
        """Returns True once Ax is decoded."""
        if frame.msg_type == MsgType.ACK_RECEIPT:
            round_, slot = frames.read_ack(frame)
            self.transcript.record(at, RECV, link.index, frame.msg_type, frame.payload, round_, slot)
            return False
        if frame.msg_type == MsgType.HELLO:
            self.transcript.record(at, RECV, link.index, frame.msg_type, frame.payload)
            self._on_hello(link, frame, at)
            return False
        if frame.msg_type != MsgType.RESULT:
            raise ProtocolError(f"unexpected {frame.msg_type.name} frame from worker {link.index}")

        round_, slot, vector = frames.read_result(frame)
        self.transcript.record(at, RECV, link.index, frame.msg_type, frame.payload, round_, slot)
        msg = ResultMsg(link.index, round_, slot, vector)
        prac_master.on_result(self.state, msg, arrived_at=at, one_way=link.one_way)
        if prac_master.try_finish(self.state) is not None:
            return True
        if link.last_key == (link.index, round_):
            link.last_result = at
            self._plan(link)
        return False

    # -- lifecycle --------------------------------------------------------
    async def _open(self) -> None:
        for index, endpoint in enumerate(self.endpoints):
            reader, writer = await _connect(endpoint, self.settings)
            link = _Link(index, endpoint, reader, writer)
            self.links.append(link)
            sent = self.now()
            await frames.write_frame(writer, frames.hello(0))
            echo = await frames.read_frame(reader)
            if echo is None or echo.msg_type != MsgType.HELLO or frames.hello_seq(echo) != 0:
                raise ProtocolError(f"worker {endpoint} did not echo HELLO")
            link.rtt = self.now() - sent
            self.transcript.record(sent, SEND, index, MsgType.HELLO, echo.payload)
            self.transcript.record(self.now(), RECV, index, MsgType.HELLO, echo.payload)
            logger.info(f"Worker {index} # HELLO | {endpoint} rtt {link.rtt * 1000:.2f}ms")
        for link in self.links:
            await self._send(link, frames.vector_x(self.x))
        self._readers = [asyncio.create_task(self._read_loop(link)) for link in self.links]

    async def _drive(self) -> FieldMatrix:
        for link in self.links:
            await self._dispatch(link)
        while True:
            event = await self.events.get()
            kind, index = event[0], event[1]
            link = self.links[index]
            if kind == "dispatch":
                if event[2] == link.timer_token:
                    link.timer = None
                    await self._dispatch(link)
            elif kind == "closed":
                self._mark_dead(link, event[2])
                if not any(l.alive for l in self.links):
                    raise ProtocolError("every worker connection is gone")
            elif await self._on_frame(link, event[2], event[3]):
                return self.state.result

    async def _session(self) -> FieldMatrix:
        await self._open()
        return await self._drive()

    async def _shutdown(self) -> None:
        for link in self.links:
            if link.timer is not None:
                link.timer.cancel()
            if link.alive:
                await self._send(link, frames.stop())
        for task in self._readers:
            task.cancel()
        for link in self.links:
            link.writer.close()
        await asyncio.gather(*self._readers, return_exceptions=True)

    async def run(self, timeout: Optional[float] = None) -> NetRunResult:
        """Run to completion, broadcast STOP, return Ax.

        Raises:
            NetTimeoutError: not decoded within `timeout` seconds
            ProtocolError: connection or wire failures
        """
        timeout = self.settings.net_timeout_s if timeout is None else timeout
        try:
            result = await asyncio.wait_for(self._session(), timeout)
        except asyncio.TimeoutError:
            logger.error(f"{self.label} # TIMEOUT | ✗ not decoded after {timeout}s")
            raise NetTimeoutError(f"master did not decode within {timeout}s")
        finally:
            await self._shutdown()
        elapsed = self.now()
        log_prac_operation(
            logger,
            "net_run_complete",
            details={
                "label": self.label,
                "elapsed_s": elapsed,
                "packets_sent": self.state.packets_sent,
                "workers": len(self.links),
            },
        )
        return NetRunResult(
            result=result,
            state=self.state,
            transcript=self.transcript,
            elapsed=elapsed,
            rtt=[link.rtt for link in self.links],
        )


async def run_master(
    worker_endpoints: Sequence[str],
    A: FieldMatrix,
    x: FieldMatrix,
    z: int,
    rng: np.random.Generator,
    b: Optional[int] = None,
    timeout: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> NetRunResult:
    """Compute Ax on remote workers."""
    master = NetMaster(worker_endpoints, A, x, z, rng, b=b, settings=settings)
    return await master.run(timeout)


@dataclass
class HiddenRunResult:
    result: FieldMatrix
    masked: FieldMatrix
    groups: Tuple[NetRunResult, NetRunResult]


async def run_master_hidden(
    group1: Sequence[str],
    group2: Sequence[str],
    A: FieldMatrix,
    x: FieldMatrix,
    z1: int,
    z2: int,
    rng: np.random.Generator,
    b: Optional[int] = None,
    timeout: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> HiddenRunResult:
    """Two concurrent masters: group 1 gets x + u, group 2 gets u."""
    check_groups((len(group1), len(group2)), z1, z2)
    masked, u = mask_vector(x, rng)
    rng1, rng2 = (np.random.default_rng(int(s)) for s in rng.integers(0, 2**63, size=2))
    first = NetMaster(group1, A, masked, z1, rng1, b=b, settings=settings, label="group 1")
    second = NetMaster(group2, A, u, z2, rng2, b=b, settings=settings, label="group 2")
    out1, out2 = await asyncio.gather(first.run(timeout), second.run(timeout))
    return HiddenRunResult(result=out1.result - out2.result, masked=masked, groups=(out1, out2))

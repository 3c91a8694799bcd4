"""
Networked worker.

Serves one master connection: stores x, acknowledges every PACKET as soon as
it arrives, computes packets strictly in arrival order, optionally waits an
exponential artificial delay, and returns the RESULT. STOP discards any
in-flight work and ends the session.
"""
from __future__ import annotations

import asyncio
import logging
from typing import Optional

import numpy as np

from src.coding.gf256 import FieldMatrix
from src.exceptions import ProtocolError
from src.logging_config import log_prac_operation
from src.netproto import frames
from src.netproto.frames import MsgType, PacketWire
from src.prac.packets import worker_compute

logger = logging.getLogger(__name__)


class WorkerSession:
    """One master connection."""

    def __init__(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        delay_mean: float = 0.0,
        rng: Optional[np.random.Generator] = None,
        label: str = "worker",
    ):
        self.reader = reader
        self.writer = writer
        self.delay_mean = delay_mean
        self.rng = rng or np.random.default_rng()
        self.label = label
        self.x: Optional[FieldMatrix] = None
        self.queue: "asyncio.Queue[PacketWire]" = asyncio.Queue()
        self.delays: list = []
        self.computed = 0
        self._write_lock = asyncio.Lock()

    async def send(self, frame: frames.Frame) -> None:
        async with self._write_lock:
            await frames.write_frame(self.writer, frame)

    def sample_delay(self) -> float:
        if self.delay_mean <= 0:
            return 0.0
        return float(self.rng.exponential(self.delay_mean))

    async def _compute_loop(self) -> None:
        while True:
            wire = await self.queue.get()
            result = worker_compute(wire.payload, self.x)
            delay = self.sample_delay()
            self.delays.append(delay)
            if delay:
                await asyncio.sleep(delay)
            await self.send(frames.result_frame(wire.round, wire.slot, result))
            self.computed += 1
            logger.debug(f"{self.label} # RESULT | round {wire.round} slot {wire.slot} after {delay:.3f}s")

    async def run(self) -> None:
        """Process frames until STOP or EOF.

        Raises:
            ProtocolError: malformed frame, unexpected type, or PACKET before VECTOR_X
        """
        compute = asyncio.create_task(self._compute_loop())
        try:
            while True:
                if compute.done():
                    compute.result()
                frame = await frames.read_frame(self.reader)
                if frame is None:
                    logger.warning(f"{self.label} # CLOSE | master closed the connection")
                    return
                if frame.msg_type == MsgType.HELLO:
                    await self.send(frame)
                elif frame.msg_type == MsgType.VECTOR_X:
                    self.x = frames.read_vector(frame)
                elif frame.msg_type == MsgType.PACKET:
                    if self.x is None:
                        raise ProtocolError("PACKET received before VECTOR_X")
                    wire = PacketWire.decode(frame.payload)
                    if wire.payload.cols != self.x.rows:
                        raise ProtocolError(
                            f"packet has {wire.payload.cols} columns, x has {self.x.rows} rows"
                        )
                    await self.send(frames.ack_receipt(wire.round, wire.slot))
                    self.queue.put_nowait(wire)
                elif frame.msg_type == MsgType.STOP:
                    log_prac_operation(
                        logger,
                        "worker_stop",
                        details={"label": self.label, "computed": self.computed, "queued": self.queue.qsize()},
                    )
                    return
                else:
                    raise ProtocolError(f"unexpected {frame.msg_type.name} frame at worker")
        finally:
            compute.cancel()
            try:
                await compute
            except (asyncio.CancelledError, Exception):
                pass
            self.writer.close()


class WorkerServer:
    """Listens on an endpoint and serves exactly one master session."""

    def __init__(self, host: str, port: int, delay_mean: float = 0.0, seed: Optional[int] = None):
        self.host = host
        self.port = port
        self.delay_mean = delay_mean
        self.rng = np.random.default_rng(seed)
        self.session: Optional[WorkerSession] = None
        self._server: Optional[asyncio.AbstractServer] = None
        self._done: Optional[asyncio.Future] = None

    async def start(self) -> int:
        """Bind and return the actual port (useful with port 0)."""
        self._done = asyncio.get_running_loop().create_future()
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]
        logger.info(f"Worker {self.host}:{self.port} # LISTEN | delay mean {self.delay_mean}s")
        return self.port

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        if self.session is not None:
            logger.warning(f"Worker {self.port} # CONNECT | ✗ second master rejected")
            writer.close()
            return
        self.session = WorkerSession(reader, writer, self.delay_mean, self.rng, label=f"Worker {self.port}")
        try:
            await self.session.run()
        except ProtocolError as exc:
            logger.error(f"Worker {self.port} # PROTOCOL | ✗ {exc}")
            if not self._done.done():
                self._done.set_exception(exc)
            return
        except Exception as exc:
            logger.error(f"Worker {self.port} # ERROR | ✗ {exc}")
            if not self._done.done():
                self._done.set_exception(exc)
            return
        if not self._done.done():
            self._done.set_result(None)

    async def wait_closed(self) -> None:
        """Wait for the session to end, then stop listening."""
        try:
            await self._done
        finally:
            self._server.close()
            await self._server.wait_closed()


async def run_worker(
    listen: str,
    delay_mean: float = 0.0,
    seed: Optional[int] = None,
) -> WorkerServer:
    """Serve one master on `listen` (host:port) until STOP."""
    host, port = frames.parse_endpoint(listen)
    server = WorkerServer(host, port, delay_mean=delay_mean, seed=seed)
    await server.start()
    await server.wait_closed()
    return server

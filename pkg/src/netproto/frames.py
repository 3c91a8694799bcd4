"""
Wire format.

Every frame is a 4-byte big-endian payload length, a 1-byte message type
and the payload. Integers are big-endian throughout; matrices use the
FieldMatrix serialization (rows, cols, row-major bytes).
"""
from __future__ import annotations

import asyncio
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np

from src.coding.fountain import FountainSpec
from src.coding.gf256 import FieldMatrix
from src.coding.utils import U32, read_struct
from src.exceptions import FieldDomainError, ProtocolError
from src.prac.packets import Packet, PacketKind

HEADER = struct.Struct(">IB")
ROUND_SLOT = struct.Struct(">IB")
PACKET_HEAD = struct.Struct(">IBBB")
MAX_PAYLOAD = 64 * 1024 * 1024


class MsgType(IntEnum):
    HELLO = 0x01
    VECTOR_X = 0x02
    PACKET = 0x03
    ACK_RECEIPT = 0x04
    RESULT = 0x05
    STOP = 0x06


WIRE_KIND = {PacketKind.KEY: 0, PacketKind.SECURE: 1}


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    payload: bytes = b""

    def encode(self) -> bytes:
        return HEADER.pack(len(self.payload), int(self.msg_type)) + self.payload

    @classmethod
    def decode(cls, buf: bytes) -> "Frame":
        """Exactly one frame; trailing bytes are an error."""
        frame, end = cls.read_from(buf, 0)
        if end != len(buf):
            raise ProtocolError(f"{len(buf) - end} trailing bytes after frame")
        return frame

    @classmethod
    def read_from(cls, buf: bytes, offset: int = 0) -> Tuple["Frame", int]:
        if len(buf) - offset < HEADER.size:
            raise ProtocolError("truncated frame header")
        length, raw_type = HEADER.unpack_from(buf, offset)
        start = offset + HEADER.size
        if len(buf) - start < length:
            raise ProtocolError(f"truncated frame payload: need {length}, have {len(buf) - start}")
        return cls(_msg_type(raw_type), bytes(buf[start:start + length])), start + length


def _msg_type(raw: int) -> MsgType:
    try:
        return MsgType(raw)
    except ValueError:
        raise ProtocolError(f"unknown message type 0x{raw:02x}")


@dataclass(frozen=True)
class PacketWire:
    """A packet as the worker sees it."""

    round: int
    slot: int
    kind: PacketKind
    index: int
    payload: FieldMatrix
    spec: Optional[FountainSpec] = None

    @classmethod
    def from_packet(cls, packet: Packet) -> "PacketWire":
        index = packet.key_index if packet.is_key else packet.g_row
        return cls(packet.round, packet.slot, packet.kind, index, packet.payload, packet.spec)

    def encode(self) -> bytes:
        head = PACKET_HEAD.pack(self.round, self.slot, WIRE_KIND[self.kind], self.index)
        spec = self.spec.to_bytes() if self.kind is PacketKind.SECURE else b""
        return head + spec + self.payload.to_bytes()

    @classmethod
    def decode(cls, buf: bytes) -> "PacketWire":
        try:
            (round_, slot, raw_kind, index), offset = read_struct(PACKET_HEAD, buf, 0)
            if raw_kind not in (0, 1):
                raise ProtocolError(f"unknown packet kind {raw_kind}")
            kind = PacketKind.KEY if raw_kind == 0 else PacketKind.SECURE
            spec = None
            if kind is PacketKind.SECURE:
                spec, offset = FountainSpec.read_from(buf, offset)
            payload, offset = FieldMatrix.read_from(buf, offset)
        except FieldDomainError as exc:
            raise ProtocolError(f"malformed packet: {exc}") from exc
        if offset != len(buf):
            raise ProtocolError(f"{len(buf) - offset} trailing bytes after packet")
        return cls(round_, slot, kind, index, payload, spec)


# -- payload codecs ---------------------------------------------------------

def hello(seq: int) -> Frame:
    return Frame(MsgType.HELLO, U32.pack(seq))


def hello_seq(frame: Frame) -> int:
    try:
        value, end = read_struct(U32, frame.payload, 0)
    except FieldDomainError as exc:
        raise ProtocolError(f"malformed HELLO: {exc}") from exc
    if end != len(frame.payload):
        raise ProtocolError("malformed HELLO: trailing bytes")
    return value[0]


def vector_x(x: FieldMatrix) -> Frame:
    return Frame(MsgType.VECTOR_X, x.to_bytes())


def read_vector(frame: Frame) -> FieldMatrix:
    try:
        x = FieldMatrix.from_bytes(frame.payload)
    except FieldDomainError as exc:
        raise ProtocolError(f"malformed VECTOR_X: {exc}") from exc
    if x.cols != 1:
        raise ProtocolError(f"VECTOR_X must carry one column, got {x.cols}")
    return x


def packet_frame(wire: PacketWire) -> Frame:
    return Frame(MsgType.PACKET, wire.encode())


def ack_receipt(round_: int, slot: int) -> Frame:
    return Frame(MsgType.ACK_RECEIPT, ROUND_SLOT.pack(round_, slot))


def read_ack(frame: Frame) -> Tuple[int, int]:
    if len(frame.payload) != ROUND_SLOT.size:
        raise ProtocolError(f"ACK_RECEIPT payload must be {ROUND_SLOT.size} bytes")
    return ROUND_SLOT.unpack(frame.payload)


def result_frame(round_: int, slot: int, result: np.ndarray) -> Frame:
    body = FieldMatrix.column(np.asarray(result, dtype=np.uint8)).to_bytes()
    return Frame(MsgType.RESULT, ROUND_SLOT.pack(round_, slot) + body)


def read_result(frame: Frame) -> Tuple[int, int, np.ndarray]:
    try:
        (round_, slot), offset = read_struct(ROUND_SLOT, frame.payload, 0)
        matrix, offset = FieldMatrix.read_from(frame.payload, offset)
    except FieldDomainError as exc:
        raise ProtocolError(f"malformed RESULT: {exc}") from exc
    if offset != len(frame.payload) or matrix.cols != 1:
        raise ProtocolError("malformed RESULT: expected one column and no trailing bytes")
    return round_, slot, matrix.vector().copy()


def stop() -> Frame:
    return Frame(MsgType.STOP)


# -- stream I/O -------------------------------------------------------------

async def read_frame(reader: asyncio.StreamReader) -> Optional[Frame]:
    """Next frame, or None on a clean EOF at a frame boundary."""
    try:
        header = await reader.readexactly(HEADER.size)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise ProtocolError("connection closed inside a frame header") from exc
    length, raw_type = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"frame payload of {length} bytes exceeds {MAX_PAYLOAD}")
    msg_type = _msg_type(raw_type)
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise ProtocolError("connection closed inside a frame payload") from exc
    return Frame(msg_type, payload)


async def write_frame(writer: asyncio.StreamWriter, frame: Frame) -> None:
    writer.write(frame.encode())
    await writer.drain()


def parse_endpoint(endpoint: str) -> Tuple[str, int]:
    """`host:port` -> (host, port)."""
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ProtocolError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)

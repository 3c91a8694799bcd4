import struct
from typing import Tuple

from src.exceptions import FieldDomainError

U16 = struct.Struct(">H")
U32 = struct.Struct(">I")


def read_struct(fmt: struct.Struct, buf: bytes, offset: int) -> Tuple[tuple, int]:
    """Unpack `fmt` at `offset`; returns the values and the next offset."""
    end = offset + fmt.size
    if end > len(buf):
        raise FieldDomainError(f"buffer too short: need {end} bytes, have {len(buf)}")
    return fmt.unpack_from(buf, offset), end


def read_bytes(buf: bytes, offset: int, size: int) -> Tuple[bytes, int]:
    """Slice exactly `size` bytes starting at `offset`."""
    end = offset + size
    if end > len(buf):
        raise FieldDomainError(f"buffer too short: need {end} bytes, have {len(buf)}")
    return bytes(buf[offset:end]), end

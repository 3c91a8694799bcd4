"""
GF(2^8) arithmetic and dense linear algebra.

Elements are bytes under the AES reduction polynomial x^8+x^4+x^3+x+1 (0x11B).
Addition is XOR. Multiplication goes through log/antilog tables that are
built once at import time from the bit-serial reference `mul_reference`;
a 256x256 product table derived from them lets numpy multiply whole
arrays by fancy indexing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from src.coding.utils import U32, read_bytes, read_struct
from src.exceptions import FieldDomainError, SingularMatrixError

logger = logging.getLogger(__name__)

FieldElement = int

POLYNOMIAL = 0x11B
# 0x02 is not primitive for 0x11B; 0x03 generates the multiplicative group
GENERATOR = 0x03
ORDER = 256


def mul_reference(a: int, b: int) -> int:
    """Bit-serial carry-less multiply-and-reduce. Kept as the table oracle."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        if a & 0x100:
            a ^= POLYNOMIAL
        b >>= 1
    return result


def _build_tables() -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(ORDER, dtype=np.int16)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = mul_reference(x, GENERATOR)
    exp[255:510] = exp[0:255]

    product = exp[log[:, None] + log[None, :]]
    product[0, :] = 0
    product[:, 0] = 0

    inverse = np.zeros(ORDER, dtype=np.uint8)
    inverse[1:] = exp[255 - log[1:]]

    for table in (exp, log, product, inverse):
        table.setflags(write=False)
    return exp, log, product, inverse


EXP_TABLE, LOG_TABLE, MUL_TABLE, INV_TABLE = _build_tables()


def _check_element(a: int) -> int:
    if not 0 <= int(a) < ORDER:
        raise FieldDomainError(f"{a!r} is not a GF(256) element")
    return int(a)


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    """Field addition (XOR)."""
    return _check_element(a) ^ _check_element(b)


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Field multiplication through the product table."""
    return int(MUL_TABLE[_check_element(a), _check_element(b)])


def inv(a: FieldElement) -> FieldElement:
    """Multiplicative inverse; zero has none."""
    if _check_element(a) == 0:
        raise FieldDomainError("0 has no multiplicative inverse in GF(256)")
    return int(INV_TABLE[a])


def power(a: FieldElement, exponent: int) -> FieldElement:
    if exponent < 0:
        return power(inv(a), -exponent)
    if _check_element(a) == 0:
        return 0 if exponent else 1
    return int(EXP_TABLE[(int(LOG_TABLE[a]) * exponent) % 255])


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """Dense row-major matrix over GF(2^8), immutable once built."""

    data: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.data)
        if raw.ndim != 2:
            raise FieldDomainError(f"FieldMatrix needs a 2-D array, got {raw.ndim}-D")
        if raw.dtype != np.uint8:
            if raw.size and (raw.min() < 0 or raw.max() >= ORDER):
                raise FieldDomainError("matrix entries must be bytes (0..255)")
            raw = raw.astype(np.uint8)
        arr = np.array(raw, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int) -> "FieldMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, size: int) -> "FieldMatrix":
        return cls(np.eye(size, dtype=np.uint8))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "FieldMatrix":
        """Uniform matrix over GF(256) drawn from `rng`."""
        return cls(rng.integers(0, ORDER, size=(rows, cols), dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "FieldMatrix":
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), -1))

    @classmethod
    def column(cls, values: Iterable[int] | np.ndarray) -> "FieldMatrix":
        """One-column matrix, the carrier for vectors such as x."""
        if not isinstance(values, np.ndarray):
            values = np.array(list(values), dtype=np.int64)
        return cls(values.reshape(-1, 1))

    # -- shape --------------------------------------------------------
    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def vector(self) -> np.ndarray:
        """The single column as a 1-D array."""
        if self.cols != 1:
            raise FieldDomainError(f"expected a column vector, got shape {self.shape}")
        return self.data[:, 0]

    def row_slice(self, start: int, stop: int) -> "FieldMatrix":
        return FieldMatrix(self.data[start:stop])

    # -- arithmetic ---------------------------------------------------
    def _conform(self, other: "FieldMatrix") -> None:
        if self.shape != other.shape:
            raise FieldDomainError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._conform(other)
        return FieldMatrix(np.bitwise_xor(self.data, other.data))

    __sub__ = __add__

    def scale(self, c: FieldElement) -> "FieldMatrix":
        return FieldMatrix(MUL_TABLE[_check_element(c)][self.data])

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        return mat_mul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self) -> int:
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"FieldMatrix({self.rows}x{self.cols})"

    def is_zero(self) -> bool:
        return not self.data.any()

    # -- serialization ------------------------------------------------
    def to_bytes(self) -> bytes:
        """rows and cols as 4-byte big-endian, then row-major raw bytes."""
        return U32.pack(self.rows) + U32.pack(self.cols) + self.data.tobytes()

    @classmethod
    def read_from(cls, buf: bytes, offset: int = 0) -> Tuple["FieldMatrix", int]:
        (rows,), offset = read_struct(U32, buf, offset)
        (cols,), offset = read_struct(U32, buf, offset)
        body, offset = read_bytes(buf, offset, rows * cols)
        arr = np.frombuffer(body, dtype=np.uint8).reshape(rows, cols)
        return cls(arr), offset

    @classmethod
    def from_bytes(cls, buf: bytes) -> "FieldMatrix":
        matrix, end = cls.read_from(buf, 0)
        if end != len(buf):
            raise FieldDomainError(f"{len(buf) - end} trailing bytes after matrix")
        return matrix


def mat_vec_mul(matrix: FieldMatrix, vector: FieldMatrix) -> FieldMatrix:
    """Matrix-vector product over GF(256); `vector` is a one-column matrix."""
    if vector.cols != 1:
        raise FieldDomainError(f"vector must have one column, got {vector.cols}")
    if matrix.cols != vector.rows:
        raise FieldDomainError(
            f"cannot multiply {matrix.shape} by vector of length {vector.rows}"
        )
    if matrix.cols == 0:
        return FieldMatrix.zeros(matrix.rows, 1)
    products = MUL_TABLE[matrix.data, vector.data[:, 0][None, :]]
    return FieldMatrix(np.bitwise_xor.reduce(products, axis=1).reshape(-1, 1))


def mat_mul(left: FieldMatrix, right: FieldMatrix) -> FieldMatrix:
    """General matrix product over GF(256)."""
    if left.cols != right.rows:
        raise FieldDomainError(f"cannot multiply {left.shape} by {right.shape}")
    out = np.zeros((left.rows, right.cols), dtype=np.uint8)
    for k in range(left.cols):
        out ^= MUL_TABLE[left.data[:, k][:, None], right.data[k][None, :]]
    return FieldMatrix(out)


def _eliminate(work: np.ndarray, pivot_cols: int) -> Tuple[np.ndarray, List[int]]:
    """Gauss-Jordan in place over the first `pivot_cols` columns.

    First-nonzero pivot selection; returns the array and the pivot columns.
    """
    rows = work.shape[0]
    pivots: List[int] = []
    r = 0
    for col in range(pivot_cols):
        if r == rows:
            break
        nonzero = np.nonzero(work[r:, col])[0]
        if nonzero.size == 0:
            continue
        p = r + int(nonzero[0])
        if p != r:
            work[[r, p]] = work[[p, r]]
        work[r] = MUL_TABLE[INV_TABLE[work[r, col]]][work[r]]
        factors = work[:, col].copy()
        factors[r] = 0
        targets = np.nonzero(factors)[0]
        if targets.size:
            work[targets] ^= MUL_TABLE[factors[targets][:, None], work[r][None, :]]
        pivots.append(col)
        r += 1
    return work, pivots


def invert(matrix: FieldMatrix) -> FieldMatrix:
    """Inverse via Gauss-Jordan elimination.

    Raises:
        FieldDomainError: matrix is not square
        SingularMatrixError: no pivot exists for some column (carries the index)
    """
    if matrix.rows != matrix.cols:
        raise FieldDomainError(f"only square matrices are invertible, got {matrix.shape}")
    size = matrix.rows
    work = np.concatenate([matrix.data, np.eye(size, dtype=np.uint8)], axis=1)
    work, pivots = _eliminate(work, size)
    if len(pivots) < size:
        missing = next(col for col in range(size) if col not in pivots)
        raise SingularMatrixError(column=missing)
    return FieldMatrix(work[:, size:])


def rank(matrix: FieldMatrix) -> int:
    """Rank over GF(256); equals the GF(2) rank for 0/1 matrices."""
    _, pivots = _eliminate(matrix.data.copy(), matrix.cols)
    return len(pivots)


def is_invertible(matrix: FieldMatrix) -> bool:
    return matrix.rows == matrix.cols and rank(matrix) == matrix.rows


def vstack(matrices: Sequence[FieldMatrix]) -> FieldMatrix:
    return FieldMatrix(np.concatenate([m.data for m in matrices], axis=0))


def row_blocks(matrix: FieldMatrix, b: int) -> List[FieldMatrix]:
    """Split into `b` equal row blocks, padding with all-zero rows when needed."""
    if b < 1:
        raise FieldDomainError(f"block count must be positive, got {b}")
    block_rows = -(-matrix.rows // b)
    padded_rows = block_rows * b
    data = matrix.data
    if padded_rows != matrix.rows:
        pad = np.zeros((padded_rows - matrix.rows, matrix.cols), dtype=np.uint8)
        data = np.concatenate([data, pad], axis=0)
        logger.debug(f"# BLOCKS | padded {matrix.rows} rows to {padded_rows} for b={b}")
    return [FieldMatrix(data[i * block_rows:(i + 1) * block_rows]) for i in range(b)]

"""
Per-round random keys and their (n, z) systematic MDS encoding.

The generator G is a Vandermonde matrix on the points 1..n, right-multiplied
by the inverse of its top z x z block. Rows 1..z are then identity rows and
every z x z submatrix stays invertible, so any z packets of one round
determine the round's keys once A is known.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from src.coding import gf256
from src.coding.gf256 import FieldMatrix, MUL_TABLE
from src.exceptions import FieldDomainError

logger = logging.getLogger(__name__)

MAX_WORKERS = 255


@dataclass(frozen=True)
class KeyGenerator:
    """Systematic (n, z) generator matrix G (n x z)."""

    G: FieldMatrix
    n: int
    z: int

    def __post_init__(self):
        if self.G.shape != (self.n, self.z):
            raise FieldDomainError(f"generator shape {self.G.shape} != ({self.n}, {self.z})")
        if not 0 < self.z < self.n <= MAX_WORKERS:
            raise FieldDomainError(f"need 0 < z < n <= {MAX_WORKERS}, got n={self.n}, z={self.z}")
        if self.G.row_slice(0, self.z) != FieldMatrix.identity(self.z):
            raise FieldDomainError("generator is not systematic: top block is not the identity")

    @classmethod
    def from_matrix(cls, G: FieldMatrix) -> "KeyGenerator":
        """Wrap an explicit systematic generator (the MDS property is audited separately)."""
        return cls(G=G, n=G.rows, z=G.cols)

    def row(self, j: int) -> np.ndarray:
        """Coefficients g_j, 1-based as in slot numbering."""
        if not 1 <= j <= self.n:
            raise FieldDomainError(f"generator row {j} out of range 1..{self.n}")
        return self.G.data[j - 1]


@dataclass(frozen=True)
class RoundKeys:
    """The z fresh key matrices R_{t,1..z} of round t."""

    round: int
    keys: Tuple[FieldMatrix, ...]

    @property
    def z(self) -> int:
        return len(self.keys)


def vandermonde(n: int, z: int) -> FieldMatrix:
    """n x z Vandermonde matrix on evaluation points 1..n."""
    return FieldMatrix.from_rows(
        [[gf256.power(point, k) for k in range(z)] for point in range(1, n + 1)]
    )


def build_generator(n: int, z: int) -> KeyGenerator:
    """Systematic (n, z) Reed-Solomon style generator.

    Raises:
        FieldDomainError: unless 0 < z < n <= 255
    """
    if not 0 < z < n <= MAX_WORKERS:
        raise FieldDomainError(f"need 0 < z < n <= {MAX_WORKERS}, got n={n}, z={z}")
    V = vandermonde(n, z)
    G = V @ gf256.invert(V.row_slice(0, z))
    logger.debug(f"# KEYS | built systematic ({n}, {z}) generator")
    return KeyGenerator(G=G, n=n, z=z)


def fresh_round_keys(
    t: int,
    dims: Tuple[int, int],
    z: int,
    rng: np.random.Generator,
) -> RoundKeys:
    """Draw z independent uniform key matrices for round t."""
    rows, cols = dims
    if rows < 1 or cols < 1:
        raise FieldDomainError(f"key dimensions must be positive, got {dims}")
    return RoundKeys(round=t, keys=tuple(FieldMatrix.random(rows, cols, rng) for _ in range(z)))


def _combine(coefficients: np.ndarray, parts: Sequence[np.ndarray]) -> np.ndarray:
    acc = np.zeros_like(parts[0])
    for coefficient, part in zip(coefficients, parts):
        if coefficient:
            acc ^= MUL_TABLE[coefficient][part]
    return acc


def encode_key_row(gen: KeyGenerator, j: int, keys: RoundKeys) -> FieldMatrix:
    """The coded key g_j R = sum_i G[j, i] R_{t,i}."""
    if keys.z != gen.z:
        raise FieldDomainError(f"round has {keys.z} keys, generator expects {gen.z}")
    return FieldMatrix(_combine(gen.row(j), [k.data for k in keys.keys]))


def combine_key_results(gen: KeyGenerator, j: int, key_results: Sequence[np.ndarray]) -> np.ndarray:
    """(g_j R) x rebuilt from the z returned products R_{t,i} x."""
    if len(key_results) != gen.z:
        raise FieldDomainError(f"expected {gen.z} key results, got {len(key_results)}")
    parts = [np.asarray(r, dtype=np.uint8).reshape(-1) for r in key_results]
    if len({p.shape[0] for p in parts}) != 1:
        raise FieldDomainError("key results differ in length")
    return _combine(gen.row(j), parts)


def iter_row_subsets(n: int, z: int) -> Iterator[Tuple[int, ...]]:
    """All z-subsets of 1-based row indices."""
    return itertools.combinations(range(1, n + 1), z)


def singular_subsets(G: FieldMatrix, z: int | None = None) -> List[Tuple[int, ...]]:
    """Row subsets of size z whose stacked submatrix is singular.

    Empty result means G has the MDS property.
    """
    z = G.cols if z is None else z
    failures = []
    for subset in iter_row_subsets(G.rows, z):
        sub = FieldMatrix(G.data[[i - 1 for i in subset]])
        if not gf256.is_invertible(sub):
            failures.append(subset)
    return failures


# The (4, 2) generator printed in the protocol walkthrough; 2 is the byte 0x02.
EXAMPLE_GENERATOR_4_2 = FieldMatrix.from_rows([[1, 0], [0, 1], [1, 1], [1, 2]])

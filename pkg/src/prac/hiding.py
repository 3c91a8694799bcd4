"""
Two-group vector hiding.

Group 1 computes A(x + u), group 2 computes Au for a fresh uniform u; the
master subtracts. Neither group ever sees x unmasked.
"""
from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from src.coding.gf256 import FieldMatrix
from src.exceptions import FieldDomainError
from src.prac.local import Runner, run_in_process

logger = logging.getLogger(__name__)


def check_groups(group_sizes: Tuple[int, int], z1: int, z2: int) -> None:
    """Each group must be able to run PRAC on its own.

    Raises:
        FieldDomainError: a group has no more workers than its collusion bound
    """
    n1, n2 = group_sizes
    if not 0 < z1 < n1:
        raise FieldDomainError(f"group 1 needs 0 < z1 < n1, got z1={z1}, n1={n1}")
    if not 0 < z2 < n2:
        raise FieldDomainError(f"group 2 needs 0 < z2 < n2, got z2={z2}, n2={n2}")


def mask_vector(x: FieldMatrix, rng: np.random.Generator) -> Tuple[FieldMatrix, FieldMatrix]:
    """(x + u, u) for a fresh uniform u."""
    u = FieldMatrix.random(x.rows, 1, rng)
    return x + u, u


def hide_x_run(
    A: FieldMatrix,
    x: FieldMatrix,
    group_sizes: Tuple[int, int],
    z1: int,
    z2: int,
    rng: np.random.Generator,
    runner: Runner = run_in_process,
    **kwargs,
) -> FieldMatrix:
    """Ax computed without revealing x to either worker group."""
    check_groups(group_sizes, z1, z2)
    masked, u = mask_vector(x, rng)
    n1, n2 = group_sizes
    first = runner(A, masked, n1, z1, rng, **kwargs)
    second = runner(A, u, n2, z2, rng, **kwargs)
    logger.info(f"# HIDE | groups ({n1}, {n2}) finished")
    return first - second

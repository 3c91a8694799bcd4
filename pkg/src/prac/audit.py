"""
Structural privacy audits.

For every round, any z packets must determine the round's keys once A is
known: the rows of G at the round's slots must form an invertible z x z
matrix for every z-subset of slots. The audit also recovers the keys from
such subsets and checks that padded packets look uniform.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from src.coding import fountain, gf256, keycode
from src.coding.gf256 import FieldMatrix
from src.coding.keycode import KeyGenerator
from src.exceptions import AuditFailure, FieldDomainError
from src.prac import master as prac_master
from src.prac.packets import Packet

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_N = 20


@dataclass
class AuditReport:
    n: int
    z: int
    rounds: int
    subsets_checked: int = 0
    keys_recovered: int = 0
    singular: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list)
    repeated_keys: int = 0
    pad_pvalue: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.singular and self.repeated_keys == 0


def _dispatch_rounds(
    n: int,
    z: int,
    rounds: int,
    generator: KeyGenerator,
    rng: np.random.Generator,
) -> Tuple[prac_master.MasterState, FieldMatrix, Dict[int, List[Packet]]]:
    """Fill `rounds` complete rounds, one packet per worker per round."""
    A = FieldMatrix.random(4, 3, rng)
    state = prac_master.create_master_state(n, z, b=2, m=A.rows, ell=A.cols, generator=generator)
    blocks = prac_master.split_blocks(state, A)
    by_round: Dict[int, List[Packet]] = {}
    for _ in range(rounds):
        for worker in rng.permutation(n):
            packet = prac_master.next_packet(state, int(worker), blocks, rng)
            by_round.setdefault(packet.round, []).append(packet)
    return state, A, by_round


def _recover_keys(
    generator: KeyGenerator,
    packets: List[Packet],
    blocks: List[FieldMatrix],
) -> List[FieldMatrix]:
    """Solve for the z round keys from z packets, knowing A."""
    rows = FieldMatrix(generator.G.data[[p.slot - 1 for p in packets]])
    inverse = gf256.invert(rows)
    pads = []
    for p in packets:
        pad = p.payload if p.is_key else p.payload - fountain.encode(blocks, p.spec)
        pads.append(pad.data.reshape(-1))
    recovered = []
    for i in range(generator.z):
        acc = np.zeros_like(pads[0])
        for k, pad in enumerate(pads):
            coefficient = inverse.data[i, k]
            if coefficient:
                acc ^= gf256.MUL_TABLE[coefficient][pad]
        recovered.append(FieldMatrix(acc.reshape(packets[0].payload.shape)))
    return recovered


def audit_rounds(
    n: int,
    z: int,
    rounds: int,
    rng: np.random.Generator,
    generator: Optional[KeyGenerator] = None,
    recover_limit: int = 16,
) -> AuditReport:
    """Enumerate every z-subset of every round's packets.

    Args:
        n: Workers (one packet each per round)
        z: Collusion bound
        rounds: Rounds to dispatch
        rng: Seeded generator for keys and specs
        generator: Key code to audit; the systematic Vandermonde code by default
        recover_limit: Subsets per round whose keys are actually recovered

    Returns:
        AuditReport; `passed` is False when any subset is singular
    """
    if n > MAX_EXHAUSTIVE_N:
        raise FieldDomainError(f"exhaustive audit supports n <= {MAX_EXHAUSTIVE_N}, got {n}")
    generator = generator or keycode.build_generator(n, z)
    state, A, by_round = _dispatch_rounds(n, z, rounds, generator, rng)
    blocks = prac_master.split_blocks(state, A)
    report = AuditReport(n=n, z=z, rounds=rounds)

    for t, packets in sorted(by_round.items()):
        packets = sorted(packets, key=lambda p: p.slot)
        recovered_here = 0
        for subset in itertools.combinations(packets, z):
            report.subsets_checked += 1
            slots = tuple(p.slot for p in subset)
            rows = FieldMatrix(generator.G.data[[s - 1 for s in slots]])
            if not gf256.is_invertible(rows):
                report.singular.append((t, slots))
                logger.error(f"Round {t} # AUDIT | ✗ singular slots {slots}")
                continue
            if recovered_here < recover_limit:
                keys = _recover_keys(generator, list(subset), blocks)
                if tuple(keys) != state.round_keys[t].keys:
                    report.singular.append((t, slots))
                    logger.error(f"Round {t} # AUDIT | ✗ keys not recovered from slots {slots}")
                    continue
                recovered_here += 1
                report.keys_recovered += 1

    seen = set()
    for keys in state.round_keys.values():
        for key in keys.keys:
            digest = key.data.tobytes()
            if digest in seen:
                report.repeated_keys += 1
            seen.add(digest)
    return report


def pad_uniformity_pvalue(
    generator: KeyGenerator,
    rng: np.random.Generator,
    samples: int = 100_000,
    dims: Tuple[int, int] = (1, 4),
) -> float:
    """Chi-square p-value of the byte histogram of nu + g_j R.

    nu is fixed; keys are redrawn for every sample and j cycles over the
    secure rows.
    """
    nu = FieldMatrix.random(dims[0], dims[1], rng)
    per_sample = dims[0] * dims[1]
    draws = -(-samples // per_sample)
    counts = np.zeros(256, dtype=np.int64)
    secure_rows = range(generator.z + 1, generator.n + 1)
    for i in range(draws):
        j = secure_rows[i % len(secure_rows)]
        keys = keycode.fresh_round_keys(i + 1, dims, generator.z, rng)
        padded = nu + keycode.encode_key_row(generator, j, keys)
        counts += np.bincount(padded.data.reshape(-1), minlength=256)
    return float(stats.chisquare(counts).pvalue)


def run_privacy_audit(
    n: int,
    z: int,
    rounds: int,
    rng: np.random.Generator,
    generator: Optional[KeyGenerator] = None,
    pad_samples: int = 100_000,
    alpha: float = 0.01,
) -> AuditReport:
    """Full audit; raises when any check fails.

    Raises:
        AuditFailure: a singular subset, a reused key or non-uniform pads
    """
    generator = generator or keycode.build_generator(n, z)
    report = audit_rounds(n, z, rounds, rng, generator=generator)
    if report.passed:
        report.pad_pvalue = pad_uniformity_pvalue(generator, rng, samples=pad_samples)
    if not report.passed:
        subsets = sorted({slots for _, slots in report.singular})
        raise AuditFailure(f"{len(report.singular)} singular key subsets", subsets=subsets)
    if report.pad_pvalue is not None and report.pad_pvalue < alpha:
        raise AuditFailure(f"padded packets fail uniformity (p={report.pad_pvalue:.4g})")
    logger.info(
        f"# AUDIT | ✓ n={n} z={z}: {report.subsets_checked} subsets, "
        f"{report.keys_recovered} key recoveries, pad p={report.pad_pvalue:.3f}"
    )
    return report

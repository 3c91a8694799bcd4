"""
Test LT fountain encoding and the peeling decoder.
"""
import itertools

import numpy as np
import pytest
from scipy import stats

from src.coding import fountain, gf256
from src.coding.fountain import FountainSpec, PeelingState
from src.coding.gf256 import FieldMatrix
from src.exceptions import DecoderIntegrityError, DecoderStateError, FieldDomainError

# Information packets of the six-block walkthrough, 0-based block indices
WALKTHROUGH_SPECS = [(3,), (2, 3, 5), (2,), (3, 4), (1,), (0,), (1, 2)]


def _blocks(b, rows=2, cols=3, seed=1):
    rng = np.random.default_rng(seed)
    return [FieldMatrix.random(rows, cols, rng) for _ in range(b)]


def test_robust_soliton_is_a_distribution():
    for b in (1, 2, 6, 100, 1000):
        dist = fountain.robust_soliton(b)
        assert dist.pmf.shape == (b,)
        assert np.all(dist.pmf >= 0)
        assert dist.pmf.sum() == pytest.approx(1.0)
        assert dist.cdf[-1] == 1.0


def test_robust_soliton_rejects_empty():
    with pytest.raises(FieldDomainError):
        fountain.robust_soliton(0)


def test_sample_spec_is_sorted_and_in_range():
    rng = np.random.default_rng(3)
    dist = fountain.robust_soliton(50)
    for _ in range(200):
        spec = fountain.sample_spec(dist, rng)
        assert list(spec.block_indices) == sorted(set(spec.block_indices))
        spec.check_bound(50)


def test_spec_validation():
    with pytest.raises(FieldDomainError):
        FountainSpec(())
    with pytest.raises(FieldDomainError):
        FountainSpec((2, 1))
    with pytest.raises(FieldDomainError):
        FountainSpec((0, 6)).check_bound(6)


def test_spec_wire_format():
    spec = FountainSpec((0, 2))
    assert spec.to_bytes().hex() == "00020000000000000002"
    parsed, end = FountainSpec.read_from(spec.to_bytes())
    assert parsed == spec and end == 10


def test_encode_is_xor_of_named_blocks():
    blocks = _blocks(6)
    packet = fountain.encode(blocks, FountainSpec((0, 2)))
    assert packet == blocks[0] + blocks[2]


def test_walkthrough_packets_decode_all_six_blocks():
    rows = 1
    values = [np.array([v], dtype=np.uint8) for v in (11, 22, 33, 44, 55, 66)]
    state = PeelingState(6, rows)
    for indices in WALKTHROUGH_SPECS:
        payload = np.zeros(rows, dtype=np.uint8)
        for i in indices:
            payload ^= values[i]
        state.ingest(FountainSpec(indices), payload)
    assert state.is_complete()
    assert state.overhead == 1
    assert [int(v[0]) for v in state.decoded()] == [11, 22, 33, 44, 55, 66]


def test_peeling_cascade_releases_pending_packets():
    state = PeelingState(3, 1)
    assert state.ingest(FountainSpec((0, 1, 2)), np.array([1 ^ 2 ^ 3], dtype=np.uint8)) == 0
    assert state.ingest(FountainSpec((1, 2)), np.array([2 ^ 3], dtype=np.uint8)) == 0
    assert len(state.pending) == 2
    assert state.ingest(FountainSpec((2,)), np.array([3], dtype=np.uint8)) == 3
    assert [int(v[0]) for v in state.decoded()] == [1, 2, 3]
    assert state.pending == []


def test_conflicting_packets_raise():
    state = PeelingState(2, 1)
    state.ingest(FountainSpec((0,)), np.array([5], dtype=np.uint8))
    with pytest.raises(DecoderIntegrityError):
        state.ingest(FountainSpec((0,)), np.array([6], dtype=np.uint8))


def test_decoded_before_complete_raises():
    state = PeelingState(2, 1)
    with pytest.raises(DecoderStateError):
        state.decoded()


def test_payload_length_checked():
    state = PeelingState(2, 3)
    with pytest.raises(FieldDomainError):
        state.ingest(FountainSpec((0,)), np.zeros(2, dtype=np.uint8))


def test_single_block_needs_no_overhead():
    rng = np.random.default_rng(9)
    assert all(fountain.measure_overhead(1, rng) == 0 for _ in range(50))


def test_random_stream_recovers_blocks():
    rng = np.random.default_rng(21)
    b = 40
    blocks = _blocks(b, rows=3, cols=1, seed=4)
    dist = fountain.robust_soliton(b)
    state = PeelingState(b, 3)
    while not state.is_complete():
        spec = fountain.sample_spec(dist, rng)
        state.ingest(spec, fountain.encode(blocks, spec).vector())
    assert [FieldMatrix.column(v) for v in state.decoded()] == blocks
    assert state.overhead >= 0


def test_nominal_overhead():
    assert fountain.nominal_overhead(1000) == 50
    assert fountain.nominal_overhead(6) == 1


def _pooled(observed, expected, floor=5.0):
    """Merge the bins with expected count below `floor` into one."""
    small = expected < floor
    if not small.any():
        return observed, expected
    return (
        np.append(observed[~small], observed[small].sum()),
        np.append(expected[~small], expected[small].sum()),
    )


def test_sampled_degrees_follow_robust_soliton():
    rng = np.random.default_rng(31)
    b, draws = 50, 100_000
    dist = fountain.robust_soliton(b)
    degrees = [fountain.sample_spec(dist, rng).degree for _ in range(draws)]
    observed = np.bincount(degrees, minlength=b + 1)[1:]
    observed, expected = _pooled(observed, dist.pmf * draws)
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def _stream(b, count, seed):
    rng = np.random.default_rng(seed)
    dist = fountain.robust_soliton(b)
    values = rng.integers(0, 256, size=(b, 1), dtype=np.uint8)
    packets = []
    for _ in range(count):
        spec = fountain.sample_spec(dist, rng)
        packets.append((spec, np.bitwise_xor.reduce(values[list(spec.block_indices)], axis=0)))
    return values, packets


def _peel(b, packets):
    state = PeelingState(b, 1)
    for spec, payload in packets:
        state.ingest(spec, payload)
    return state


@pytest.mark.parametrize("b", [2, 3, 4, 5, 6])
def test_peeling_result_ignores_arrival_order(b):
    _, packets = _stream(b, b + 1, seed=40 + b)
    reference = _peel(b, packets)
    known = {i: bytes(v) for i, v in reference.recovered.items()}
    for order in itertools.permutations(packets):
        state = _peel(b, order)
        assert state.is_complete() == reference.is_complete()
        assert {i: bytes(v) for i, v in state.recovered.items()} == known


def test_walkthrough_decodes_in_every_order():
    values = np.arange(1, 7, dtype=np.uint8).reshape(6, 1)
    packets = [
        (FountainSpec(indices), np.bitwise_xor.reduce(values[list(indices)], axis=0))
        for indices in WALKTHROUGH_SPECS
    ]
    for order in itertools.permutations(packets):
        state = _peel(6, order)
        assert state.is_complete()
        assert [int(v[0]) for v in state.decoded()] == list(range(1, 7))


@pytest.mark.parametrize("b", [1, 5, 20, 60])
def test_completion_needs_b_packets_and_full_rank(b):
    for seed in range(10):
        values, packets = _stream(b, 6 * b + 20, seed=100 * b + seed)
        state = PeelingState(b, 1)
        used = []
        for spec, payload in packets:
            state.ingest(spec, payload)
            used.append(spec)
            if state.received_count < b:
                assert not state.is_complete()
            if state.is_complete():
                break
        assert state.is_complete(), (b, seed)
        assert state.received_count >= b
        # 0/1 incidence rows; rank over GF(256) equals rank over GF(2)
        incidence = np.zeros((len(used), b), dtype=np.uint8)
        for row, spec in enumerate(used):
            incidence[row, list(spec.block_indices)] = 1
        assert gf256.rank(FieldMatrix(incidence)) == b
        assert np.array_equal(np.stack(state.decoded()), values)

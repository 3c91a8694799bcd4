"""
Test the PRAC master state machine, vector hiding and the privacy audit.
"""
import math

import numpy as np
import pytest

from src.coding import fountain, gf256, keycode
from src.coding.fountain import FountainSpec
from src.coding.gf256 import FieldMatrix
from src.coding.keycode import EXAMPLE_GENERATOR_4_2, KeyGenerator
from src.exceptions import (
    AuditFailure,
    FieldDomainError,
    ProtocolError,
    ProtocolStateError,
)
from src.prac import audit, hiding, local
from src.prac import master as prac_master
from src.prac.packets import BetaEstimator, PacketKind, ResultMsg, observed_service_time, worker_compute


def _setup(n, z, b, m=None, ell=4, seed=0, generator=None):
    rng = np.random.default_rng(seed)
    m = m or b
    A = FieldMatrix.random(m, ell, rng)
    x = FieldMatrix.random(ell, 1, rng)
    state = prac_master.create_master_state(n, z, b, m, ell, generator=generator)
    blocks = prac_master.split_blocks(state, A)
    return rng, A, x, state, blocks


def _deliver(state, packet, x):
    msg = ResultMsg(packet.worker, packet.round, packet.slot, worker_compute(packet.payload, x))
    return prac_master.on_result(state, msg)


# -- packet construction -------------------------------------------------

def test_three_worker_walkthrough_first_slot():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    key = prac_master.next_packet(state, 0, blocks, rng)
    first = prac_master.next_packet(state, 1, blocks, rng, spec=FountainSpec((0, 2)))
    second = prac_master.next_packet(state, 2, blocks, rng, spec=FountainSpec((2,)))

    (r1,) = state.round_keys[1].keys
    assert key.kind is PacketKind.KEY and key.payload == r1
    assert first.kind is PacketKind.SECURE and first.payload == blocks[0] + blocks[2] + r1
    assert second.payload == blocks[2] + r1
    assert [p.round for p in (key, first, second)] == [1, 1, 1]
    assert [p.slot for p in (key, first, second)] == [1, 2, 3]


def test_four_worker_pads_use_generator_rows():
    rng, A, x, state, blocks = _setup(n=4, z=2, b=6, generator=KeyGenerator.from_matrix(EXAMPLE_GENERATOR_4_2))
    packets = [prac_master.next_packet(state, w, blocks, rng) for w in range(4)]
    r1, r2 = state.round_keys[1].keys
    assert packets[0].payload == r1 and packets[1].payload == r2
    third_pad = packets[2].payload - fountain.encode(blocks, packets[2].spec)
    fourth_pad = packets[3].payload - fountain.encode(blocks, packets[3].spec)
    assert third_pad == r1 + r2
    assert fourth_pad == r1 + r2.scale(2)
    assert (packets[2].g_row, packets[3].g_row) == (3, 4)


def test_one_secure_packet_per_round_when_z_is_n_minus_one():
    rng, A, x, state, blocks = _setup(n=5, z=4, b=4)
    for _ in range(3):
        kinds = [prac_master.next_packet(state, w, blocks, rng).kind for w in range(5)]
        assert kinds.count(PacketKind.SECURE) == 1


def test_keys_created_on_first_touch_only():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    prac_master.next_packet(state, 0, blocks, rng)
    assert set(state.round_keys) == {1}
    prac_master.next_packet(state, 0, blocks, rng)
    assert set(state.round_keys) == {1, 2}
    assert state.round_keys[1].keys != state.round_keys[2].keys


def test_zero_z_sends_plain_fountain_packets():
    rng, A, x, state, blocks = _setup(n=3, z=0, b=3)
    packet = prac_master.next_packet(state, 0, blocks, rng)
    assert packet.kind is PacketKind.SECURE
    assert packet.payload == fountain.encode(blocks, packet.spec)
    assert state.round_keys == {}


def test_invalid_collusion_bound():
    with pytest.raises(FieldDomainError):
        prac_master.create_master_state(3, 3, 3, 3, 2)


# -- gating and decoding -------------------------------------------------

def test_three_worker_walkthrough_decodes():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    sent = [
        prac_master.next_packet(state, 0, blocks, rng),
        prac_master.next_packet(state, 1, blocks, rng, spec=FountainSpec((0, 2))),
        prac_master.next_packet(state, 2, blocks, rng, spec=FountainSpec((2,))),
        prac_master.next_packet(state, 1, blocks, rng),
        prac_master.next_packet(state, 0, blocks, rng, spec=FountainSpec((1, 2))),
        prac_master.next_packet(state, 2, blocks, rng, spec=FountainSpec((1,))),
    ]
    for packet in sent:
        _deliver(state, packet, x)
    assert prac_master.try_finish(state) == gf256.mat_vec_mul(A, x)
    assert state.stopped


def test_decode_milestone_is_logged_with_last_round(caplog):
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    specs = [None, FountainSpec((0, 2)), FountainSpec((2,)), None, FountainSpec((1, 2)), FountainSpec((1,))]
    for worker, spec in zip([0, 1, 2, 1, 0, 2], specs):
        _deliver(state, prac_master.next_packet(state, worker, blocks, rng, spec=spec), x)
    with caplog.at_level("INFO", logger="src.prac.master"):
        prac_master.try_finish(state)
    [record] = [r for r in caplog.records if getattr(r, "extra_data", {}).get("operation") == "decode_complete"]
    assert record.extra_data["round"] == 2
    assert record.extra_data["details"]["packets_sent"] == 6


def test_secure_result_waits_for_round_keys():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=1)
    key = prac_master.next_packet(state, 0, blocks, rng)
    secure = prac_master.next_packet(state, 1, blocks, rng)
    assert _deliver(state, secure, x) == 0
    assert prac_master.try_finish(state) is None
    assert _deliver(state, key, x) == 1
    assert prac_master.try_finish(state) == gf256.mat_vec_mul(A, x)


def test_straggler_walkthrough_trace():
    """Six blocks, four workers, two colluders; round 3's last key releases the decode."""
    rng, A, x, state, blocks = _setup(n=4, z=2, b=6, generator=KeyGenerator.from_matrix(EXAMPLE_GENERATOR_4_2))
    send = lambda w, spec=None: prac_master.next_packet(
        state, w - 1, blocks, rng, spec=FountainSpec(spec) if spec else None
    )
    trace = [
        send(1), send(2), send(3, (3,)), send(4, (2, 3, 5)),
        send(4),
        send(1),
        send(2, (2,)), send(3, (3, 4)),
        send(2),
        send(4), send(1, (1,)),
        send(2), send(3, (0,)),
        send(1), send(4, (1, 2)),
    ]
    labels = [(p.worker + 1, p.round, p.slot) for p in trace]
    assert labels[4:9] == [(4, 2, 1), (1, 2, 2), (2, 2, 3), (3, 2, 4), (2, 3, 1)]
    assert labels[-1] == (4, 4, 3)

    r32 = next(p for p in trace if p.round == 3 and p.slot == 2)
    held = {id(r32)} | {id(p) for p in trace if p.round == 4 and p.is_key}
    for packet in trace:
        if id(packet) in held:
            continue
        _deliver(state, packet, x)
    assert prac_master.try_finish(state) is None
    assert 3 not in state.consumed_rounds

    _deliver(state, r32, x)
    result = prac_master.try_finish(state)
    assert result == gf256.mat_vec_mul(A, x)
    assert state.consumed_rounds == {1, 2, 3}


def test_duplicate_result_ignored_and_unknown_rejected():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=2)
    key = prac_master.next_packet(state, 0, blocks, rng)
    _deliver(state, key, x)
    assert _deliver(state, key, x) == 0
    with pytest.raises(ProtocolError):
        prac_master.on_result(state, ResultMsg(2, 9, 1, np.zeros(1, dtype=np.uint8)))


def test_result_length_checked():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=2, m=4)
    key = prac_master.next_packet(state, 0, blocks, rng)
    with pytest.raises(FieldDomainError):
        prac_master.on_result(state, ResultMsg(0, key.round, key.slot, np.zeros(5, dtype=np.uint8)))


def test_no_packets_after_stop():
    rng, A, x, state, blocks = _setup(n=2, z=1, b=1)
    key = prac_master.next_packet(state, 0, blocks, rng)
    secure = prac_master.next_packet(state, 1, blocks, rng)
    _deliver(state, key, x)
    _deliver(state, secure, x)
    assert prac_master.try_finish(state) is not None
    with pytest.raises(ProtocolStateError):
        prac_master.next_packet(state, 0, blocks, rng)


def test_padding_rows_stripped():
    rng = np.random.default_rng(4)
    A = FieldMatrix.random(7, 5, rng)
    x = FieldMatrix.random(5, 1, rng)
    run = local.run_local(A, x, n=4, z=1, rng=rng, b=3)
    assert run.result.shape == (7, 1)
    assert run.result == gf256.mat_vec_mul(A, x)


@pytest.mark.parametrize("n,z,b", [(4, 2, 6), (10, 3, 20), (6, 5, 8), (3, 0, 5)])
def test_in_process_runs_are_exact(n, z, b):
    rng = np.random.default_rng(n * 100 + z)
    for _ in range(10):
        A = FieldMatrix.random(b * 2, 6, rng)
        x = FieldMatrix.random(6, 1, rng)
        run = local.run_local(A, x, n, z, rng, b=b)
        assert run.result == gf256.mat_vec_mul(A, x)
        digests = {k.data.tobytes() for keys in run.state.round_keys.values() for k in keys.keys}
        assert len(digests) == z * len(run.state.round_keys)


# -- service-time estimation and dispatch ---------------------------------

def test_beta_estimator_is_arithmetic_mean():
    est = BetaEstimator()
    samples = [0.5, 1.5, 2.0, 4.0]
    for s in samples:
        est.observe(3, s)
    assert est.mean(3) == pytest.approx(np.mean(samples))
    assert est.count(3) == 4
    assert est.mean(1) is None
    est.observe(1, -2.0)
    assert est.mean(1) == 0.0


def test_observed_service_time():
    assert observed_service_time(10.0, 14.0, None, 0.5) == pytest.approx(3.0)
    assert observed_service_time(10.0, 14.0, 12.0, 0.5) == pytest.approx(2.0)
    assert observed_service_time(10.0, 10.5, None, 0.5) == 0.0


def test_observed_service_time_with_asymmetric_links():
    assert observed_service_time(10.0, 14.0, None, 0.5, 0.1) == pytest.approx(3.4)
    assert observed_service_time(10.0, 14.0, 12.0, 0.5, 0.1) == pytest.approx(2.0)


def test_on_result_samples_beta_with_separate_link_times():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    packet = prac_master.next_packet(state, 0, blocks, rng)
    prac_master.record_send(state, packet, 0.0)
    msg = ResultMsg(packet.worker, packet.round, packet.slot, worker_compute(packet.payload, x))
    prac_master.on_result(state, msg, arrived_at=5.0, one_way=1.0, return_way=0.2)
    assert state.beta.mean(0) == pytest.approx(3.8)


def test_dispatch_time_rules():
    rng, A, x, state, blocks = _setup(n=3, z=1, b=3)
    assert prac_master.dispatch_time(state, 0, 5.0, None, None) == 5.0
    assert math.isinf(prac_master.dispatch_time(state, 0, 5.0, 5.0, None))
    assert prac_master.dispatch_time(state, 0, 7.0, 5.0, 6.5) == 7.0

    state.beta.observe(0, 2.0)
    assert prac_master.dispatch_time(state, 0, 10.0, 10.0, None) == pytest.approx(12.0)
    assert prac_master.dispatch_time(state, 0, 11.5, 10.0, 11.5) == pytest.approx(11.5)
    assert prac_master.dispatch_time(state, 0, 13.0, 10.0, None) == pytest.approx(13.0)


# -- vector hiding -------------------------------------------------------

def test_hide_x_run_returns_product():
    rng = np.random.default_rng(31)
    for _ in range(20):
        A = FieldMatrix.random(8, 5, rng)
        x = FieldMatrix.random(5, 1, rng)
        assert hiding.hide_x_run(A, x, (3, 4), 1, 2, rng, b=4) == gf256.mat_vec_mul(A, x)


def test_mask_vector_hides_x():
    rng = np.random.default_rng(1)
    x = FieldMatrix.random(6, 1, rng)
    masked, u = hiding.mask_vector(x, rng)
    assert masked - u == x


def test_degenerate_groups_rejected():
    with pytest.raises(FieldDomainError):
        hiding.check_groups((2, 3), 2, 1)
    with pytest.raises(FieldDomainError):
        hiding.check_groups((3, 1), 1, 1)


# -- privacy audit -------------------------------------------------------

def test_audit_four_workers_two_colluders():
    report = audit.audit_rounds(4, 2, 3, np.random.default_rng(0))
    assert report.passed
    assert report.subsets_checked == 6 * 3
    assert report.keys_recovered == 6 * 3


def test_audit_z_n_minus_one():
    report = audit.audit_rounds(6, 5, 2, np.random.default_rng(0))
    assert report.passed and report.subsets_checked == 6 * 2


def test_audit_walkthrough_generator():
    gen = KeyGenerator.from_matrix(EXAMPLE_GENERATOR_4_2)
    assert audit.audit_rounds(4, 2, 2, np.random.default_rng(3), generator=gen).passed


def test_audit_flags_duplicated_row():
    data = keycode.build_generator(4, 2).G.data.copy()
    data[3] = data[2]
    gen = KeyGenerator.from_matrix(FieldMatrix(data))
    with pytest.raises(AuditFailure) as excinfo:
        audit.run_privacy_audit(4, 2, 2, np.random.default_rng(0), generator=gen, pad_samples=1000)
    assert excinfo.value.subsets == [(3, 4)]


def test_pads_look_uniform():
    gen = keycode.build_generator(5, 2)
    assert audit.pad_uniformity_pvalue(gen, np.random.default_rng(12), samples=40_000) > 1e-4


def test_audit_size_limit():
    with pytest.raises(FieldDomainError):
        audit.audit_rounds(21, 2, 1, np.random.default_rng(0))

import json

import numpy as np
import pytest

from porecode.channel import (ALPHABET, ChannelParams, EventKind,
                              PositionClass, as_seq, classify_position,
                              kmer_context, marginal_event_rates, seq_to_str,
                              transmit, transmit_multi, validate)
from porecode.presets import (all_delete_params, bursty_error_params,
                              iid_error_params, memory2_demo_params)


def test_classify_position_boundaries():
    # k=3, N=8: position 1 begin, 2 prefix, 3..7 middle, 8 end
    got = [classify_position(i, 3, 8) for i in range(1, 9)]
    assert got[0] == PositionClass.BEGIN
    assert got[1] == PositionClass.PREFIX
    assert got[-1] == PositionClass.END
    assert all(g == PositionClass.MIDDLE for g in got[2:-1])


def test_classify_position_no_prefix_when_k1():
    got = [classify_position(i, 1, 5) for i in range(1, 6)]
    assert PositionClass.PREFIX not in got
    assert got == [PositionClass.BEGIN] + [PositionClass.MIDDLE] * 3 \
        + [PositionClass.END]


def test_classify_position_total():
    for k in (1, 2, 3):
        for n in (2, 3, 7):
            for i in range(1, n + 1):
                classify_position(i, k, n)
    with pytest.raises(ValueError):
        classify_position(0, 1, 5)
    with pytest.raises(ValueError):
        classify_position(6, 1, 5)


def test_sequence_text_roundtrip():
    x = np.array([0, 1, 2, 3, 3, 0], dtype=np.int8)
    assert seq_to_str(x) == "ACGTTA"
    assert np.array_equal(as_seq("ACGTTA"), x)
    assert np.array_equal(as_seq("acgtta"), x)
    with pytest.raises(ValueError):
        as_seq("ACGU")


def test_kmer_context_window():
    x = as_seq("ACGT")
    # k=2 middle context is the preceding symbol plus the current one;
    # begin/end regions condition on the current symbol alone
    assert kmer_context(x, 3, 2) == (1, 2)
    assert kmer_context(x, 4, 2) == (3,)
    assert kmer_context(x, 2, 1) == (1,)


def test_uniform_params_validate():
    for k in (1, 2):
        for l_max in (2, 4):
            p = ChannelParams.uniform(k, l_max)
            assert validate(p) == []
            assert p.event_table.shape == (4, 4 ** k, 5, 4)
            assert p.ins_len_table.shape == (4, 4 ** k, l_max - 1)
            assert p.sub_table.shape == (4, 4 ** k, 4, 4)


def test_presets_validate():
    for p in (iid_error_params(1, 2, 0.01, 0.02, 0.03),
              iid_error_params(2, 3, 0.0, 0.05, 0.0),
              bursty_error_params(1, 2, 0.01, 0.02, 0.03),
              memory2_demo_params(),
              all_delete_params()):
        assert validate(p) == []


def test_validate_catches_bad_rows():
    p = iid_error_params(1, 2, 0.01, 0.02, 0.03)
    p.event_table[2, 0, 3, :] = [0.5, 0.5, 0.5, 0.5]
    assert any("sums to" in msg for msg in validate(p))
    p = iid_error_params(1, 2, 0.01, 0.02, 0.03)
    p.sub_table[2, 1, 2, 2] = 0.4  # diagonal must stay zero
    assert validate(p)
    p = iid_error_params(1, 2, 0.01, 0.02, 0.03)
    p.event_table[2, 0, 3, 0] = -0.01
    p.event_table[2, 0, 3, 3] += 0.01
    assert validate(p)


def test_params_json_roundtrip(tmp_path):
    p = memory2_demo_params()
    path = tmp_path / "params.json"
    p.save(path)
    q = ChannelParams.load(path)
    assert q.k == p.k and q.l_max == p.l_max
    assert np.array_equal(q.event_table, p.event_table)
    assert np.array_equal(q.ins_len_table, p.ins_len_table)
    assert np.array_equal(q.sub_table, p.sub_table)
    doc = json.loads(path.read_text())
    assert doc["k"] == 2


def test_perfect_channel_is_identity():
    p = iid_error_params(1, 2, 0.0, 0.0, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.integers(0, 4, size=50).astype(np.int8)
        y, trace = transmit(x, p, rng_seed=rng.integers(2 ** 31))
        assert np.array_equal(y, x)
        assert np.all(trace.events == int(EventKind.NO_ERR))


def test_all_delete_channel_emits_nothing():
    p = all_delete_params()
    y, trace = transmit(as_seq("ACGTACGT"), p, rng_seed=1)
    assert y.shape[0] == 0
    assert np.all(trace.events == int(EventKind.DEL))


def test_drift_bookkeeping_small():
    p = bursty_error_params(2, 3, 0.02, 0.03, 0.02)
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(5, 60))
        x = rng.integers(0, 4, size=n).astype(np.int8)
        y, trace = transmit(x, p, rng_seed=rng.integers(2 ** 31))
        assert y.shape[0] == trace.emitted_length(n)
        assert trace.check_channel_invariants(p.l_max) == []


def test_substitution_never_copies_input():
    p = iid_error_params(1, 2, 0.0, 0.0, 0.9)
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.integers(0, 4, size=40).astype(np.int8)
        y, trace = transmit(x, p, rng_seed=rng.integers(2 ** 31))
        subbed = trace.events == int(EventKind.SUB)
        assert np.all(y[subbed] != x[subbed])


def test_insertion_segment_shape():
    # ins-only channel: every emitted segment is burst plus faithful copy
    p = iid_error_params(1, 3, 0.9, 0.0, 0.0)
    x = as_seq("ACGTACGTAC")
    y, trace = transmit(x, p, rng_seed=5)
    pos = 0
    for t in range(len(x)):
        ell = int(trace.ins_lens[t])
        if trace.events[t] == int(EventKind.INS):
            assert 2 <= ell <= 3
            pos += ell
        assert y[pos] == x[t]
        pos += 1
    assert pos == y.shape[0]


def test_transmit_deterministic_under_seed():
    p = memory2_demo_params()
    x = np.tile(as_seq("ACGT"), 20)
    y1, t1 = transmit(x, p, rng_seed=42)
    y2, t2 = transmit(x, p, rng_seed=42)
    y3, _ = transmit(x, p, rng_seed=43)
    assert np.array_equal(y1, y2)
    assert np.array_equal(t1.events, t2.events)
    assert not (y3.shape == y1.shape and np.array_equal(y3, y1))


def test_transmit_multi_reads_differ():
    p = iid_error_params(1, 2, 0.02, 0.03, 0.04)
    x = np.tile(as_seq("ACGT"), 25)
    reads = transmit_multi(x, p, 5, rng_seed=0)
    assert len(reads) == 5
    texts = {seq_to_str(y) for y, _ in reads}
    assert len(texts) > 1


def test_event_memory_is_respected():
    """After a deletion the deletion rate should follow the prev=Del row."""
    p = iid_error_params(1, 2, 0.0, 0.05, 0.0)
    del_row = np.zeros(4)
    del_row[int(EventKind.DEL)] = 0.5
    del_row[int(EventKind.NO_ERR)] = 0.5
    p.event_table[2, :, int(EventKind.DEL), :] = del_row
    rng = np.random.default_rng(11)
    after_del = np.zeros(2)
    for trial in range(400):
        x = rng.integers(0, 4, size=80).astype(np.int8)
        _, trace = transmit(x, p, rng_seed=10_000 + trial)
        ev = trace.events
        prev_del = ev[:-1] == int(EventKind.DEL)
        # only middle positions follow the middle table
        prev_del[:2] = False
        after_del[0] += np.sum(prev_del)
        after_del[1] += np.sum(prev_del & (ev[1:] == int(EventKind.DEL)))
    rate = after_del[1] / after_del[0]
    sigma = np.sqrt(0.5 * 0.5 / after_del[0])
    assert abs(rate - 0.5) < 4 * sigma


def test_marginal_event_rates_match_empirical():
    p = bursty_error_params(1, 2, 0.01, 0.02, 0.015)
    rates = marginal_event_rates(p)
    assert rates.shape == (4,)
    assert abs(rates.sum() - 1.0) < 1e-12
    rng = np.random.default_rng(2)
    counts = np.zeros(4)
    for trial in range(400):
        x = rng.integers(0, 4, size=100).astype(np.int8)
        _, trace = transmit(x, p, rng_seed=50_000 + trial)
        # skip begin/end, the stationary rates describe the middle region
        mid = trace.events[2:-2]
        for e in range(4):
            counts[e] += np.sum(mid == e)
    emp = counts / counts.sum()
    assert np.max(np.abs(emp - rates)) < 0.01

"""Backend parity: compiled kernels against their plain implementations."""
import json
import os
import subprocess
import sys

import numpy as np

import porecode._kernels as _k
from porecode.channel import as_seq, transmit
from porecode.estimate import lattice
from porecode.ldpc import decode_with_totals, ldpc_encode, code_dimension, lift, table1
from porecode.presets import iid_error_params, memory2_demo_params
from porecode.trellis import BlockStructure, DriftWindow, app_single


def test_backend_flag_is_consistent():
    assert _k.USING_NUMBA == _k.HAS_NUMBA
    if os.environ.get("PORECODE_DISABLE_NUMBA", "").strip().lower() in (
            "1", "true", "yes"):
        assert not _k.HAS_NUMBA


def test_transmit_core_matches_plain_python():
    p = iid_error_params(1, 3, 0.03, 0.04, 0.05)
    rng = np.random.default_rng(0)
    for trial in range(20):
        x = rng.integers(0, 4, size=40).astype(np.int8)
        uniforms = np.random.default_rng(trial).random(40 * 5 + 8)
        y1, ny1, ev1, il1 = _k.transmit_core(
            x, p.k, p.l_max, p.event_table, p.ins_len_table, p.sub_table,
            uniforms)
        y2, ny2, ev2, il2 = _k._transmit_core(
            x, p.k, p.l_max, p.event_table, p.ins_len_table, p.sub_table,
            uniforms)
        assert ny1 == ny2
        assert np.array_equal(np.asarray(y1)[:ny1], np.asarray(y2)[:ny2])
        assert np.array_equal(np.asarray(ev1), np.asarray(ev2))
        assert np.array_equal(np.asarray(il1), np.asarray(il2))


def test_lattice_fill_variants_agree():
    rng = np.random.default_rng(1)
    p = iid_error_params(1, 2, 0.05, 0.05, 0.05)
    for trial in range(25):
        x = rng.integers(0, 4, size=int(rng.integers(5, 40))).astype(np.int8)
        y, _ = transmit(x, p, rng_seed=trial)
        c1, m1 = _k.lattice_fill(x, y)
        c2, m2 = _k._lattice_fill_np(x, y)
        c3, m3 = _k._lattice_fill_loops(x, y)
        assert np.array_equal(np.asarray(c1), np.asarray(c2))
        assert np.array_equal(np.asarray(c2), np.asarray(c3))
        assert np.array_equal(np.asarray(m1), np.asarray(m2))
        assert np.array_equal(np.asarray(m2), np.asarray(m3))


def test_backtrack_kernels_match_plain_python():
    rng = np.random.default_rng(2)
    p = iid_error_params(1, 2, 0.04, 0.04, 0.04)
    for trial in range(10):
        x = rng.integers(0, 4, size=30).astype(np.int8)
        y, _ = transmit(x, p, rng_seed=trial)
        lat = lattice(x, y)
        uniforms = np.random.default_rng(trial).random(x.size + y.size + 2)
        mv1 = _k.backtrack_moves(lat.moves, uniforms)
        mv2 = _k._backtrack_moves(lat.moves, uniforms)
        assert np.array_equal(np.asarray(mv1), np.asarray(mv2))
        ev1 = _k.moves_to_events(mv1, x, y)
        ev2 = _k._moves_to_events(mv1, x, y)
        for g, w in zip(ev1, ev2):
            assert np.array_equal(np.asarray(g), np.asarray(w))


def test_count_trace_matches_plain_python():
    rng = np.random.default_rng(3)
    p = memory2_demo_params()
    x = rng.integers(0, 4, size=80).astype(np.int8)
    y, _ = transmit(x, p, rng_seed=9)
    lat = lattice(x, y)
    uniforms = np.random.default_rng(4).random(x.size + y.size + 2)
    events, ins_lens, subs = _k.moves_to_events(
        _k.backtrack_moves(lat.moves, uniforms), x, y)
    shapes = [((4, 16, 5, 4)), ((4, 16, 1)), ((4, 16, 4, 4))]
    tables1 = [np.zeros(s) for s in shapes] + [np.zeros(2, dtype=np.int64)]
    tables2 = [np.zeros(s) for s in shapes] + [np.zeros(2, dtype=np.int64)]
    _k.count_trace(x, events, ins_lens, subs, 2, 2, False, *tables1)
    _k._count_trace(x, events, ins_lens, subs, 2, 2, False, *tables2)
    for a, b in zip(tables1, tables2):
        assert np.array_equal(a, b)


def _tiny_posterior_case(kernel, monkeypatch):
    p = iid_error_params(2, 2, 0.03, 0.04, 0.05)
    x = as_seq("ACGTACGTACGT")
    y, _ = transmit(x, p, rng_seed=5)
    structure = BlockStructure.uncoded_block(12)
    pri = np.random.default_rng(6).random((12, 4)) + 0.1
    with monkeypatch.context() as mp:
        mp.setattr(_k, "bcjr_core", kernel)
        return app_single(y, structure, p, priors=pri,
                          window=DriftWindow(-6, 6))


def test_bcjr_scalar_and_vectorized_agree(monkeypatch):
    a = _tiny_posterior_case(_k.bcjr_core, monkeypatch)
    b = _tiny_posterior_case(_k._bcjr_core_np, monkeypatch)
    assert np.max(np.abs(a - b)) < 1e-12
    c = _tiny_posterior_case(_k._bcjr_core, monkeypatch)
    assert np.max(np.abs(a - c)) < 1e-12


def test_bp_scalar_and_vectorized_agree(monkeypatch):
    proto, _ = table1(2)
    pc = lift(proto, 20, rng_seed=0)
    rng = np.random.default_rng(7)
    cw = ldpc_encode(pc, rng.integers(0, 2, size=code_dimension(pc))
                     .astype(np.uint8))
    llr = 4.0 * (1.0 - 2.0 * cw) + rng.normal(0.0, 2.5, size=pc.n)
    results = []
    for kernel in (_k.bp_core, _k._bp_core, _k._bp_core_np):
        with monkeypatch.context() as mp:
            mp.setattr(_k, "bp_core", kernel)
            results.append(decode_with_totals(llr, pc))
    base = results[0]
    for other in results[1:]:
        assert np.array_equal(base[0], other[0])  # hard decisions
        assert base[1] == other[1] and base[2] == other[2]
        assert np.max(np.abs(base[3] - other[3])) < 1e-9


def test_disable_flag_reproduces_results():
    """A subprocess with the fallback flag set must reproduce channel reads
    and posteriors bit for bit (posteriors to float tolerance)."""
    prog = r"""
import json
import numpy as np
from porecode import _kernels
from porecode.channel import as_seq, transmit
from porecode.presets import iid_error_params
from porecode.trellis import BlockStructure, DriftWindow, app_single

p = iid_error_params(1, 2, 0.03, 0.04, 0.05)
x = as_seq("ACGTACGTACGTACGTACGT")
y, trace = transmit(x, p, rng_seed=11)
apps = app_single(y, BlockStructure.uncoded_block(20), p,
                  window=DriftWindow(-8, 8))
print(json.dumps({"numba": _kernels.USING_NUMBA,
                  "y": y.tolist(),
                  "events": trace.events.tolist(),
                  "apps": apps.tolist()}))
"""
    env = dict(os.environ, PORECODE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", prog], env=env,
                         capture_output=True, text=True, check=True)
    sub = json.loads(out.stdout)
    assert sub["numba"] is False

    p = iid_error_params(1, 2, 0.03, 0.04, 0.05)
    x = as_seq("ACGTACGTACGTACGTACGT")
    y, trace = transmit(x, p, rng_seed=11)
    apps = app_single(y, BlockStructure.uncoded_block(20), p,
                      window=DriftWindow(-8, 8))
    assert sub["y"] == y.tolist()
    assert sub["events"] == trace.events.tolist()
    assert np.max(np.abs(np.asarray(sub["apps"]) - apps)) < 1e-12

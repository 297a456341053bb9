"""Outer LDPC code: protograph table, QC lifting, encoding, BP decoding."""
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from porecode.ldpc import (
    ParityCheck,
    Protograph,
    RankDeficiencyError,
    code_dimension,
    decode_with_totals,
    has_4cycles,
    ldpc_decode,
    ldpc_decode_gf4,
    ldpc_encode,
    lift,
    load_parity_check_matrix,
    save_parity_check,
    syndrome,
    table1,
)


def test_tabulated_protographs_verbatim():
    p1, overall1 = table1(1)
    assert p1.base.tolist() == [[1, 2, 0, 1, 2, 2, 1, 1, 1, 3],
                                [2, 0, 3, 2, 1, 0, 1, 2, 2, 0]]
    assert p1.design_rate == Fraction(4, 5)
    assert overall1 == Fraction(6, 5)

    p2, overall2 = table1(2)
    assert p2.base.tolist() == [[2, 2, 3, 3, 2, 3, 3, 3]]
    assert p2.design_rate == Fraction(7, 8)
    assert overall2 == Fraction(21, 16)

    p5, overall5 = table1(5)
    assert p5.base.tolist() == [[3, 2, 3, 3, 2, 2, 3, 3, 2, 2, 3, 3, 3, 2, 3]]
    assert p5.design_rate == Fraction(14, 15)
    assert overall5 == Fraction(7, 5)

    # overall rate = inner bits-per-symbol times outer code rate, exactly
    for m in (1, 2, 5):
        proto, overall = table1(m)
        assert overall == Fraction(3, 2) * proto.design_rate

    with pytest.raises(ValueError):
        table1(3)


def test_protograph_validation():
    with pytest.raises(ValueError):
        Protograph(np.array([[4]]), Fraction(1, 2))
    with pytest.raises(ValueError):
        Protograph(np.array([1, 2]), Fraction(1, 2))


def test_lift_shapes_degrees_and_circulants():
    proto, _ = table1(2)
    z = 30
    pc = lift(proto, z, rng_seed=0)
    assert pc.h.shape == (z, 8 * z)
    assert pc.n == 240 and pc.m == 30
    base = proto.base
    assert len(pc.offsets) == int(base.sum())
    row_deg = np.asarray(pc.h.sum(axis=1)).ravel()
    col_deg = np.asarray(pc.h.sum(axis=0)).ravel()
    for r in range(base.shape[0]):
        assert np.all(row_deg[r * z:(r + 1) * z] == base[r].sum())
    for c in range(base.shape[1]):
        assert np.all(col_deg[c * z:(c + 1) * z] == base[:, c].sum())
    seen = set()
    dense = pc.h.toarray()
    for (r, c, off) in pc.offsets:
        assert 0 <= off < z
        assert (r, c, off) not in seen  # collisions would merge circulants
        seen.add((r, c, off))
        for i in (0, 1, z - 1):
            assert dense[r * z + i, c * z + (i + off) % z] == 1


def test_lift_girth_certificates():
    proto, _ = table1(5)
    assert lift(proto, 100, rng_seed=0).girth6 is True
    # 19 usable folded differences cannot host 33 distinct ones
    assert lift(proto, 20, rng_seed=0).girth6 is False


def test_lift_rejects_small_z():
    proto, _ = table1(5)
    with pytest.raises(ValueError):
        lift(proto, 2)
    with pytest.raises(ValueError):
        lift(proto, 0)


def test_has_4cycles_hand_cases():
    square = sp.csr_matrix(np.array([[1, 1], [1, 1]], dtype=np.uint8))
    assert has_4cycles(square) is True
    eye = sp.csr_matrix(np.eye(4, dtype=np.uint8))
    assert has_4cycles(eye) is False


def test_parity_check_save_load_roundtrip(tmp_path):
    proto, _ = table1(2)
    pc = lift(proto, 12, rng_seed=3)
    path = tmp_path / "pc.txt"
    save_parity_check(path, pc)
    back = load_parity_check_matrix(path)
    assert back.shape == pc.h.shape
    assert (back != pc.h).nnz == 0


def test_encoder_dimensions_and_zero_syndrome():
    proto, _ = table1(2)
    pc = lift(proto, 30, rng_seed=0)
    k = code_dimension(pc)
    assert k == pc.n - pc.m  # full-rank lift
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2, size=k).astype(np.uint8)
    cw = ldpc_encode(pc, u)
    assert cw.shape == (pc.n,)
    assert not syndrome(pc, cw).any()
    # systematic: info bits sit untouched on the information columns
    from porecode.ldpc import _encoder_of

    enc = _encoder_of(pc)
    assert np.array_equal(cw[enc["info_cols"]], u)


def test_encoder_linearity():
    proto, _ = table1(2)
    pc = lift(proto, 16, rng_seed=1)
    k = code_dimension(pc)
    rng = np.random.default_rng(2)
    u1 = rng.integers(0, 2, size=k).astype(np.uint8)
    u2 = rng.integers(0, 2, size=k).astype(np.uint8)
    cw = ldpc_encode(pc, u1) ^ ldpc_encode(pc, u2)
    assert np.array_equal(cw, ldpc_encode(pc, u1 ^ u2))


def test_encoder_rejects_bad_info():
    proto, _ = table1(2)
    pc = lift(proto, 10, rng_seed=0)
    with pytest.raises(ValueError):
        ldpc_encode(pc, np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValueError):
        ldpc_encode(pc, np.full(code_dimension(pc), 2, dtype=np.uint8))


def test_rank_deficiency_detected():
    # two circulants stacked on one base column: 2z rows, column space dim z
    proto = Protograph(np.array([[1], [1]]), Fraction(0, 1))
    pc = lift(proto, 4, rng_seed=0)
    with pytest.raises(RankDeficiencyError) as exc:
        code_dimension(pc)
    assert exc.value.deficiency >= 4


def _strong_llrs(cw, mag=8.0):
    return mag * (1.0 - 2.0 * cw.astype(np.float64))


def test_bp_noiseless_recovery():
    proto, _ = table1(2)
    pc = lift(proto, 30, rng_seed=0)
    rng = np.random.default_rng(3)
    u = rng.integers(0, 2, size=code_dimension(pc)).astype(np.uint8)
    cw = ldpc_encode(pc, u)
    hard, converged, iters = ldpc_decode(_strong_llrs(cw), pc)
    assert converged
    assert iters == 1
    assert np.array_equal(hard, cw)


def test_bp_all_zero_llrs_do_not_converge():
    proto, _ = table1(2)
    pc = lift(proto, 10, rng_seed=0)
    hard, converged, iters = ldpc_decode(np.zeros(pc.n), pc, max_iters=5)
    assert not converged  # zero totals are ties, not decisions
    assert iters == 5


def test_bp_corrects_single_weak_flip():
    proto, _ = table1(2)
    pc = lift(proto, 30, rng_seed=0)
    rng = np.random.default_rng(4)
    u = rng.integers(0, 2, size=code_dimension(pc)).astype(np.uint8)
    cw = ldpc_encode(pc, u)
    llr = _strong_llrs(cw)
    llr[17] = -0.5 * np.sign(llr[17])  # weak vote for the wrong value
    hard, converged, _ = ldpc_decode(llr, pc)
    assert converged
    assert np.array_equal(hard, cw)


def test_bp_deterministic():
    proto, _ = table1(2)
    pc = lift(proto, 20, rng_seed=0)
    rng = np.random.default_rng(5)
    llr = rng.normal(0.0, 2.0, size=pc.n)
    first = decode_with_totals(llr, pc)
    second = decode_with_totals(llr, pc)
    assert np.array_equal(first[0], second[0])
    assert first[1] == second[1] and first[2] == second[2]
    assert np.array_equal(first[3], second[3])


def test_bp_rejects_wrong_length():
    proto, _ = table1(2)
    pc = lift(proto, 10, rng_seed=0)
    with pytest.raises(ValueError):
        ldpc_decode(np.zeros(pc.n + 1), pc)


def test_gf4_decode_plane_codewords():
    proto, _ = table1(2)
    pc = lift(proto, 16, rng_seed=2)
    k = code_dimension(pc)
    rng = np.random.default_rng(6)
    hi = ldpc_encode(pc, rng.integers(0, 2, size=k).astype(np.uint8))
    lo = ldpc_encode(pc, rng.integers(0, 2, size=k).astype(np.uint8))
    symbols = (2 * hi + lo).astype(np.int64)
    soft = np.full((pc.n, 4), 0.03)
    soft[np.arange(pc.n), symbols] = 0.91
    hard, converged, _ = ldpc_decode_gf4(soft, pc)
    assert converged
    assert np.array_equal(hard, symbols)


def test_gf4_rejects_bad_shape():
    proto, _ = table1(2)
    pc = lift(proto, 8, rng_seed=0)
    with pytest.raises(ValueError):
        ldpc_decode_gf4(np.full((pc.n, 3), 1.0 / 3), pc)


def test_syndrome_hand_case():
    h = sp.csr_matrix(np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8))
    proto = Protograph(np.array([[1]]), Fraction(0, 1))
    pc = ParityCheck(h=h, z=1, protograph=proto, offsets=[], girth6=False)
    assert np.array_equal(syndrome(pc, np.array([1, 1, 0])), [0, 1])
    assert np.array_equal(syndrome(pc, np.array([1, 1, 1])), [0, 0])

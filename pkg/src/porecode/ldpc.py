"""Protograph-based outer LDPC code: lifting, encoding, decoding.

Base matrices come from a small fixed table (one design per read count M).
Lifting replaces every base edge with a Z x Z circulant permutation whose
offset is picked greedily to avoid 4-cycles; an independent certificate
re-checks the lifted graph. Encoding is systematic via one-time GF(2)
elimination on a bit-packed dense copy. Decoding is flooding sum-product
belief propagation on log-likelihood ratios ln(p0/p1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import _kernels as _k

BP_MAX_ITERS = 50
BP_CLAMP = 30.0

# parity of each byte value, used for packed GF(2) dot products
_PARITY = np.zeros(256, dtype=np.uint8)
for _v in range(256):
    _PARITY[_v] = bin(_v).count("1") & 1


@dataclass(frozen=True)
class Protograph:
    """Small base matrix with edge multiplicities and its outer code rate."""

    base: np.ndarray
    design_rate: Fraction

    def __post_init__(self):
        b = np.asarray(self.base, dtype=np.int64)
        if b.ndim != 2 or np.any(b < 0) or np.any(b > 3):
            raise ValueError("base matrix entries must be in 0..3")
        object.__setattr__(self, "base", b)

    @property
    def n_rows(self) -> int:
        return self.base.shape[0]

    @property
    def n_cols(self) -> int:
        return self.base.shape[1]


_TABLE1 = {
    1: ([[1, 2, 0, 1, 2, 2, 1, 1, 1, 3],
         [2, 0, 3, 2, 1, 0, 1, 2, 2, 0]], Fraction(6, 5)),
    2: ([[2, 2, 3, 3, 2, 3, 3, 3]], Fraction(21, 16)),
    5: ([[3, 2, 3, 3, 2, 2, 3, 3, 2, 2, 3, 3, 3, 2, 3]], Fraction(7, 5)),
}


def table1(m_reads: int):
    """Optimized protograph and overall rate (bits per DNA symbol) for M reads."""
    if m_reads not in _TABLE1:
        raise ValueError("no protograph tabulated for M=%r" % (m_reads,))
    base, overall = _TABLE1[m_reads]
    base = np.asarray(base, dtype=np.int64)
    rate = Fraction(base.shape[1] - base.shape[0], base.shape[1])
    return Protograph(base=base, design_rate=rate), overall


@dataclass
class ParityCheck:
    """Lifted quasi-cyclic parity-check matrix.

    h is the sparse binary matrix; offsets lists one (base_row, base_col,
    offset) triple per circulant, in placement order. girth6 records
    whether the greedy lift certified the absence of 4-cycles.
    """

    h: sp.csr_matrix
    z: int
    protograph: Protograph
    offsets: list
    girth6: bool
    _encoder: dict = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]


def _count_new_4cycles(edges, by_row, by_col, r1, c1, oa, z):
    """4-cycles a candidate circulant (r1, c1, oa) would close.

    Cells (r1, c1), (r1, c2), (r2, c1), (r2, c2) close a cycle when
    oa - ob + od - oc = 0 mod z, over distinct circulants.
    """
    count = 0
    for (c2, ob) in by_row.get(r1, ()):
        if c2 == c1 and ob == oa:
            continue
        for (r2, oc) in by_col.get(c1, ()):
            if r2 == r1 and oc == oa:
                continue
            want = (ob + oc - oa) % z
            for (rr, cc, od) in edges:
                if rr != r2 or cc != c2:
                    continue
                if od != want:
                    continue
                # all four circulants must be distinct placements
                quad = {(r1, c1, oa), (r1, c2, ob), (r2, c1, oc),
                        (r2, c2, od)}
                if len(quad) == 4:
                    count += 1
    return count


def has_4cycles(h: sp.spmatrix) -> bool:
    """Independent certificate: any column pair sharing two rows."""
    h = sp.csr_matrix(h)
    seen = set()
    for r in range(h.shape[0]):
        cols = h.indices[h.indptr[r]:h.indptr[r + 1]]
        for i in range(len(cols)):
            for j in range(i + 1, len(cols)):
                pair = (int(cols[i]), int(cols[j]))
                if pair in seen:
                    return True
                seen.add(pair)
    return False


def lift(protograph: Protograph, z: int, rng_seed: int = 0,
         max_restarts: int = 25) -> ParityCheck:
    """Expand each base edge into a Z x Z circulant with greedy offsets.

    The offset search is restarted with fresh candidate orders until it
    finds a 4-cycle-free assignment (or the restart budget runs out, in
    which case the best attempt is kept and girth6 stays False).
    """
    if z < 1:
        raise ValueError("lift factor must be >= 1")
    base = protograph.base
    if int(base.max(initial=0)) > z:
        raise ValueError("lift factor %d below max multiplicity %d"
                         % (z, int(base.max())))
    best_attempt = None
    for attempt in range(max(1, max_restarts)):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=rng_seed, spawn_key=(attempt,)))
        edges, clean = _greedy_offsets(base, z, rng)
        if best_attempt is None or clean:
            best_attempt = (edges, clean)
        if clean:
            break
    edges, clean = best_attempt
    rows = []
    cols = []
    shift = np.arange(z)
    for (r, c, off) in edges:
        # circulant: lifted row (r, i) connects lifted col (c, (i + off) % z)
        rows.append(r * z + shift)
        cols.append(c * z + (shift + off) % z)
    rows = np.concatenate(rows) if edges else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if edges else np.zeros(0, dtype=np.int64)
    data = np.ones(rows.shape[0], dtype=np.uint8)
    h = sp.csr_matrix((data, (rows, cols)),
                      shape=(base.shape[0] * z, base.shape[1] * z))
    h.sum_duplicates()
    if np.any(h.data > 1):
        raise ValueError("duplicate circulant offsets collided")
    girth6 = clean and not has_4cycles(h)
    return ParityCheck(h=h, z=z, protograph=protograph, offsets=edges,
                       girth6=girth6)


def _greedy_offsets(base, z, rng):
    """One greedy pass; returns (edges, True) if it stayed 4-cycle-free."""
    edges = []
    by_row = {}
    by_col = {}
    clean = True
    for r in range(base.shape[0]):
        for c in range(base.shape[1]):
            used = set()
            for _ in range(int(base[r, c])):
                best = None
                best_count = None
                for cand in rng.permutation(z):
                    cand = int(cand)
                    if cand in used:
                        continue
                    cycles = _count_new_4cycles(edges, by_row, by_col,
                                                r, c, cand, z)
                    if cycles == 0:
                        best, best_count = cand, 0
                        break
                    if best_count is None or cycles < best_count:
                        best, best_count = cand, cycles
                if best is None:
                    raise ValueError("no distinct offset left in cell "
                                     "(%d, %d)" % (r, c))
                if best_count:
                    clean = False
                used.add(best)
                edges.append((r, c, best))
                by_row.setdefault(r, []).append((c, best))
                by_col.setdefault(c, []).append((r, best))
    return edges, clean


def save_parity_check(path, pc: ParityCheck) -> None:
    """Sparse text export: `rows cols` header then one `r c` line per 1."""
    coo = pc.h.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write("%d %d\n" % (pc.m, pc.n))
        for i in order:
            fh.write("%d %d\n" % (coo.row[i], coo.col[i]))


def load_parity_check_matrix(path) -> sp.csr_matrix:
    with open(path) as fh:
        first = fh.readline().split()
        m, n = int(first[0]), int(first[1])
        rows = []
        cols = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
    data = np.ones(len(rows), dtype=np.uint8)
    return sp.csr_matrix((data, (rows, cols)), shape=(m, n))


class RankDeficiencyError(ValueError):
    def __init__(self, deficiency):
        self.deficiency = deficiency
        super().__init__("parity-check matrix is rank deficient by %d"
                         % deficiency)


def _pack_rows(dense_bits: np.ndarray) -> np.ndarray:
    return np.packbits(dense_bits.astype(np.uint8), axis=1)


def _build_encoder(pc: ParityCheck) -> dict:
    """One-time GF(2) elimination giving systematic encoding tables."""
    m, n = pc.m, pc.n
    rows = _pack_rows(pc.h.toarray())
    pivots = []
    pivot_of_row = np.full(m, -1, dtype=np.int64)
    rank = 0
    for col in range(n):
        if rank == m:
            break
        byte, bit = col >> 3, 7 - (col & 7)
        colbits = (rows[:, byte] >> bit) & 1
        cand = np.nonzero(colbits[rank:])[0]
        if cand.size == 0:
            continue
        pr = rank + int(cand[0])
        if pr != rank:
            tmp = rows[rank].copy()
            rows[rank] = rows[pr]
            rows[pr] = tmp
        hit = np.nonzero((rows[:, byte] >> bit) & 1)[0]
        hit = hit[hit != rank]
        if hit.size:
            rows[hit] ^= rows[rank]
        pivots.append(col)
        pivot_of_row[rank] = col
        rank += 1
    if rank < m:
        raise RankDeficiencyError(m - rank)
    pivots = np.asarray(pivots, dtype=np.int64)
    info_cols = np.setdiff1d(np.arange(n), pivots)
    # p = R u with R the RREF rows restricted to the information columns
    dense = np.unpackbits(rows, axis=1, count=n)
    r_bits = dense[:, info_cols]
    return {"pivots": pivots, "info_cols": info_cols,
            "r_packed": _pack_rows(r_bits), "k": int(info_cols.shape[0])}


def _encoder_of(pc: ParityCheck) -> dict:
    if pc._encoder is None:
        pc._encoder = _build_encoder(pc)
    return pc._encoder


def code_dimension(pc: ParityCheck) -> int:
    return _encoder_of(pc)["k"]


def ldpc_encode(pc: ParityCheck, info: np.ndarray) -> np.ndarray:
    """Systematic codeword with the info bits on the non-pivot columns."""
    enc = _encoder_of(pc)
    info = np.asarray(info, dtype=np.uint8).ravel()
    if info.shape[0] != enc["k"]:
        raise ValueError("expected %d information bits, got %d"
                         % (enc["k"], info.shape[0]))
    if np.any(info > 1):
        raise ValueError("information bits must be 0/1")
    u_packed = np.packbits(info)
    masked = np.bitwise_and(enc["r_packed"], u_packed[None, :])
    parity = _PARITY[masked].sum(axis=1, dtype=np.int64) & 1
    cw = np.zeros(pc.n, dtype=np.uint8)
    cw[enc["info_cols"]] = info
    cw[enc["pivots"]] = parity.astype(np.uint8)
    return cw


def syndrome(pc: ParityCheck, word: np.ndarray) -> np.ndarray:
    word = np.asarray(word, dtype=np.uint8)
    return np.asarray(pc.h.dot(word) & 1, dtype=np.uint8).ravel()


def _graph_arrays(pc: ParityCheck):
    h = pc.h
    chk_ptr = h.indptr.astype(np.int64)
    edge_var = h.indices.astype(np.int64)
    order = np.argsort(edge_var, kind="stable")
    counts = np.bincount(edge_var, minlength=pc.n)
    var_ptr = np.zeros(pc.n + 1, dtype=np.int64)
    np.cumsum(counts, out=var_ptr[1:])
    return chk_ptr, edge_var, var_ptr, order.astype(np.int64)


def ldpc_decode(soft: np.ndarray, pc: ParityCheck,
                max_iters: int = BP_MAX_ITERS, early_stop: bool = True):
    """Binary sum-product decoding of per-bit LLRs ln(p0/p1).

    Returns (hard bits, converged flag, iterations used). Non-convergence
    is reported, never raised.
    """
    hard, converged, iters, _ = decode_with_totals(
        soft, pc, max_iters=max_iters, early_stop=early_stop)
    return hard, converged, iters


def decode_with_totals(soft: np.ndarray, pc: ParityCheck,
                       max_iters: int = BP_MAX_ITERS,
                       early_stop: bool = True, clamp: float = BP_CLAMP):
    """ldpc_decode plus the final per-bit total LLRs."""
    llr = np.clip(np.asarray(soft, dtype=np.float64).ravel(), -clamp, clamp)
    if llr.shape[0] != pc.n:
        raise ValueError("LLR length %d does not match code length %d"
                         % (llr.shape[0], pc.n))
    chk_ptr, edge_var, var_ptr, var_eids = _graph_arrays(pc)
    total, hard, converged, iters = _k.bp_core(
        llr, chk_ptr, edge_var, var_ptr, var_eids, max_iters, clamp,
        early_stop)
    return hard, bool(converged), int(iters), total


def ldpc_decode_gf4(soft4: np.ndarray, pc: ParityCheck,
                    max_iters: int = BP_MAX_ITERS):
    """Symbol-level sum-product decoding over 2-bit symbols.

    Treats every parity check as a 4-ary XOR constraint on the symbols
    (componentwise GF(2) on the two bit planes). Check updates convolve
    message distributions under XOR via the length-4 Walsh-Hadamard
    transform. soft4 is an (n, 4) matrix of symbol probabilities. Runs in
    plain numpy regardless of the kernel backend.
    """
    probs = np.asarray(soft4, dtype=np.float64)
    if probs.shape != (pc.n, 4):
        raise ValueError("soft input must be (n, 4)")
    probs = np.clip(probs, 1e-300, None)
    probs = probs / probs.sum(axis=1, keepdims=True)
    h = pc.h
    chk_ptr = h.indptr
    edge_var = h.indices.astype(np.int64)
    chk_sizes = np.diff(chk_ptr)
    chk_of_edge = np.repeat(np.arange(pc.m), chk_sizes)
    starts = chk_ptr[:-1]
    n_edges = edge_var.shape[0]
    # WHT over the group (Z2)^2: H4[a, b] = (-1)^(popcount(a & b))
    a = np.arange(4)
    h4 = ((-1.0) ** np.array([[bin(x & y_).count("1") for y_ in a]
                              for x in a]))
    c2v = np.full((n_edges, 4), 0.25)
    converged = False
    iters = 0
    hard = probs.argmax(axis=1).astype(np.int64)
    for _ in range(max_iters):
        iters += 1
        log_c2v = np.log(c2v)
        post = np.log(probs).copy()
        np.add.at(post, edge_var, log_c2v)
        v2c = post[edge_var] - log_c2v
        v2c = np.exp(v2c - v2c.max(axis=1, keepdims=True))
        v2c = v2c / v2c.sum(axis=1, keepdims=True)
        spec = v2c @ h4
        # extrinsic spectral product per edge, with exact zero handling
        zero = np.abs(spec) < 1e-290
        safe = np.where(zero, 1.0, spec)
        logmag = np.log(np.abs(safe))
        sign = np.where(safe < 0, -1.0, 1.0)
        prod_log = np.add.reduceat(logmag, starts, axis=0)[chk_of_edge]
        prod_sign = np.multiply.reduceat(sign, starts, axis=0)[chk_of_edge]
        nzero = np.add.reduceat(zero.astype(np.int64), starts,
                                axis=0)[chk_of_edge]
        full = prod_sign * np.exp(prod_log)
        ext = np.where(nzero == 0, full / safe,
                       np.where((nzero == 1) & zero, full, 0.0))
        c2v = ext @ h4.T / 4.0
        c2v = np.clip(c2v, 1e-300, None)
        c2v = c2v / c2v.sum(axis=1, keepdims=True)
        post = np.log(probs).copy()
        np.add.at(post, edge_var, np.log(c2v))
        hard = post.argmax(axis=1).astype(np.int64)
        srt = np.sort(post, axis=1)
        tied = srt[:, -1] - srt[:, -2] == 0.0
        xors = np.bitwise_xor.reduceat(hard[edge_var], starts)
        if not xors.any() and not tied.any():
            converged = True
            break
    return hard, bool(converged), int(iters)

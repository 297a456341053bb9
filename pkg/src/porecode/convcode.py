"""Punctured rate-3/2 quaternary inner code.

A (1,1,2) convolutional code over two binary streams with generators 5 and 7
(octal), punctured with period 3 so that four of six coded bits survive per
period, packed into 2-bit DNA symbols (first surviving bit = high bit), then
terminated with two unpunctured zero-input steps and masked with a seeded
pseudo-random symbol offset. Three payload bits become two channel symbols,
plus two termination symbols per block.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PUNCTURE = ((1, 0, 1), (1, 1, 0))  # rows: v0, v1 keep-patterns over the period


@dataclass(frozen=True)
class ConvCodeSpec:
    """Inner-code parameters; the defaults are the only supported code."""

    generators: tuple = (0o5, 0o7)
    nu: int = 2
    puncture: tuple = PUNCTURE
    offset_seed: int = 0
    # (n, k_cc, m) quaternary notation: one symbol in, one out, memory two
    n: int = 1
    k_cc: int = 1
    m: int = 2

    def __post_init__(self):
        if self.generators != (0o5, 0o7) or self.nu != 2:
            raise ValueError("only the [5,7] octal, nu=2 code is supported")
        if self.puncture != PUNCTURE:
            raise ValueError("unsupported puncture matrix")

    @property
    def rate_bits_per_symbol(self) -> float:
        kept = sum(self.puncture[0]) + sum(self.puncture[1])
        return 2.0 * 3.0 / kept  # 3 payload bits per (kept/2) symbols


def conv_step(state: int, bit: int) -> tuple[int, int, int]:
    """One shift-register step. state = 2*u_{t-1} + u_{t-2}; returns
    (next_state, v0, v1) with v0 = u_t ^ u_{t-2}, v1 = u_t ^ u_{t-1} ^ u_{t-2}."""
    if not 0 <= state <= 3:
        raise ValueError(f"state {state} outside 0..3")
    if bit not in (0, 1):
        raise ValueError(f"bit {bit} not binary")
    u1 = (state >> 1) & 1
    u2 = state & 1
    v0 = bit ^ u2
    v1 = bit ^ u1 ^ u2
    return (bit << 1) | u1, v0, v1


def offset_sequence(seed: int, length: int) -> np.ndarray:
    """Deterministic pseudo-random quaternary mask (PCG64 under the hood)."""
    if length < 0:
        raise ValueError("length must be >= 0")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return rng.integers(0, 4, size=length, dtype=np.int8)


def encode_block(bits, spec: ConvCodeSpec) -> np.ndarray:
    """Encode one payload block into its channel word.

    The payload length must be a multiple of the puncture period (3). Output
    length is 2*len(bits)/3 + 2 quaternary symbols, offset already applied.
    """
    b = np.asarray(bits, dtype=np.int8)
    if b.ndim != 1:
        raise ValueError("payload must be one-dimensional")
    if b.size % 3 != 0:
        raise ValueError(f"payload length {b.size} not a multiple of 3")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise ValueError("payload must be binary")
    survivors = np.empty(b.size * 4 // 3 + 2 * spec.nu, dtype=np.int8)
    w = 0
    state = 0
    for t, bit in enumerate(b):
        phase = t % 3
        state, v0, v1 = conv_step(state, int(bit))
        if spec.puncture[0][phase]:
            survivors[w] = v0
            w += 1
        if spec.puncture[1][phase]:
            survivors[w] = v1
            w += 1
    for _ in range(spec.nu):
        state, v0, v1 = conv_step(state, 0)
        survivors[w] = v0
        survivors[w + 1] = v1
        w += 2
    assert state == 0, "termination failed to zero the register"
    symbols = (survivors[0::2] << 1) | survivors[1::2]
    return ((symbols + offset_sequence(spec.offset_seed, symbols.size)) % 4).astype(np.int8)


@dataclass
class BlockPlan:
    """How an outer codeword splits into inner-code blocks."""

    block_bit_lengths: list  # raw payload bits per block
    pad_bits: list  # known-zero bits appended to reach a multiple of 3
    channel_lengths: list  # emitted symbols per block, termination included

    @property
    def s(self) -> int:
        return len(self.block_bit_lengths)

    @property
    def total_payload_bits(self) -> int:
        return int(sum(self.block_bit_lengths))

    @property
    def total_channel_symbols(self) -> int:
        return int(sum(self.channel_lengths))

    def bit_ranges(self) -> list[tuple[int, int]]:
        out = []
        start = 0
        for nb in self.block_bit_lengths:
            out.append((start, start + nb))
            start += nb
        return out


def plan_blocks(outer_len_bits: int, block_payload_bits: int = 162) -> BlockPlan:
    """Greedy split: full blocks of block_payload_bits plus one residual.

    Residual payloads are padded with known zeros up to a multiple of 3; pad
    bits are encoded but carry no outer information.
    """
    if block_payload_bits < 1:
        raise ValueError("zero payload size")
    if outer_len_bits < 1:
        raise ValueError("outer codeword must have at least one bit")
    lengths = [block_payload_bits] * (outer_len_bits // block_payload_bits)
    residual = outer_len_bits % block_payload_bits
    if residual:
        lengths.append(residual)
    pads = [(3 - nb % 3) % 3 for nb in lengths]
    channel = [2 * (nb + pad) // 3 + 2 for nb, pad in zip(lengths, pads)]
    return BlockPlan(lengths, pads, channel)


# -- symbol-level section tables (shared by the encoder consistency tests,
# the trellis decoder and the enumeration oracle) ---------------------------

_SECTION_A = 0  # consumes bit 3p, emits (v0, v1) of step 1
_SECTION_B = 1  # consumes bits 3p+1, 3p+2, emits (v1 of step 2, v0 of step 3)
_SECTION_T = 2  # zero-input termination step, emits (v0, v1)


@dataclass
class SectionPlan:
    """Per-section branch tables of one coded block's symbol trellis.

    Arrays are indexed [section, state, branch]; branch priors multiply the
    priors of the consumed payload bits (section_bits, -1 padded).
    """

    n_sections: int
    n_states: int
    n_bits: int
    n_branches: np.ndarray  # int8 [T]
    next_state: np.ndarray  # int8 [T, S, 4]
    out_symbol: np.ndarray  # int8 [T, S, 4], offset applied
    section_bits: np.ndarray  # int32 [T, 2], payload bit ids, -1 padded
    branch_bit_values: np.ndarray  # int8 [T, 4, 2], -1 padded
    offsets: np.ndarray  # int8 [T]


def _phase_tables():
    """Enumerate the three section types from conv_step itself."""
    a_next = np.zeros((4, 2), dtype=np.int8)
    a_sym = np.zeros((4, 2), dtype=np.int8)
    b_next = np.zeros((4, 4), dtype=np.int8)
    b_sym = np.zeros((4, 4), dtype=np.int8)
    t_next = np.zeros((4, 1), dtype=np.int8)
    t_sym = np.zeros((4, 1), dtype=np.int8)
    for s in range(4):
        for u in range(2):
            ns, v0, v1 = conv_step(s, u)
            a_next[s, u] = ns
            a_sym[s, u] = (v0 << 1) | v1
        for u2 in range(2):
            for u3 in range(2):
                ns, _, v1_first = conv_step(s, u2)
                ns, v0_second, _ = conv_step(ns, u3)
                b = u2 * 2 + u3
                b_next[s, b] = ns
                b_sym[s, b] = (v1_first << 1) | v0_second
        ns, v0, v1 = conv_step(s, 0)
        t_next[s, 0] = ns
        t_sym[s, 0] = (v0 << 1) | v1
    return (a_next, a_sym), (b_next, b_sym), (t_next, t_sym)


def build_section_plan(n_bits: int, spec: ConvCodeSpec) -> SectionPlan:
    """Symbol trellis of a block with n_bits payload bits (multiple of 3)."""
    if n_bits % 3 != 0 or n_bits < 3:
        raise ValueError("section plan needs a positive multiple of 3 bits")
    (a_next, a_sym), (b_next, b_sym), (t_next, t_sym) = _phase_tables()
    t_total = 2 * n_bits // 3 + spec.nu
    offsets = offset_sequence(spec.offset_seed, t_total)
    nbr = np.zeros(t_total, dtype=np.int8)
    nxt = np.zeros((t_total, 4, 4), dtype=np.int8)
    sym = np.zeros((t_total, 4, 4), dtype=np.int8)
    bits = np.full((t_total, 2), -1, dtype=np.int32)
    vals = np.full((t_total, 4, 2), -1, dtype=np.int8)
    for t in range(t_total):
        period, half = divmod(t, 2)
        if t >= t_total - spec.nu:
            nbr[t] = 1
            nxt[t, :, :1] = t_next
            sym[t, :, :1] = t_sym
        elif half == 0:
            nbr[t] = 2
            nxt[t, :, :2] = a_next
            sym[t, :, :2] = a_sym
            bits[t, 0] = 3 * period
            vals[t, 0, 0] = 0
            vals[t, 1, 0] = 1
        else:
            nbr[t] = 4
            nxt[t] = b_next
            sym[t] = b_sym
            bits[t, 0] = 3 * period + 1
            bits[t, 1] = 3 * period + 2
            for b in range(4):
                vals[t, b, 0] = b >> 1
                vals[t, b, 1] = b & 1
        sym[t] = (sym[t] + offsets[t]) % 4
    return SectionPlan(t_total, 4, n_bits, nbr, nxt, sym, bits, vals, offsets)

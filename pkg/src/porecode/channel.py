"""Memory-k nanopore IDS channel: parameter tables and sampling.

The channel walks the input strand position by position and draws one event
per position, conditioned on the local k-mer context and on the previous
event. Events are Ins (a uniform burst of 2..l_max symbols followed by a
faithful copy of the current symbol), Del (nothing emitted), Sub (one wrong
symbol) and NoErr (faithful copy). Four position regions carry separate
tables: the first position (begin, conditioned on a Start sentinel), the
positions before a full k-mer exists (prefix), the bulk (middle, 4^k
contexts) and the last position (end). Prefix, begin and end condition on
the single current symbol only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels
from ._kernels import EV_DEL, EV_INS, EV_NOERR, EV_START, EV_SUB

ALPHABET = "ACGT"
_CHAR_TO_SYM = {c: i for i, c in enumerate(ALPHABET)}
_CHAR_TO_SYM.update({c.lower(): i for i, c in enumerate(ALPHABET)})

EVENT_NAMES = ("Ins", "Del", "Sub", "NoErr")
START_NAME = "Start"


class EventKind(IntEnum):
    INS = EV_INS
    DEL = EV_DEL
    SUB = EV_SUB
    NO_ERR = EV_NOERR


# previous-event index used before the first position
START = EV_START


class PositionClass(IntEnum):
    BEGIN = _kernels.REG_BEGIN
    PREFIX = _kernels.REG_PREFIX
    MIDDLE = _kernels.REG_MIDDLE
    END = _kernels.REG_END


_REGION_NAMES = ("begin", "prefix", "middle", "end")


def as_seq(x) -> np.ndarray:
    """Coerce an ACGT string or an int iterable to an int8 symbol array."""
    if isinstance(x, str):
        try:
            vals = [_CHAR_TO_SYM[c] for c in x]
        except KeyError as e:
            raise ValueError(f"illegal nucleotide {e.args[0]!r}") from None
        return np.asarray(vals, dtype=np.int8)
    arr = np.asarray(x, dtype=np.int8)
    if arr.ndim != 1:
        raise ValueError("sequence must be one-dimensional")
    if arr.size and (arr.min() < 0 or arr.max() > 3):
        raise ValueError("symbols must lie in 0..3")
    return arr


def seq_to_str(x: np.ndarray) -> str:
    return "".join(ALPHABET[int(v)] for v in x)


def classify_position(i: int, k: int, n: int) -> PositionClass:
    """Region of 1-based position i in a length-n strand under memory k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= i <= n:
        raise ValueError(f"position {i} outside 1..{n}")
    return PositionClass(_kernels._region_of(i, k, n))


def kmer_context(x, i: int, k: int) -> tuple:
    """Context conditioning position i: the k-mer ending at i in the middle
    region, the single symbol x_i elsewhere."""
    seq = as_seq(x)
    n = seq.shape[0]
    reg = classify_position(i, k, n)
    if reg == PositionClass.MIDDLE:
        return tuple(int(v) for v in seq[i - k:i])
    return (int(seq[i - 1]),)


@dataclass
class EventTrace:
    """Per-position event record of one channel use (or one alignment)."""

    events: np.ndarray  # int8, EventKind codes
    ins_lens: np.ndarray  # int32, burst length where Ins, else 0

    def __len__(self) -> int:
        return int(self.events.shape[0])

    def op_count(self) -> int:
        """Edit operations implied: Del and Sub count one, Ins counts its
        burst length, NoErr counts zero."""
        ops = int(np.sum(self.events == EV_DEL) + np.sum(self.events == EV_SUB))
        ops += int(self.ins_lens[self.events == EV_INS].sum())
        return ops

    def emitted_length(self, n: int | None = None) -> int:
        """Length of the output a channel trace implies for its input."""
        if n is None:
            n = len(self)
        dels = int(np.sum(self.events == EV_DEL))
        return n - dels + int(self.ins_lens[self.events == EV_INS].sum())

    def as_tuples(self) -> list:
        out = []
        for ev, ell in zip(self.events, self.ins_lens):
            kind = EventKind(int(ev))
            out.append((kind, int(ell)) if kind == EventKind.INS else (kind, None))
        return out

    def check_channel_invariants(self, l_max: int) -> list[str]:
        """Violations of the channel-generated trace contract (empty if ok)."""
        bad = []
        for t in range(len(self)):
            ev = int(self.events[t])
            ell = int(self.ins_lens[t])
            if ev == EV_INS and not 2 <= ell <= l_max:
                bad.append(f"position {t + 1}: Ins length {ell} outside 2..{l_max}")
            if ev != EV_INS and ell != 0:
                bad.append(f"position {t + 1}: non-Ins event carries length {ell}")
        return bad


@dataclass
class ChannelParams:
    """Event, insertion-length and substitution tables for all four regions.

    Array layout (C = 4^k):
      event_table  [4, C, 5, 4]  region, context, previous event (4 = Start),
                                 event; begin uses only the Start row, the
                                 other regions only the four event rows.
      ins_len_table [4, C, l_max-1]  distribution of the burst length 2..l_max.
      sub_table    [4, C, 4, 4]  rows: true symbol -> substitute, zero diagonal.
    Regions other than middle use only context indices 0..3 (single symbols).
    """

    k: int
    l_max: int
    event_table: np.ndarray
    ins_len_table: np.ndarray
    sub_table: np.ndarray

    @property
    def n_contexts(self) -> int:
        return 4 ** self.k

    def copy(self) -> "ChannelParams":
        return ChannelParams(self.k, self.l_max, self.event_table.copy(),
                             self.ins_len_table.copy(), self.sub_table.copy())

    def canonical(self) -> "ChannelParams":
        """Copy with every unreachable table slot reset to its uniform default.

        Unreachable slots: the non-Start prev-event rows of the begin region
        (position 1 always follows the start sentinel), the Start row of
        every other region, and context slots >= 4 of the single-symbol
        regions. No sampler or decoder reads them, and the JSON form omits
        them, so keeping them uniform makes save/load an exact round trip.
        """
        out = self.copy()
        u = ChannelParams.uniform(self.k, self.l_max)
        b = PositionClass.BEGIN
        out.event_table[b, :, :EV_START] = u.event_table[b, :, :EV_START]
        for r in range(4):
            if r != b:
                out.event_table[r, :, EV_START] = u.event_table[r, :, EV_START]
            if r != PositionClass.MIDDLE and self.n_contexts > 4:
                out.event_table[r, 4:] = u.event_table[r, 4:]
                out.ins_len_table[r, 4:] = u.ins_len_table[r, 4:]
                out.sub_table[r, 4:] = u.sub_table[r, 4:]
        return out

    @classmethod
    def uniform(cls, k: int, l_max: int) -> "ChannelParams":
        """All events equiprobable, uniform burst lengths and substitutes."""
        c = 4 ** k
        ev = np.full((4, c, 5, 4), 0.25)
        il = np.full((4, c, l_max - 1), 1.0 / (l_max - 1))
        sb = np.full((4, c, 4, 4), 1.0 / 3.0)
        for a in range(4):
            sb[:, :, a, a] = 0.0
        return cls(k, l_max, ev, il, sb)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        regions = {}
        for r, rname in enumerate(_REGION_NAMES):
            n_ctx = self.n_contexts if r == PositionClass.MIDDLE else 4
            width = self.k if r == PositionClass.MIDDLE else 1
            ctxs = {}
            for c in range(n_ctx):
                key = _ctx_to_str(c, width)
                if r == PositionClass.BEGIN:
                    rows = {START_NAME: self.event_table[r, c, EV_START].tolist()}
                else:
                    rows = {EVENT_NAMES[z]: self.event_table[r, c, z].tolist()
                            for z in range(4)}
                ctxs[key] = {
                    "event_probs": rows,
                    "ins_len_probs": self.ins_len_table[r, c].tolist(),
                    "sub_probs": self.sub_table[r, c].tolist(),
                }
            regions[rname] = ctxs
        return {"k": self.k, "l_max": self.l_max, "regions": regions}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ChannelParams":
        k = int(doc["k"])
        l_max = int(doc["l_max"])
        if k < 1:
            raise ValueError("k must be >= 1")
        if l_max < 2:
            raise ValueError("l_max must be >= 2")
        out = cls.uniform(k, l_max)
        regions = doc["regions"]
        for r, rname in enumerate(_REGION_NAMES):
            n_ctx = 4 ** k if r == PositionClass.MIDDLE else 4
            width = k if r == PositionClass.MIDDLE else 1
            ctxs = regions[rname]
            if len(ctxs) != n_ctx:
                raise ValueError(f"region {rname}: expected {n_ctx} contexts, "
                                 f"got {len(ctxs)}")
            for key, entry in ctxs.items():
                c = _ctx_from_str(key, width, rname)
                rows = entry["event_probs"]
                if r == PositionClass.BEGIN:
                    out.event_table[r, c, EV_START] = rows[START_NAME]
                else:
                    for z in range(4):
                        out.event_table[r, c, z] = rows[EVENT_NAMES[z]]
                il = np.asarray(entry["ins_len_probs"], dtype=np.float64)
                if il.shape != (l_max - 1,):
                    raise ValueError(f"region {rname} ctx {key}: ins_len_probs "
                                     f"must have {l_max - 1} entries")
                out.ins_len_table[r, c] = il
                sb = np.asarray(entry["sub_probs"], dtype=np.float64)
                if sb.shape != (4, 4):
                    raise ValueError(f"region {rname} ctx {key}: sub_probs must "
                                     f"be 4x4")
                out.sub_table[r, c] = sb
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ChannelParams":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _ctx_to_str(c: int, width: int) -> str:
    digits = []
    v = c
    for _ in range(width):
        digits.append(v % 4)
        v //= 4
    return "".join(ALPHABET[d] for d in reversed(digits))


def _ctx_from_str(key: str, width: int, rname: str) -> int:
    if len(key) != width:
        raise ValueError(f"region {rname}: context {key!r} must have length {width}")
    c = 0
    for ch in key:
        if ch not in _CHAR_TO_SYM:
            raise ValueError(f"region {rname}: illegal context symbol {ch!r}")
        c = c * 4 + _CHAR_TO_SYM[ch]
    return c


def validate(params: ChannelParams) -> list[str]:
    """Named contract violations; an empty list means the tables are sound.

    Only rows the channel can reach are checked: the begin region's Start row
    and the other regions' four event rows.
    """
    out = []
    k, l_max = params.k, params.l_max
    if k < 1:
        out.append("k must be >= 1")
        return out
    if l_max < 2:
        out.append("l_max must be >= 2")
        return out
    c_mid = 4 ** k
    shapes = {
        "event_table": (4, c_mid, 5, 4),
        "ins_len_table": (4, c_mid, l_max - 1),
        "sub_table": (4, c_mid, 4, 4),
    }
    for name, want in shapes.items():
        got = getattr(params, name).shape
        if got != want:
            out.append(f"{name} shape {got}, expected {want}")
    if out:
        return out

    def check_row(row, what, allow_zero=False):
        if np.any(row < -1e-15) or np.any(row > 1 + 1e-12):
            out.append(f"{what}: probabilities outside [0, 1]")
            return
        s = float(row.sum())
        if allow_zero and s == 0.0:
            return
        if abs(s - 1.0) > 1e-9:
            out.append(f"{what}: row sums to {s:.12g}")

    for r, rname in enumerate(_REGION_NAMES):
        n_ctx = c_mid if r == PositionClass.MIDDLE else 4
        width = k if r == PositionClass.MIDDLE else 1
        prevs = [EV_START] if r == PositionClass.BEGIN else list(range(4))
        for c in range(n_ctx):
            key = _ctx_to_str(c, width)
            for z in prevs:
                zname = START_NAME if z == EV_START else EVENT_NAMES[z]
                check_row(params.event_table[r, c, z],
                          f"{rname} ctx={key} prev={zname} event row")
            check_row(params.ins_len_table[r, c],
                      f"{rname} ctx={key} ins_len row")
            for a in range(4):
                sub_row = params.sub_table[r, c, a]
                if sub_row[a] != 0.0:
                    out.append(f"{rname} ctx={key} sub row {ALPHABET[a]}: "
                               f"mass {sub_row[a]:.3g} on the true symbol")
                check_row(sub_row, f"{rname} ctx={key} sub row {ALPHABET[a]}",
                          allow_zero=False)
    return out


def marginal_event_rates(params: ChannelParams) -> np.ndarray:
    """Stationary event distribution of the middle region, contexts weighted
    uniformly. Entry order matches EventKind (Ins, Del, Sub, NoErr)."""
    kern = params.event_table[PositionClass.MIDDLE, :, :4, :].mean(axis=0)
    pi = np.full(4, 0.25)
    for _ in range(500):
        nxt = pi @ kern
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < 1e-14:
            pi = nxt
            break
        pi = nxt
    return pi


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def transmit(x, params: ChannelParams, rng_seed) -> tuple[np.ndarray, EventTrace]:
    """One channel use. Returns the read and the event trace that made it."""
    seq = as_seq(x)
    if seq.shape[0] == 0:
        raise ValueError("empty input strand")
    rng = _rng_from(rng_seed)
    budget = seq.shape[0] * (2 + params.l_max) + 8
    uniforms = rng.random(budget)
    y, ny, events, ins_lens = _kernels.transmit_core(
        seq, params.k, params.l_max, params.event_table,
        params.ins_len_table, params.sub_table, uniforms)
    return y[:ny].copy(), EventTrace(events, ins_lens)


def transmit_multi(x, params: ChannelParams, m_reads: int, rng_seed) -> list:
    """m_reads independent channel uses of the same strand."""
    if m_reads < 1:
        raise ValueError("m_reads must be >= 1")
    if isinstance(rng_seed, np.random.SeedSequence):
        ss = rng_seed
    else:
        ss = np.random.SeedSequence(rng_seed)
    return [transmit(x, params, child) for child in ss.spawn(m_reads)]

"""Channel-parameter estimation from reference/read pairs.

Each read is aligned to its reference on a unit-cost edit lattice; one
optimal path is drawn with uniform random tie-breaking and projected onto
per-position channel events, which are then counted per region, context and
previous event. Alignment paths can imply insertion bursts of length 1 or
longer than l_max, which the channel itself never produces; those lengths
are clamped into range by default (see `estimate`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import EV_START, REG_BEGIN, REG_MIDDLE
from .channel import ChannelParams, EventTrace, as_seq


@dataclass
class DatasetRecord:
    """One reference strand and the reads attributed to it."""

    ref_id: str
    ref: np.ndarray
    reads: list = field(default_factory=list)


@dataclass
class Lattice:
    """Edit lattice of one (reference, read) pair: cost and, per cell, the
    set of cost-achieving predecessor moves (bit 1 diagonal, 2 up/deletion,
    4 left/insertion)."""

    x: np.ndarray
    y: np.ndarray
    cost: np.ndarray
    moves: np.ndarray

    @property
    def distance(self) -> int:
        return int(self.cost[-1, -1])


def lattice(x, y) -> Lattice:
    """Fill the edit lattice for reference x and read y."""
    xs = as_seq(x)
    ys = as_seq(y)
    if xs.shape[0] == 0:
        raise ValueError("empty reference")
    cost, moves = _kernels.lattice_fill(xs, ys)
    return Lattice(xs, ys, cost, moves)


def _rich_backtrack(lat: Lattice, rng: np.random.Generator):
    budget = lat.x.shape[0] + lat.y.shape[0] + 2
    uniforms = rng.random(budget)
    moves = _kernels.backtrack_moves(lat.moves, uniforms)
    return _kernels.moves_to_events(moves, lat.x, lat.y)


def backtrack(lat: Lattice, rng_seed) -> EventTrace:
    """Draw one optimal alignment path and project it to channel events.

    Tie-breaks are uniform over the cost-achieving moves of each cell. The
    returned trace satisfies op_count() == lat.distance, with raw insertion
    lengths (possibly outside the channel's [2, l_max] range).
    """
    if isinstance(rng_seed, np.random.Generator):
        rng = rng_seed
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    events, ins_lens, _ = _rich_backtrack(lat, rng)
    return EventTrace(events, ins_lens)


@dataclass
class CountTable:
    """Raw event/length/substitute counts in the ChannelParams layout."""

    k: int
    l_max: int
    event_counts: np.ndarray
    ins_len_counts: np.ndarray
    sub_counts: np.ndarray

    @classmethod
    def zeros(cls, k: int, l_max: int) -> "CountTable":
        c = 4 ** k
        return cls(k, l_max,
                   np.zeros((4, c, 5, 4)),
                   np.zeros((4, c, l_max - 1)),
                   np.zeros((4, c, 4, 4)))

    def merge(self, other: "CountTable") -> None:
        if (self.k, self.l_max) != (other.k, other.l_max):
            raise ValueError("count tables disagree on k or l_max")
        self.event_counts += other.event_counts
        self.ins_len_counts += other.ins_len_counts
        self.sub_counts += other.sub_counts

    @property
    def n_events(self) -> int:
        return int(self.event_counts.sum())


@dataclass
class EstimateStats:
    n_refs: int = 0
    n_reads: int = 0
    n_positions: int = 0
    edit_distance_total: int = 0
    raw_short_ins: int = 0
    raw_long_ins: int = 0
    fallback_event_rows: int = 0
    fallback_ins_rows: int = 0
    fallback_sub_rows: int = 0

    @property
    def mean_edit_distance(self) -> float:
        return self.edit_distance_total / max(self.n_reads, 1)


def estimate(data, k: int, l_max: int, rng_seed=0, single_ins: str = "clamp",
             epsilon: float = 1e-6) -> ChannelParams:
    """Estimate channel tables of memory k from aligned reference/read pairs.

    single_ins: what to do with alignment-implied burst lengths outside
    [2, l_max]; "clamp" snaps them to the nearest legal length, "discard"
    drops them from the length table only. Contexts with no observations fall
    back to the region aggregate, then to uniform; every row gets additive
    smoothing `epsilon` before normalization.
    """
    params, _, _ = estimate_with_stats(data, k, l_max, rng_seed, single_ins,
                                       epsilon)
    return params


def estimate_with_stats(data, k: int, l_max: int, rng_seed=0,
                        single_ins: str = "clamp", epsilon: float = 1e-6):
    """As `estimate`, also returning the CountTable and an EstimateStats."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if l_max < 2:
        raise ValueError("l_max must be >= 2")
    if single_ins not in ("clamp", "discard"):
        raise ValueError(f"unknown single_ins policy {single_ins!r}")
    discard = single_ins == "discard"
    counts = CountTable.zeros(k, l_max)
    stats = EstimateStats()
    aux = np.zeros(2, dtype=np.int64)
    for l, rec in enumerate(data):
        xs = as_seq(rec.ref)
        stats.n_refs += 1
        for j, read in enumerate(rec.reads):
            ys = as_seq(read)
            lat = lattice(xs, ys)
            child = np.random.SeedSequence(entropy=rng_seed, spawn_key=(l, j))
            rng = np.random.Generator(np.random.PCG64(child))
            events, ins_lens, subs = _rich_backtrack(lat, rng)
            _kernels.count_trace(xs, events, ins_lens, subs, k, l_max, discard,
                                 counts.event_counts, counts.ins_len_counts,
                                 counts.sub_counts, aux)
            stats.n_reads += 1
            stats.n_positions += xs.shape[0]
            stats.edit_distance_total += lat.distance
    if stats.n_reads == 0:
        raise ValueError("dataset contains no reads")
    stats.raw_short_ins = int(aux[0])
    stats.raw_long_ins = int(aux[1])
    params = _normalize(counts, epsilon, stats)
    return params, counts, stats


def _smooth_row(row, eps, mask=None):
    if mask is None:
        sm = row + eps
    else:
        sm = row + eps * mask
    return sm / sm.sum()


def _normalize(counts: CountTable, eps: float, stats: EstimateStats) -> ChannelParams:
    k, l_max = counts.k, counts.l_max
    params = ChannelParams.uniform(k, l_max)
    offdiag = 1.0 - np.eye(4)
    for r in range(4):
        n_ctx = 4 ** k if r == REG_MIDDLE else 4
        prevs = [EV_START] if r == REG_BEGIN else [0, 1, 2, 3]
        agg_event = counts.event_counts[r, :n_ctx].sum(axis=0)
        agg_ins = counts.ins_len_counts[r, :n_ctx].sum(axis=0)
        agg_sub = counts.sub_counts[r, :n_ctx].sum(axis=0)
        for c in range(n_ctx):
            for z in prevs:
                row = counts.event_counts[r, c, z]
                if row.sum() == 0.0:
                    stats.fallback_event_rows += 1
                    row = agg_event[z]
                if row.sum() == 0.0:
                    params.event_table[r, c, z] = 0.25
                else:
                    params.event_table[r, c, z] = _smooth_row(row, eps)
            row = counts.ins_len_counts[r, c]
            if row.sum() == 0.0:
                stats.fallback_ins_rows += 1
                row = agg_ins
            if row.sum() == 0.0:
                params.ins_len_table[r, c] = 1.0 / (l_max - 1)
            else:
                params.ins_len_table[r, c] = _smooth_row(row, eps)
            for a in range(4):
                row = counts.sub_counts[r, c, a]
                if row.sum() == 0.0:
                    stats.fallback_sub_rows += 1
                    row = agg_sub[a]
                if row.sum() == 0.0:
                    urow = np.full(4, 1.0 / 3.0)
                    urow[a] = 0.0
                    params.sub_table[r, c, a] = urow
                else:
                    mask = offdiag[a]
                    params.sub_table[r, c, a] = _smooth_row(row, eps, mask)
    return params


def ingest(refs_path, reads_path) -> list[DatasetRecord]:
    """Parse whitespace-separated `id sequence` files into dataset records.

    Every read's id must name a reference; references with no reads are kept
    (downstream consumers decide whether that is an error).
    """
    refs: dict[str, np.ndarray] = {}
    order: list[str] = []
    with open(refs_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{refs_path}:{lineno}: expected 'id sequence', "
                                 f"got {len(parts)} fields")
            rid, seq = parts
            if rid in refs:
                raise ValueError(f"{refs_path}:{lineno}: duplicate reference id {rid!r}")
            try:
                refs[rid] = as_seq(seq)
            except ValueError as e:
                raise ValueError(f"{refs_path}:{lineno}: {e}") from None
            order.append(rid)
    if not order:
        raise ValueError(f"{refs_path}: no references")
    reads: dict[str, list[np.ndarray]] = {rid: [] for rid in order}
    with open(reads_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{reads_path}:{lineno}: expected 'id sequence', "
                                 f"got {len(parts)} fields")
            rid, seq = parts
            if rid not in refs:
                raise ValueError(f"{reads_path}:{lineno}: unknown reference id {rid!r}")
            try:
                reads[rid].append(as_seq(seq))
            except ValueError as e:
                raise ValueError(f"{reads_path}:{lineno}: {e}") from None
    return [DatasetRecord(rid, refs[rid], reads[rid]) for rid in order]

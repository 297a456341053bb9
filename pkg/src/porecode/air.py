"""Monte-Carlo achievable-rate estimates for the memory-k channel.

Estimates the rate of a decoder that computes symbolwise posteriors once
per read and combines them across reads (no iteration with the outer
code). Sequences are drawn either from the model channel or from ingested
dataset records; the decoding metric can differ from the generating
channel, which covers the mismatched and context-free baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, transmit, validate
from .convcode import ConvCodeSpec, encode_block
from .estimate import DatasetRecord
from .trellis import (BlockStructure, DriftWindowError,
                      InfeasibleObservationError, app_single,
                      default_drift_window)

APP_FLOOR = 1e-300


@dataclass
class AirConfig:
    """One rate-estimation cell.

    source is "model" (sequences drawn from channel_params) or "dataset"
    (references and reads from records). decoder_params is the metric the
    decoder uses; leaving it None means matched decoding. inner selects
    the convolutional inner code; None measures the uncoded channel.
    """

    channel_params: ChannelParams | None = None
    decoder_params: ChannelParams | None = None
    source: str = "model"
    records: list = None
    m_reads: int = 1
    inner: ConvCodeSpec | None = None
    payload_bits: int = 162
    n_symbols: int = 110
    num_sequences: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.source not in ("model", "dataset"):
            raise ValueError("source must be 'model' or 'dataset'")
        if self.m_reads < 1 or self.num_sequences < 1:
            raise ValueError("m_reads and num_sequences must be >= 1")
        if self.source == "model" and self.channel_params is None:
            raise ValueError("model source needs channel_params")
        if self.source == "dataset" and not self.records:
            raise ValueError("dataset source needs records")
        if self.decoder_params is None:
            if self.channel_params is None:
                raise ValueError("need decoder_params for dataset source")
            self.decoder_params = self.channel_params


@dataclass
class AirResult:
    rate: float
    stderr: float
    contributions: np.ndarray
    sequence_ids: np.ndarray
    n_used: int
    skipped_short: int = 0
    skipped_window: int = 0
    skipped_infeasible: int = 0

    @property
    def skipped_frames(self) -> int:
        return self.skipped_short + self.skipped_window \
            + self.skipped_infeasible


def llrs(apps) -> np.ndarray:
    """Natural-log likelihood ratios against symbol 0, summed over reads.

    apps is one (n, A) posterior matrix or a list of them (one per read).
    Rows are floored so hard zeros stay finite.
    """
    if isinstance(apps, np.ndarray) and apps.ndim == 2:
        apps = [apps]
    out = None
    for a in apps:
        a = np.clip(np.asarray(a, dtype=np.float64), APP_FLOOR, None)
        contrib = np.log(a) - np.log(a[:, :1])
        out = contrib if out is None else out + contrib
    return out


def _sequence_rate(llr: np.ndarray, true_vals: np.ndarray,
                   nominal_rate: float, q_out: int,
                   n_known: int) -> float:
    """Per-sequence estimate in bits per channel symbol.

    llr rows cover the unknown symbols; n_known counts positions whose
    posterior is exactly a point mass on the truth (they add zero to the
    sum but enlarge the normalizer).
    """
    shifted = llr - llr.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1)) - \
        shifted[np.arange(llr.shape[0]), true_vals]
    total = -logsum.sum() / math.log(2.0)
    denom = llr.shape[0] + n_known
    return nominal_rate * math.log2(q_out) + nominal_rate * total / denom


def iid_baseline_params(params: ChannelParams) -> ChannelParams:
    """Collapse a memory-k table to a context-free, memory-free metric.

    Middle-region rows are averaged with uniform context weights and the
    stationary previous-event distribution; the single collapsed event
    row, insertion-length row, and substitution rows are replicated over
    every region, context, and previous event of a k=1 table.
    """
    from .channel import marginal_event_rates

    k = params.k
    n_ctx = 4 ** k
    w_prev = np.zeros(5)
    w_prev[:4] = marginal_event_rates(params)
    w_prev /= w_prev.sum()
    mid = params.event_table[2, :n_ctx]          # [C, 5, 4]
    event_row = np.einsum('czE,z->E', mid, w_prev) / n_ctx
    event_row = event_row / event_row.sum()
    ins_row = params.ins_len_table[2, :n_ctx].mean(axis=0)
    ins_row = ins_row / ins_row.sum()
    sub_rows = np.zeros((4, 4))
    for a in range(4):
        ctxs = [c for c in range(n_ctx) if c % 4 == a]
        sub_rows[a] = params.sub_table[2, ctxs, a].mean(axis=0)
        sub_rows[a, a] = 0.0
        sub_rows[a] /= sub_rows[a].sum()
    out = ChannelParams.uniform(1, params.l_max)
    out.event_table[:, :4] = event_row
    out.ins_len_table[:, :4] = ins_row
    for reg in range(4):
        out.sub_table[reg, :4] = sub_rows
    bad = validate(out)
    if bad:
        raise ValueError("collapsed parameters invalid: %s" % bad[0])
    return out


def _decode_frame(reads, structure, params, window):
    apps = []
    for y in reads:
        apps.append(app_single(y, structure, params, window=window))
    return apps


def bcjr_once_rate(cfg: AirConfig) -> AirResult:
    """Monte-Carlo rate of decode-once-and-combine over cfg's source."""
    if cfg.inner is not None:
        if cfg.payload_bits % 3 != 0:
            raise ValueError("payload_bits must be a multiple of 3")
        structure = BlockStructure.coded_block(cfg.payload_bits, cfg.inner)
        nominal = float(cfg.inner.rate_bits_per_symbol)
        q_out = 2
        n_known = cfg.inner.nu
    else:
        structure = None   # built per sequence (dataset lengths vary)
        nominal = 1.0
        q_out = 4
        n_known = 0

    contributions = []
    used_ids = []
    skipped_short = 0
    skipped_window = 0
    skipped_infeasible = 0

    if cfg.source == "model":
        if cfg.inner is None:
            structure = BlockStructure.uncoded_block(cfg.n_symbols)
        window = default_drift_window(structure.n_sections,
                                      cfg.decoder_params)
        for l in range(cfg.num_sequences):
            in_ss = np.random.SeedSequence(entropy=cfg.rng_seed,
                                           spawn_key=(l, 0))
            in_rng = np.random.default_rng(in_ss)
            if cfg.inner is not None:
                word = in_rng.integers(0, 2, size=cfg.payload_bits)
                x = encode_block(word, cfg.inner)
            else:
                word = in_rng.integers(0, 4, size=cfg.n_symbols)
                x = word.astype(np.int8)
            reads = []
            for j in range(cfg.m_reads):
                read_ss = np.random.SeedSequence(entropy=cfg.rng_seed,
                                                 spawn_key=(l, 1, j))
                y, _ = transmit(np.asarray(x, np.int8), cfg.channel_params,
                                rng_seed=read_ss)
                reads.append(y)
            try:
                apps = _decode_frame(reads, structure, cfg.decoder_params,
                                     window)
            except DriftWindowError:
                skipped_window += 1
                continue
            except InfeasibleObservationError:
                skipped_infeasible += 1
                continue
            llr = llrs(apps)
            contributions.append(_sequence_rate(
                llr, np.asarray(word, dtype=np.int64), nominal, q_out,
                n_known))
            used_ids.append(l)
    else:
        if cfg.inner is not None:
            raise ValueError("dataset source measures the raw channel; "
                             "set inner=None")
        n_cells = min(cfg.num_sequences, len(cfg.records))
        for l in range(n_cells):
            rec = cfg.records[l]
            if len(rec.reads) < cfg.m_reads:
                skipped_short += 1
                continue
            pick_rng = np.random.default_rng(np.random.SeedSequence(
                entropy=cfg.rng_seed, spawn_key=(l, 2)))
            idx = pick_rng.choice(len(rec.reads), size=cfg.m_reads,
                                  replace=False)
            x = np.asarray(rec.ref, dtype=np.int8)
            structure = BlockStructure.uncoded_block(x.shape[0])
            window = default_drift_window(x.shape[0], cfg.decoder_params)
            try:
                apps = _decode_frame([rec.reads[i] for i in idx], structure,
                                     cfg.decoder_params, window)
            except DriftWindowError:
                skipped_window += 1
                continue
            except InfeasibleObservationError:
                skipped_infeasible += 1
                continue
            llr = llrs(apps)
            contributions.append(_sequence_rate(
                llr, x.astype(np.int64), nominal, q_out, n_known))
            used_ids.append(l)

    contributions = np.asarray(contributions, dtype=np.float64)
    used_ids = np.asarray(used_ids, dtype=np.int64)
    n_used = contributions.shape[0]
    if n_used == 0:
        return AirResult(rate=float("nan"), stderr=float("nan"),
                         contributions=contributions,
                         sequence_ids=used_ids, n_used=0,
                         skipped_short=skipped_short,
                         skipped_window=skipped_window,
                         skipped_infeasible=skipped_infeasible)
    rate = float(contributions.mean())
    stderr = float(contributions.std(ddof=1) / math.sqrt(n_used)) \
        if n_used > 1 else 0.0
    return AirResult(rate=rate, stderr=stderr, contributions=contributions,
                     sequence_ids=used_ids, n_used=n_used,
                     skipped_short=skipped_short,
                     skipped_window=skipped_window,
                     skipped_infeasible=skipped_infeasible)


def paired_difference(res_a: AirResult, res_b: AirResult):
    """Mean and standard error of (b - a) over the common sequences.

    Pairs per-sequence contributions by sequence id, so frames skipped in
    only one run drop out of the comparison.
    """
    common, ia, ib = np.intersect1d(res_a.sequence_ids, res_b.sequence_ids,
                                    return_indices=True)
    if common.shape[0] < 2:
        raise ValueError("fewer than two common sequences to pair")
    d = res_b.contributions[ib] - res_a.contributions[ia]
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.shape[0]))

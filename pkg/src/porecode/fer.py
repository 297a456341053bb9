"""End-to-end frame-error-rate experiments for the concatenated scheme.

One frame: random payload -> outer LDPC encode -> split the codeword into
inner blocks -> convolutional encode each block (with its pseudo-random
offset) -> M channel reads per block -> per-read posteriors -> combine ->
outer belief propagation -> compare payload. Frames are independent with
a deterministic seed tree, so runs reproduce exactly and can be sharded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as _beta

from . import ldpc
from .air import llrs
from .channel import ChannelParams, transmit
from .convcode import ConvCodeSpec, encode_block, plan_blocks
from .trellis import (BlockStructure, DriftWindow, DriftWindowError,
                      InfeasibleObservationError, app_single,
                      default_drift_window)


@dataclass
class FerConfig:
    """One FER operating point."""

    channel_params: ChannelParams
    protograph_m: int = 5
    lift_z: int = 100
    lift_seed: int = 0
    m_reads: int = 1
    decoder_params: ChannelParams | None = None
    inner: ConvCodeSpec = None
    block_payload_bits: int = 162
    target_errors: int = 100
    max_frames: int = 1000
    rng_seed: int = 0
    window: DriftWindow | None = None
    bp_iters: int = ldpc.BP_MAX_ITERS

    def __post_init__(self):
        if self.decoder_params is None:
            self.decoder_params = self.channel_params
        if self.inner is None:
            self.inner = ConvCodeSpec()
        if self.m_reads < 1:
            raise ValueError("m_reads must be >= 1")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")


@dataclass
class FerResult:
    frames: int
    frame_errors: int
    fer: float
    ci_low: float
    ci_high: float
    window_violations: int = 0
    infeasible_reads: int = 0
    dead_blocks: int = 0
    bp_nonconverged: int = 0
    payload_bits: int = 0
    codeword_bits: int = 0


def clopper_pearson(errors: int, trials: int, conf: float = 0.95):
    """Exact binomial confidence interval."""
    if trials < 1:
        raise ValueError("need at least one trial")
    a = (1.0 - conf) / 2.0
    lo = 0.0 if errors == 0 else float(_beta.ppf(a, errors,
                                                 trials - errors + 1))
    hi = 1.0 if errors == trials else float(_beta.ppf(1.0 - a, errors + 1,
                                                      trials - errors))
    return lo, hi


class FerRunner:
    """Holds the code and per-block structures of one configuration."""

    def __init__(self, cfg: FerConfig):
        self.cfg = cfg
        pg, _ = ldpc.table1(cfg.protograph_m)
        self.pc = ldpc.lift(pg, cfg.lift_z, rng_seed=cfg.lift_seed)
        self.k_info = ldpc.code_dimension(self.pc)
        self.plan = plan_blocks(self.pc.n, cfg.block_payload_bits)
        self.structures = []
        self.priors = []
        self.real_bits = []
        for b, nbits in enumerate(self.plan.block_bit_lengths):
            pad = self.plan.pad_bits[b]
            spec = ConvCodeSpec(offset_seed=cfg.inner.offset_seed + b)
            st = BlockStructure.coded_block(nbits + pad, spec)
            pri = np.full((nbits + pad, 2), 0.5)
            if pad:
                pri[nbits:] = [1.0, 0.0]
            self.structures.append(st)
            self.priors.append(pri)
            self.real_bits.append(nbits)
        if cfg.window is not None:
            self.windows = [cfg.window] * len(self.structures)
        else:
            self.windows = [default_drift_window(st.n_sections,
                                                 cfg.decoder_params)
                            for st in self.structures]

    def encode_frame(self, payload: np.ndarray):
        cw = ldpc.ldpc_encode(self.pc, payload)
        strands = []
        for b, (lo, hi) in enumerate(self.plan.bit_ranges()):
            bits = np.zeros(self.structures[b].n_vars, dtype=np.int64)
            bits[:hi - lo] = cw[lo:hi]
            strands.append(encode_block(bits, self.structures[b].spec))
        return cw, strands

    def run_frame(self, frame_idx: int):
        """Returns (frame_error, diagnostics dict) for one frame."""
        cfg = self.cfg
        pay_rng = np.random.default_rng(np.random.SeedSequence(
            entropy=cfg.rng_seed, spawn_key=(frame_idx, 0)))
        payload = pay_rng.integers(0, 2, size=self.k_info).astype(np.uint8)
        cw, strands = self.encode_frame(payload)
        diag = {"window_violations": 0, "infeasible_reads": 0,
                "dead_blocks": 0, "bp_nonconverged": 0}
        outer_llr = np.zeros(self.pc.n)
        for b, x in enumerate(strands):
            apps = []
            for j in range(cfg.m_reads):
                read_ss = np.random.SeedSequence(
                    entropy=cfg.rng_seed, spawn_key=(frame_idx, 1, b, j))
                y, _ = transmit(np.asarray(x, np.int8), cfg.channel_params,
                                rng_seed=read_ss)
                try:
                    apps.append(app_single(y, self.structures[b],
                                           cfg.decoder_params,
                                           priors=self.priors[b],
                                           window=self.windows[b]))
                except DriftWindowError:
                    diag["window_violations"] += 1
                except InfeasibleObservationError:
                    diag["infeasible_reads"] += 1
            lo, hi = self.plan.bit_ranges()[b]
            if not apps:
                diag["dead_blocks"] += 1
                continue
            block_llr = llrs(apps)
            outer_llr[lo:hi] = -block_llr[:hi - lo, 1]
        hard, converged, _ = ldpc.ldpc_decode(outer_llr, self.pc,
                                              max_iters=cfg.bp_iters)
        if not converged:
            diag["bp_nonconverged"] += 1
        enc = ldpc._encoder_of(self.pc)
        err = not np.array_equal(hard[enc["info_cols"]], payload)
        return err, diag


def run_fer(cfg: FerConfig, progress=None) -> FerResult:
    """Run frames until the error target or the frame cap is reached."""
    runner = FerRunner(cfg)
    frames = 0
    errors = 0
    totals = {"window_violations": 0, "infeasible_reads": 0,
              "dead_blocks": 0, "bp_nonconverged": 0}
    while frames < cfg.max_frames and errors < cfg.target_errors:
        err, diag = runner.run_frame(frames)
        frames += 1
        errors += int(err)
        for key in totals:
            totals[key] += diag[key]
        if progress is not None and frames % 200 == 0:
            progress(frames, errors)
    lo, hi = clopper_pearson(errors, frames)
    return FerResult(frames=frames, frame_errors=errors,
                     fer=errors / frames, ci_low=lo, ci_high=hi,
                     payload_bits=runner.k_info, codeword_bits=runner.pc.n,
                     **totals)

"""Posterior symbol probabilities over the joint channel/code trellis.

A block of N channel symbols is decoded against a read y by a scaled
linear-domain forward-backward sweep over states (kmer window, previous
event, encoder state, drift). Drift d = (symbols of y consumed) - (input
positions advanced) is confined to a window around zero; the final drift
|y| - N is known, so decoding conditions on it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .channel import ChannelParams, EventKind, PositionClass, START, as_seq
from .channel import marginal_event_rates
from .convcode import ConvCodeSpec, build_section_plan


class DecodeError(Exception):
    """Base class for decoder failures on a frame."""


class DriftWindowError(DecodeError):
    """The read length puts the final drift outside the drift window."""


class InfeasibleObservationError(DecodeError):
    """No event trace inside the window explains the observation."""


@dataclass(frozen=True)
class DriftWindow:
    """Inclusive drift bounds tracked by the decoder, d_min <= 0 <= d_max."""

    d_min: int
    d_max: int

    def __post_init__(self):
        if self.d_min > 0 or self.d_max < 0:
            raise ValueError("drift window must contain 0")

    @property
    def width(self) -> int:
        return self.d_max - self.d_min + 1

    def contains(self, d: int) -> bool:
        return self.d_min <= d <= self.d_max


def default_drift_window(n: int, params: ChannelParams) -> DriftWindow:
    """Window sized from the larger of the marginal Ins/Del rates.

    Half-width ceil(5 * sqrt(n m / (1 - m))) with m = max(p_ins, p_del),
    which covers roughly five standard deviations of the final drift of an
    n-symbol block.
    """
    rates = marginal_event_rates(params)
    m = max(rates[int(EventKind.INS)], rates[int(EventKind.DEL)])
    if m >= 1.0:
        raise ValueError("marginal indel rate must be below 1")
    if m <= 0.0:
        half = 0
    else:
        half = math.ceil(5.0 * math.sqrt(n * m / (1.0 - m)))
    return DriftWindow(-half, half)


@dataclass(frozen=True)
class TrellisState:
    """One decoder state: kmer window, previous event, encoder state, drift.

    kmer holds the last (k-1) input symbols before the current section; the
    puncture phase is implied by the section index.
    """

    kmer: tuple
    z: int
    s: int = 0
    d: int = 0


def branch_metric(state: TrellisState, nstate: TrellisState, y_segment,
                  x_symbol: int, prior: float, params: ChannelParams,
                  region: PositionClass = PositionClass.MIDDLE) -> float:
    """Probability mass of one trellis transition, 0.0 if inconsistent.

    y_segment is the slice of the read consumed by the transition: empty
    for Del, one symbol for Sub/NoErr, burst plus copy for Ins. prior is
    the probability of the input choice that produced x_symbol.
    """
    seg = np.asarray(as_seq(y_segment) if isinstance(y_segment, str)
                     else y_segment, dtype=np.int64).ravel()
    k = params.k
    if len(state.kmer) != k - 1:
        return 0.0
    expect_kmer = (tuple(state.kmer) + (int(x_symbol),))[-(k - 1):] \
        if k > 1 else ()
    if tuple(nstate.kmer) != tuple(expect_kmer):
        return 0.0
    if region == PositionClass.MIDDLE:
        ctx = 0
        for sym in state.kmer:
            ctx = ctx * 4 + int(sym)
        ctx = ctx * 4 + int(x_symbol)
    else:
        ctx = int(x_symbol)
    r = int(region)
    ev_row = params.event_table[r, ctx, state.z]
    dd = nstate.d - state.d
    z2 = nstate.z
    if z2 == int(EventKind.DEL):
        if dd != -1 or seg.size != 0:
            return 0.0
        return prior * ev_row[int(EventKind.DEL)]
    if z2 == int(EventKind.NO_ERR):
        if dd != 0 or seg.size != 1 or seg[0] != x_symbol:
            return 0.0
        return prior * ev_row[int(EventKind.NO_ERR)]
    if z2 == int(EventKind.SUB):
        if dd != 0 or seg.size != 1 or seg[0] == x_symbol:
            return 0.0
        return prior * ev_row[int(EventKind.SUB)] \
            * params.sub_table[r, ctx, int(x_symbol), int(seg[0])]
    if z2 == int(EventKind.INS):
        ell = dd
        if ell < 2 or ell > params.l_max or seg.size != ell + 1:
            return 0.0
        if seg[-1] != x_symbol:
            return 0.0
        return prior * ev_row[int(EventKind.INS)] \
            * params.ins_len_table[r, ctx, ell - 2] * 0.25 ** ell
    return 0.0


@dataclass
class BlockStructure:
    """Branch tables of one block's symbol sections.

    Coded blocks follow the punctured convolutional code (with the
    pseudo-random offsets already folded into out_symbol); uncoded blocks
    have one 4-ary variable per section.
    """

    n_sections: int
    n_states: int
    n_vars: int
    alphabet: int
    coded: bool
    n_branches: np.ndarray
    next_state: np.ndarray
    out_symbol: np.ndarray
    section_bits: np.ndarray
    branch_bit_values: np.ndarray
    spec: ConvCodeSpec | None = None

    @classmethod
    def coded_block(cls, n_bits: int,
                    spec: ConvCodeSpec | None = None) -> "BlockStructure":
        spec = spec if spec is not None else ConvCodeSpec()
        plan = build_section_plan(n_bits, spec)
        return cls(n_sections=plan.n_sections, n_states=plan.n_states,
                   n_vars=n_bits, alphabet=2, coded=True,
                   n_branches=plan.n_branches, next_state=plan.next_state,
                   out_symbol=plan.out_symbol,
                   section_bits=plan.section_bits,
                   branch_bit_values=plan.branch_bit_values, spec=spec)

    @classmethod
    def uncoded_block(cls, n: int) -> "BlockStructure":
        if n < 1:
            raise ValueError("block needs at least one symbol")
        nbr = np.full(n, 4, dtype=np.int8)
        nxt = np.zeros((n, 1, 4), dtype=np.int8)
        sym = np.tile(np.arange(4, dtype=np.int8), (n, 1)).reshape(n, 1, 4)
        bits = np.full((n, 2), -1, dtype=np.int32)
        bits[:, 0] = np.arange(n)
        vals = np.full((n, 4, 2), -1, dtype=np.int8)
        vals[:, :, 0] = np.arange(4, dtype=np.int8)
        return cls(n_sections=n, n_states=1, n_vars=n, alphabet=4,
                   coded=False, n_branches=nbr, next_state=nxt,
                   out_symbol=sym, section_bits=bits,
                   branch_bit_values=vals, spec=None)


@dataclass
class Workspace:
    """Forward quantities kept after a decode, for inspection and tests.

    alphas[t] is the scaled state distribution entering section t, flat
    over ((w * 5 + z) * S + s) * width + (d - d_min). Backward messages are
    streamed and not retained.
    """

    alphas: np.ndarray
    scales: np.ndarray
    window: DriftWindow
    wmod: int
    n_states: int

    def alpha_grid(self, t: int) -> np.ndarray:
        return self.alphas[t].reshape(self.wmod, 5, self.n_states,
                                      self.window.width)


def _branch_priors(structure: BlockStructure, priors: np.ndarray) -> np.ndarray:
    t_total = structure.n_sections
    out = np.zeros((t_total, 4))
    for t in range(t_total):
        for b in range(int(structure.n_branches[t])):
            p = 1.0
            for j in range(2):
                var = int(structure.section_bits[t, j])
                if var >= 0:
                    p *= priors[var, int(structure.branch_bit_values[t, b, j])]
            out[t, b] = p
    return out


def _check_priors(priors, structure: BlockStructure) -> np.ndarray:
    if priors is None:
        return np.full((structure.n_vars, structure.alphabet),
                       1.0 / structure.alphabet)
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (structure.n_vars, structure.alphabet):
        raise ValueError("priors must be shaped (n_vars, alphabet)")
    if np.any(priors < 0):
        raise ValueError("priors must be nonnegative")
    sums = priors.sum(axis=1)
    if np.any(sums <= 0):
        raise ValueError("each prior row needs positive mass")
    return priors / sums[:, None]


def app_single(y, structure: BlockStructure, params: ChannelParams,
               priors=None, window: DriftWindow | None = None,
               return_workspace: bool = False):
    """A-posteriori probabilities of every block variable given one read.

    Returns an (n_vars, alphabet) row-normalized matrix, or a tuple with
    the Workspace when return_workspace is set. Raises DriftWindowError
    when |y| - N falls outside the window and InfeasibleObservationError
    when no in-window trace explains y.
    """
    y_arr = as_seq(y) if isinstance(y, str) else \
        np.ascontiguousarray(np.asarray(y, dtype=np.int8))
    t_total = structure.n_sections
    if window is None:
        window = default_drift_window(t_total, params)
    d_end = int(y_arr.shape[0]) - t_total
    if not window.contains(d_end):
        raise DriftWindowError(
            "final drift %d outside window [%d, %d]"
            % (d_end, window.d_min, window.d_max))
    priors = _check_priors(priors, structure)
    bp = _branch_priors(structure, priors)
    wmod = 4 ** (params.k - 1)
    reg = np.empty(t_total, dtype=np.int8)
    for t in range(t_total):
        reg[t] = _k._region_of(t + 1, params.k, t_total)
    apps, status, alphas, scales = _k.bcjr_core(
        y_arr, t_total, structure.n_states, params.k, params.l_max, wmod,
        reg, structure.n_branches, structure.next_state,
        structure.out_symbol, bp, structure.section_bits,
        structure.branch_bit_values, params.event_table,
        params.ins_len_table, params.sub_table,
        window.d_min, window.d_max, structure.n_vars, structure.alphabet)
    if status != 0:
        raise InfeasibleObservationError(
            "no event trace within the drift window explains the read")
    sums = apps.sum(axis=1)
    if np.any(sums <= 0):
        raise InfeasibleObservationError(
            "decoder produced an empty posterior row")
    apps = apps / sums[:, None]
    if return_workspace:
        return apps, Workspace(alphas=alphas, scales=scales, window=window,
                               wmod=wmod, n_states=structure.n_states)
    return apps


def combine_separate(apps_list, priors) -> np.ndarray:
    """Merge per-read posteriors that share one prior.

    Multiplies the rows and divides by prior^(M-1), the exact combination
    when reads are independent given the input. Rows that lose all mass
    fall back to the prior.
    """
    if len(apps_list) == 0:
        raise ValueError("need at least one posterior matrix")
    priors = np.asarray(priors, dtype=np.float64)
    first = np.asarray(apps_list[0], dtype=np.float64)
    if priors.ndim == 1:
        priors = np.tile(priors, (first.shape[0], 1))
    if np.any(priors <= 0):
        raise ValueError("combining requires strictly positive priors")
    out = np.ones_like(first)
    for apps in apps_list:
        arr = np.asarray(apps, dtype=np.float64)
        if arr.shape != first.shape:
            raise ValueError("posterior shapes disagree")
        out = out * arr
    out = out / priors ** (len(apps_list) - 1)
    sums = out.sum(axis=1)
    dead = sums <= 0
    if np.any(dead):
        out[dead] = priors[dead]
        sums = out.sum(axis=1)
    return out / sums[:, None]


def save_app_matrix(path, apps) -> None:
    """Write a posterior matrix as CSV, one row per symbol index."""
    apps = np.asarray(apps, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index"] + ["p%d" % a for a in range(apps.shape[1])])
        for i in range(apps.shape[0]):
            wr.writerow([i] + ["%.17g" % v for v in apps[i]])


def load_app_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        ncol = len(header) - 1
        rows = []
        for rec in rd:
            if not rec:
                continue
            rows.append([float(v) for v in rec[1:1 + ncol]])
    return np.asarray(rows, dtype=np.float64)

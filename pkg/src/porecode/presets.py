"""Parameter-table builders for experiments and tests.

These construct valid ChannelParams from a handful of scalar knobs; estimated
tables from real reads would normally take their place.
"""
from __future__ import annotations

import numpy as np

from ._kernels import EV_DEL, EV_INS, EV_NOERR, EV_START, EV_SUB
from .channel import ChannelParams, PositionClass


def _fill_event_rows(params: ChannelParams, row) -> None:
    params.event_table[...] = np.asarray(row, dtype=np.float64)


def iid_error_params(k: int, l_max: int, p_ins: float, p_del: float,
                     p_sub: float, ins_len_probs=None) -> ChannelParams:
    """Context- and history-free rates, uniform substitutes."""
    total = p_ins + p_del + p_sub
    if total >= 1.0 or min(p_ins, p_del, p_sub) < 0.0:
        raise ValueError("error probabilities must be nonnegative and sum below 1")
    params = ChannelParams.uniform(k, l_max)
    _fill_event_rows(params, [p_ins, p_del, p_sub, 1.0 - total])
    if ins_len_probs is not None:
        il = np.asarray(ins_len_probs, dtype=np.float64)
        if il.shape != (l_max - 1,) or abs(il.sum() - 1.0) > 1e-9:
            raise ValueError("ins_len_probs must be a distribution over 2..l_max")
        params.ins_len_table[...] = il
    return params.canonical()


def bursty_error_params(k: int, l_max: int, p_ins: float, p_del: float,
                        p_sub: float, burst_factor: float = 3.0) -> ChannelParams:
    """History-dependent rates: all error probabilities are multiplied by
    burst_factor right after any error event. Context-free otherwise."""
    params = iid_error_params(k, l_max, p_ins, p_del, p_sub)
    hot = np.array([p_ins, p_del, p_sub]) * burst_factor
    if hot.sum() >= 1.0:
        raise ValueError("burst_factor pushes the error mass past 1")
    hot_row = np.array([hot[0], hot[1], hot[2], 1.0 - hot.sum()])
    for z in (EV_INS, EV_DEL, EV_SUB):
        params.event_table[:, :, z, :] = hot_row
    return params.canonical()


def memory2_demo_params(l_max: int = 2, scale: float = 1.0) -> ChannelParams:
    """A k=2 channel with pronounced context structure, loosely shaped like
    estimated nanopore tables: deletions spike on homopolymer steps and run
    in bursts, insertions favour alternating steps, substitutions favour
    the transition partner (A<->G, C<->T). scale multiplies every error
    rate while keeping the contrasts.
    """
    k = 2
    params = ChannelParams.uniform(k, l_max)
    mid = int(PositionClass.MIDDLE)
    transition = {0: 2, 1: 3, 2: 0, 3: 1}
    for prev_sym in range(4):
        for cur in range(4):
            c = prev_sym * 4 + cur
            homo = prev_sym == cur
            alt = (prev_sym + cur) % 2 == 1
            p_del = scale * (0.15 if homo else 0.005)
            p_ins = scale * (0.06 if alt else 0.004)
            p_sub = scale * (0.05 if not homo and not alt else 0.01)
            for z in range(4):
                pi, pd, ps = p_ins, p_del, p_sub
                if z == EV_DEL:
                    pd = min(pd * 4.0, 0.6)
                elif z == EV_INS:
                    pi = min(pi * 3.0, 0.5)
                elif z == EV_SUB:
                    ps = min(ps * 2.0, 0.4)
                tot = pi + pd + ps
                if tot >= 0.9:
                    shrink = 0.9 / tot
                    pi, pd, ps = pi * shrink, pd * shrink, ps * shrink
                    tot = 0.9
                params.event_table[mid, c, z] = [pi, pd, ps, 1.0 - tot]
            row = np.full(4, 0.15)
            row[transition[cur]] = 0.7
            row[cur] = 0.0
            row /= row.sum()
            params.sub_table[mid, c, cur] = row
            if l_max > 2:
                geo = 0.75 * 0.5 ** np.arange(l_max - 1)
                geo /= geo.sum()
                params.ins_len_table[mid, c] = geo
    # single-symbol regions: averages of the middle rows sharing the symbol
    for r in (PositionClass.BEGIN, PositionClass.PREFIX, PositionClass.END):
        for cur in range(4):
            rows = params.event_table[mid, cur::4]
            params.event_table[int(r), cur, :, :] = rows.mean(axis=0)
            params.ins_len_table[int(r), cur] = params.ins_len_table[mid, cur::4].mean(axis=0)
            params.sub_table[int(r), cur] = params.sub_table[mid, cur::4].mean(axis=0)
    params.event_table[int(PositionClass.BEGIN), :, EV_START, :] = \
        params.event_table[int(PositionClass.BEGIN), :, EV_NOERR, :]
    return params.canonical()


def uniform_output_params(k: int = 1) -> ChannelParams:
    """Substitution-saturated channel whose output is uniform and carries no
    information about the input: p_sub = 3/4 with uniform substitutes and
    p_noerr = 1/4, so every output symbol is equiprobable either way."""
    params = ChannelParams.uniform(k, 2)
    _fill_event_rows(params, [0.0, 0.0, 0.75, 0.25])
    return params.canonical()


def all_delete_params(k: int = 1) -> ChannelParams:
    """Every position deleted; reads are empty."""
    params = ChannelParams.uniform(k, 2)
    _fill_event_rows(params, [0.0, 1.0, 0.0, 0.0])
    return params.canonical()

"""Exhaustive reference posteriors for very small blocks.

Enumerates every input word and event trace that reproduces the read, with
no drift window at all, and tallies exact symbol marginals. Exponential in
the block length; guarded by hard size caps. Used to validate the trellis
decoder, so it deliberately shares no sweep code with it.
"""

from __future__ import annotations

import numpy as np

from .channel import (ChannelParams, EventKind, PositionClass, START,
                      as_seq, classify_position)
from .trellis import BlockStructure, InfeasibleObservationError, _check_priors

MAX_SECTIONS = 8
MAX_READ = 12
MAX_MEMORY = 2


def brute_force_app(y, structure: BlockStructure, params: ChannelParams,
                    priors=None) -> np.ndarray:
    """Exact per-variable posteriors by full enumeration.

    Raises ValueError above the size caps and InfeasibleObservationError
    when no trace at all reproduces the read.
    """
    y_arr = as_seq(y) if isinstance(y, str) else \
        np.asarray(y, dtype=np.int8)
    t_total = structure.n_sections
    if t_total > MAX_SECTIONS:
        raise ValueError("block too long for enumeration (max %d sections)"
                         % MAX_SECTIONS)
    if y_arr.shape[0] > MAX_READ:
        raise ValueError("read too long for enumeration (max %d symbols)"
                         % MAX_READ)
    if params.k > MAX_MEMORY:
        raise ValueError("channel memory too deep for enumeration (max %d)"
                         % MAX_MEMORY)
    priors = _check_priors(priors, structure)
    ny = int(y_arr.shape[0])
    l_max = params.l_max
    k = params.k
    wmod = 4 ** (k - 1)
    marg = np.zeros((structure.n_vars, structure.alphabet))
    total = 0.0
    assign = np.full(structure.n_vars, -1, dtype=np.int64)

    def emit_cases(t, w, z, x, ypos):
        r = int(classify_position(t + 1, k, t_total))
        ctx = w * 4 + x if r == int(PositionClass.MIDDLE) else x
        row = params.event_table[r, ctx, z]
        cases = []
        val = row[int(EventKind.DEL)]
        if val > 0.0:
            cases.append((val, 0, int(EventKind.DEL)))
        if ypos < ny:
            yo = int(y_arr[ypos])
            if yo == x:
                val = row[int(EventKind.NO_ERR)]
                if val > 0.0:
                    cases.append((val, 1, int(EventKind.NO_ERR)))
            else:
                val = row[int(EventKind.SUB)] \
                    * params.sub_table[r, ctx, x, yo]
                if val > 0.0:
                    cases.append((val, 1, int(EventKind.SUB)))
        vi = row[int(EventKind.INS)]
        if vi > 0.0:
            for ell in range(2, l_max + 1):
                last = ypos + ell
                if last >= ny:
                    break
                if int(y_arr[last]) != x:
                    continue
                wgt = vi * 0.25 ** ell * params.ins_len_table[r, ctx, ell - 2]
                if wgt > 0.0:
                    cases.append((wgt, ell + 1, int(EventKind.INS)))
        return cases

    def walk(t, s, w, z, ypos, weight):
        nonlocal total
        if t == t_total:
            if ypos == ny and s == 0:
                total += weight
                for v in range(structure.n_vars):
                    marg[v, assign[v]] += weight
            return
        if ny - ypos > (t_total - t) * (l_max + 1):
            return
        for b in range(int(structure.n_branches[t])):
            pr = 1.0
            touched = []
            for j in range(2):
                var = int(structure.section_bits[t, j])
                if var >= 0:
                    val = int(structure.branch_bit_values[t, b, j])
                    pr *= priors[var, val]
                    touched.append((var, val))
            if pr == 0.0:
                continue
            x = int(structure.out_symbol[t, s, b])
            s2 = int(structure.next_state[t, s, b])
            w2 = (w * 4 + x) % wmod
            for var, val in touched:
                assign[var] = val
            for wgt, consumed, z2 in emit_cases(t, w, z, x, ypos):
                walk(t + 1, s2, w2, z2, ypos + consumed, weight * pr * wgt)
            for var, val in touched:
                assign[var] = -1

    walk(0, 0, 0, int(START), 0, 1.0)
    if total <= 0.0:
        raise InfeasibleObservationError(
            "no event trace reproduces the read")
    return marg / marg.sum(axis=1)[:, None]

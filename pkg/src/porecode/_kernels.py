"""Hot loops, compiled with numba when available.

Every stochastic kernel consumes a caller-supplied array of uniforms with a
fixed cursor discipline, so the compiled and fallback paths produce
bit-identical output. Set PORECODE_DISABLE_NUMBA=1 to force the fallbacks
(pure numpy where the loop vectorizes, plain python where it does not).
"""
from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("PORECODE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _env in ("1", "true", "yes", "on")

if not _DISABLED:
    try:
        import numba as nb

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False
else:
    HAS_NUMBA = False

USING_NUMBA = HAS_NUMBA

# region codes
REG_BEGIN = 0
REG_PREFIX = 1
REG_MIDDLE = 2
REG_END = 3

# event codes (order fixed everywhere: Ins, Del, Sub, NoErr; Start is the
# sentinel previous-event index used before the first position)
EV_INS = 0
EV_DEL = 1
EV_SUB = 2
EV_NOERR = 3
EV_START = 4

# alignment move codes, forward order
MV_DIAG = 0
MV_UP = 1
MV_LEFT = 2


def _region_of(i, k, n):
    # i is 1-based
    if i == 1:
        return REG_BEGIN
    if i == n:
        return REG_END
    if i < k:
        return REG_PREFIX
    return REG_MIDDLE


def _pick(probs, u):
    """Inverse-CDF draw from a small probability vector."""
    cum = 0.0
    last = -1
    for a in range(probs.shape[0]):
        p = probs[a]
        if p > 0.0:
            last = a
            cum += p
            if u < cum:
                return a
    return last


def _transmit_core(x, k, l_max, event_table, ins_len_table, sub_table, uniforms):
    """Sample one read. Returns (y_buffer, y_len, events, ins_lens).

    Uniform consumption per position: 1 for the event, then for Ins one for
    the length plus L for the burst symbols, for Sub one for the substitute.
    """
    n = x.shape[0]
    y = np.empty(n * (l_max + 1), dtype=np.int8)
    events = np.empty(n, dtype=np.int8)
    ins_lens = np.zeros(n, dtype=np.int32)
    ny = 0
    cur = 0
    prev = EV_START
    ctx_win = 0  # base-4 integer of the last k-1 input symbols
    wmod = 4 ** (k - 1)
    for t in range(n):
        i = t + 1
        xi = x[t]
        r = _region_of(i, k, n)
        if r == REG_MIDDLE:
            ctx = ctx_win * 4 + xi
        else:
            ctx = xi
        ev = _pick(event_table[r, ctx, prev], uniforms[cur])
        cur += 1
        if ev == EV_INS:
            li = _pick(ins_len_table[r, ctx], uniforms[cur])
            cur += 1
            ell = li + 2
            for _ in range(ell):
                a = int(uniforms[cur] * 4.0)
                cur += 1
                if a > 3:
                    a = 3
                y[ny] = a
                ny += 1
            y[ny] = xi
            ny += 1
            ins_lens[t] = ell
        elif ev == EV_DEL:
            pass
        elif ev == EV_SUB:
            a = _pick(sub_table[r, ctx, xi], uniforms[cur])
            cur += 1
            y[ny] = a
            ny += 1
        else:
            y[ny] = xi
            ny += 1
        events[t] = ev
        prev = ev
        ctx_win = (ctx_win * 4 + xi) % wmod
    return y, ny, events, ins_lens


def _lattice_fill_loops(x, y):
    n = x.shape[0]
    m = y.shape[0]
    cost = np.empty((n + 1, m + 1), dtype=np.int32)
    moves = np.empty((n + 1, m + 1), dtype=np.uint8)
    for j in range(m + 1):
        cost[0, j] = j
        moves[0, j] = 4  # left only
    moves[0, 0] = 0
    for i in range(1, n + 1):
        cost[i, 0] = i
        moves[i, 0] = 2  # up only
        xi = x[i - 1]
        for j in range(1, m + 1):
            dcost = cost[i - 1, j - 1]
            if y[j - 1] != xi:
                dcost += 1
            ucost = cost[i - 1, j] + 1
            lcost = cost[i, j - 1] + 1
            best = dcost
            if ucost < best:
                best = ucost
            if lcost < best:
                best = lcost
            cost[i, j] = best
            mask = 0
            if dcost == best:
                mask |= 1
            if ucost == best:
                mask |= 2
            if lcost == best:
                mask |= 4
            moves[i, j] = mask
    return cost, moves


def _lattice_fill_np(x, y):
    """Vectorized fill: the left-move dependency within a row is a min-plus
    prefix scan, so each row costs a handful of numpy ops."""
    n = x.shape[0]
    m = y.shape[0]
    cost = np.empty((n + 1, m + 1), dtype=np.int32)
    moves = np.empty((n + 1, m + 1), dtype=np.uint8)
    cost[0] = np.arange(m + 1, dtype=np.int32)
    moves[0] = 4
    moves[0, 0] = 0
    jj = np.arange(1, m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        sub = (y != x[i - 1]).astype(np.int32)
        diag = cost[i - 1, :-1] + sub
        up = cost[i - 1, 1:] + 1
        base = np.minimum(diag, up)
        # cost[i, j] = min(base[j], min_{j' < j}(base[j'] + j - j')), seeded by
        # the first-column value i; min-plus scan via minimum.accumulate
        shifted = np.empty(m + 1, dtype=np.int32)
        shifted[0] = i
        shifted[1:] = base - jj
        run = np.minimum.accumulate(shifted)
        row = run[1:] + jj
        cost[i, 1:] = row
        cost[i, 0] = i
        left = np.empty(m, dtype=np.int32)
        left[0] = i + 1
        left[1:] = row[:-1] + 1
        mask = (diag == row).astype(np.uint8)
        mask |= (up == row).astype(np.uint8) << 1
        mask |= (left == row).astype(np.uint8) << 2
        moves[i, 1:] = mask
        moves[i, 0] = 2
    return cost, moves


def _backtrack_moves(moves, uniforms):
    """Walk the move masks from the far corner, breaking ties uniformly.

    Returns move codes in forward order. One uniform is consumed per cell
    that offers more than one cost-achieving move.
    """
    i = moves.shape[0] - 1
    j = moves.shape[1] - 1
    out = np.empty(i + j, dtype=np.int8)
    opts = np.empty(3, dtype=np.int8)
    pos = out.shape[0]
    cur = 0
    while i > 0 or j > 0:
        mask = moves[i, j]
        nopt = 0
        if mask & 1:
            opts[nopt] = MV_DIAG
            nopt += 1
        if mask & 2:
            opts[nopt] = MV_UP
            nopt += 1
        if mask & 4:
            opts[nopt] = MV_LEFT
            nopt += 1
        if nopt > 1:
            sel = int(uniforms[cur] * nopt)
            cur += 1
            if sel >= nopt:
                sel = nopt - 1
        else:
            sel = 0
        chosen = opts[sel]
        if chosen == MV_DIAG:
            i -= 1
            j -= 1
        elif chosen == MV_UP:
            i -= 1
        else:
            j -= 1
        pos -= 1
        out[pos] = chosen
    return out[pos:].copy()


def _moves_to_events(moves, x, y):
    """Project an alignment path onto per-position channel events.

    Each input position takes the event of its consuming move (diag or up)
    merged with the run of left moves immediately before it; a trailing left
    run merges into the last position. Raw insertion lengths may fall outside
    the channel's [2, l_max] range; callers that need the channel invariant
    clamp or discard afterwards. The resulting op count (Del and Sub count 1,
    Ins counts its length) equals the path cost.
    """
    n = x.shape[0]
    events = np.empty(n, dtype=np.int8)
    ins_lens = np.zeros(n, dtype=np.int32)
    sub_targets = np.full(n, -1, dtype=np.int8)
    i = 0  # input cursor
    j = 0  # output cursor
    run = 0
    for t in range(moves.shape[0]):
        mv = moves[t]
        if mv == MV_LEFT:
            run += 1
            j += 1
            continue
        if mv == MV_DIAG:
            match = y[j] == x[i]
            if run == 0:
                if match:
                    events[i] = EV_NOERR
                else:
                    events[i] = EV_SUB
                    sub_targets[i] = y[j]
            else:
                events[i] = EV_INS
                ins_lens[i] = run if match else run + 1
            j += 1
        else:  # MV_UP, deletion of x[i]
            if run == 0:
                events[i] = EV_DEL
            else:
                events[i] = EV_INS
                ins_lens[i] = run + 1
        run = 0
        i += 1
    if run > 0:
        # trailing insertions attach to the final position
        last = n - 1
        ev = events[last]
        if ev == EV_NOERR:
            events[last] = EV_INS
            ins_lens[last] = run
        elif ev == EV_INS:
            ins_lens[last] += run
        else:  # Sub or Del, one op each, absorbed into the burst
            events[last] = EV_INS
            ins_lens[last] = run + 1
            sub_targets[last] = -1
    return events, ins_lens, sub_targets


def _count_trace(x, events, ins_lens, sub_targets, k, l_max, single_ins_discard,
                 event_counts, ins_len_counts, sub_counts, aux):
    """Accumulate one trace into the count tables.

    event_counts: float64[4, C, 5, 4]; ins_len_counts: float64[4, C, l_max-1];
    sub_counts: float64[4, C, 4, 4]. Raw insertion lengths outside [2, l_max]
    are tallied in aux ([0]: too short, [1]: too long) and either clamped into
    range or, when single_ins_discard is set, left out of the length table
    (the event itself still counts).
    """
    n = x.shape[0]
    prev = EV_START
    ctx_win = 0
    wmod = 4 ** (k - 1)
    for t in range(n):
        i = t + 1
        xi = x[t]
        r = _region_of(i, k, n)
        if r == REG_MIDDLE:
            ctx = ctx_win * 4 + xi
        else:
            ctx = xi
        ev = events[t]
        event_counts[r, ctx, prev, ev] += 1.0
        if ev == EV_INS:
            ell = ins_lens[t]
            if ell < 2 or ell > l_max:
                if ell < 2:
                    aux[0] += 1
                    ell = 2
                else:
                    aux[1] += 1
                    ell = l_max
                if not single_ins_discard:
                    ins_len_counts[r, ctx, ell - 2] += 1.0
            else:
                ins_len_counts[r, ctx, ell - 2] += 1.0
        elif ev == EV_SUB:
            a = sub_targets[t]
            if a >= 0:
                sub_counts[r, ctx, xi, a] += 1.0
        prev = ev
        ctx_win = (ctx_win * 4 + xi) % wmod


if HAS_NUMBA:
    _njit = nb.njit(cache=True, nogil=True)
    _region_of = _njit(_region_of)
    _pick = _njit(_pick)
    transmit_core = _njit(_transmit_core)
    lattice_fill = _njit(_lattice_fill_loops)
    backtrack_moves = _njit(_backtrack_moves)
    moves_to_events = _njit(_moves_to_events)
    count_trace = _njit(_count_trace)
else:
    transmit_core = _transmit_core
    lattice_fill = _lattice_fill_np
    backtrack_moves = _backtrack_moves
    moves_to_events = _moves_to_events
    count_trace = _count_trace


# -- forward-backward over the joint channel/code drift trellis -------------
#
# State index: ((w * 5 + z) * S + s) * Delta + di, where w is the base-4
# integer of the last k-1 chosen input symbols, z the previous event
# (4 = Start), s the encoder state and di the drift offset d - d_min.
# Section arrays (next_state, out_symbol, branch priors, consumed-variable
# annotations) come from the caller; emission handling follows the four
# event cases with the final-symbol match indicator on insertions.


def _bcjr_core(y, t_total, n_states, k, l_max, wmod,
               reg, n_branches, next_state, out_symbol, branch_prior,
               section_bits, branch_bit_values,
               event_table, ins_len_table, sub_table,
               d_min, d_max, n_vars, alphabet):
    ny = y.shape[0]
    delta = d_max - d_min + 1
    s_count = n_states
    nst = wmod * 5 * s_count * delta
    alpha = np.zeros((t_total + 1, nst))
    scales = np.zeros(t_total)
    apps = np.zeros((n_vars, alphabet))
    d_end = ny - t_total
    alpha[0, ((0 * 5 + EV_START) * s_count + 0) * delta + (0 - d_min)] = 1.0

    for t in range(t_total):
        a_t = alpha[t]
        a_n = alpha[t + 1]
        r = reg[t]
        rem = t_total - t - 1
        for w in range(wmod):
            for z in range(5):
                base_idx = (w * 5 + z) * s_count
                for s in range(s_count):
                    row = (base_idx + s) * delta
                    for di in range(delta):
                        a = a_t[row + di]
                        if a == 0.0:
                            continue
                        d = d_min + di
                        pos0 = t + d
                        for b in range(n_branches[t]):
                            pr = branch_prior[t, b]
                            if pr == 0.0:
                                continue
                            # int() keeps the index math in int64 even when
                            # this source runs uncompiled (int8 would wrap)
                            x = int(out_symbol[t, s, b])
                            s2 = int(next_state[t, s, b])
                            if r == REG_MIDDLE:
                                ctx = w * 4 + x
                            else:
                                ctx = x
                            w2 = (w * 4 + x) % wmod
                            base = a * pr
                            dest = (w2 * 5) * s_count + s2
                            # Del: drift shrinks, nothing emitted
                            if di > 0:
                                val = event_table[r, ctx, z, EV_DEL]
                                if val > 0.0:
                                    nc = t + d  # consumed after transition
                                    if 0 <= ny - nc <= rem * (l_max + 1):
                                        a_n[(dest + EV_DEL * s_count) * delta
                                            + di - 1] += base * val
                            if 0 <= pos0 < ny:
                                nc = t + 1 + d
                                if 0 <= ny - nc <= rem * (l_max + 1):
                                    yo = y[pos0]
                                    if yo == x:
                                        val = event_table[r, ctx, z, EV_NOERR]
                                        if val > 0.0:
                                            a_n[(dest + EV_NOERR * s_count)
                                                * delta + di] += base * val
                                    else:
                                        val = event_table[r, ctx, z, EV_SUB]
                                        if val > 0.0:
                                            sp = sub_table[r, ctx, x, yo]
                                            if sp > 0.0:
                                                a_n[(dest + EV_SUB * s_count)
                                                    * delta + di] += base * val * sp
                            val = event_table[r, ctx, z, EV_INS]
                            if val > 0.0 and pos0 >= 0:
                                for ell in range(2, l_max + 1):
                                    di2 = di + ell
                                    if di2 >= delta:
                                        break
                                    pos_last = pos0 + ell
                                    if pos_last >= ny:
                                        break
                                    if y[pos_last] != x:
                                        continue
                                    nc = t + 1 + d + ell
                                    if ny - nc > rem * (l_max + 1):
                                        continue
                                    gain = val * 0.25 ** ell \
                                        * ins_len_table[r, ctx, ell - 2]
                                    a_n[(dest + EV_INS * s_count) * delta
                                        + di2] += base * gain
        c = 0.0
        for idx in range(nst):
            c += a_n[idx]
        if c == 0.0:
            return apps, 1, alpha, scales
        scales[t] = c
        for idx in range(nst):
            a_n[idx] /= c

    # terminal constraint: known final drift, encoder back at zero
    beta_next = np.zeros(nst)
    di_end = d_end - d_min
    total = 0.0
    for w in range(wmod):
        for z in range(5):
            pos = ((w * 5 + z) * s_count + 0) * delta + di_end
            beta_next[pos] = 1.0
            total += alpha[t_total, pos]
    if total == 0.0:
        return apps, 2, alpha, scales

    for t in range(t_total - 1, -1, -1):
        a_t = alpha[t]
        beta_cur = np.zeros(nst)
        r = reg[t]
        rem = t_total - t - 1
        for w in range(wmod):
            for z in range(5):
                base_idx = (w * 5 + z) * s_count
                for s in range(s_count):
                    row = (base_idx + s) * delta
                    for di in range(delta):
                        d = d_min + di
                        pos0 = t + d
                        state_idx = row + di
                        a = a_t[state_idx]
                        acc_state = 0.0
                        for b in range(n_branches[t]):
                            pr = branch_prior[t, b]
                            if pr == 0.0:
                                continue
                            # int() keeps the index math in int64 even when
                            # this source runs uncompiled (int8 would wrap)
                            x = int(out_symbol[t, s, b])
                            s2 = int(next_state[t, s, b])
                            if r == REG_MIDDLE:
                                ctx = w * 4 + x
                            else:
                                ctx = x
                            w2 = (w * 4 + x) % wmod
                            dest = (w2 * 5) * s_count + s2
                            acc = 0.0
                            if di > 0:
                                val = event_table[r, ctx, z, EV_DEL]
                                if val > 0.0:
                                    nc = t + d
                                    if 0 <= ny - nc <= rem * (l_max + 1):
                                        acc += val * beta_next[
                                            (dest + EV_DEL * s_count) * delta
                                            + di - 1]
                            if 0 <= pos0 < ny:
                                nc = t + 1 + d
                                if 0 <= ny - nc <= rem * (l_max + 1):
                                    yo = y[pos0]
                                    if yo == x:
                                        val = event_table[r, ctx, z, EV_NOERR]
                                        if val > 0.0:
                                            acc += val * beta_next[
                                                (dest + EV_NOERR * s_count)
                                                * delta + di]
                                    else:
                                        val = event_table[r, ctx, z, EV_SUB]
                                        if val > 0.0:
                                            sp = sub_table[r, ctx, x, yo]
                                            if sp > 0.0:
                                                acc += val * sp * beta_next[
                                                    (dest + EV_SUB * s_count)
                                                    * delta + di]
                            val = event_table[r, ctx, z, EV_INS]
                            if val > 0.0 and pos0 >= 0:
                                for ell in range(2, l_max + 1):
                                    di2 = di + ell
                                    if di2 >= delta:
                                        break
                                    pos_last = pos0 + ell
                                    if pos_last >= ny:
                                        break
                                    if y[pos_last] != x:
                                        continue
                                    nc = t + 1 + d + ell
                                    if ny - nc > rem * (l_max + 1):
                                        continue
                                    acc += val * 0.25 ** ell \
                                        * ins_len_table[r, ctx, ell - 2] \
                                        * beta_next[(dest + EV_INS * s_count)
                                                    * delta + di2]
                            branch_total = pr * acc
                            acc_state += branch_total
                            if a > 0.0 and branch_total > 0.0:
                                m = a * branch_total
                                for j in range(2):
                                    var = section_bits[t, j]
                                    if var >= 0:
                                        apps[var, branch_bit_values[t, b, j]] += m
                        beta_cur[state_idx] = acc_state
        c = 0.0
        for idx in range(nst):
            c += beta_cur[idx]
        if c == 0.0:
            return apps, 2, alpha, scales
        for idx in range(nst):
            beta_cur[idx] /= c
        beta_next = beta_cur

    return apps, 0, alpha, scales




def _bcjr_core_np(y, t_total, n_states, k, l_max, wmod,
                  reg, n_branches, next_state, out_symbol, branch_prior,
                  section_bits, branch_bit_values,
                  event_table, ins_len_table, sub_table,
                  d_min, d_max, n_vars, alphabet):
    """Vectorized counterpart of the scalar trellis sweep.

    Works on [W, 5, S, Delta] blocks, looping only over the (encoder state,
    branch) pairs of a section. Same contract and return values as the
    scalar kernel; floating-point accumulation order differs, so agreement
    is to rounding, not bitwise.
    """
    ny = y.shape[0]
    delta = d_max - d_min + 1
    s_count = n_states
    alpha = np.zeros((t_total + 1, wmod, 5, s_count, delta))
    scales = np.zeros(t_total)
    apps = np.zeros((n_vars, alphabet))
    d_end = ny - t_total
    alpha[0, 0, EV_START, 0, -d_min] = 1.0

    warr = np.arange(wmod)
    dvec = np.arange(delta) + d_min

    def section_tables(t, s, b):
        r = reg[t]
        x = int(out_symbol[t, s, b])
        ctx = warr * 4 + x if r == REG_MIDDLE else np.full(wmod, x)
        w2 = (warr * 4 + x) % wmod
        ev = event_table[r, ctx]            # [W, 5, 4]
        ilp = ins_len_table[r, ctx]         # [W, l_max-1]
        sub = sub_table[r, ctx, x]          # [W, 4]
        return r, x, ctx, w2, ev, ilp, sub

    def emission_masks(t):
        # per-source-drift observation info for the primary consumed symbol
        pos0 = t + dvec
        valid0 = (pos0 >= 0) & (pos0 < ny)
        ysym = np.where(valid0, y[np.clip(pos0, 0, max(ny - 1, 0))], -1)
        return pos0, valid0, ysym

    def budget_ok(t, new_drift):
        rem = t_total - t - 1
        nc = t + 1 + new_drift
        return (ny - nc >= 0) & (ny - nc <= rem * (l_max + 1))

    for t in range(t_total):
        a_n = alpha[t + 1]
        pos0, valid0, ysym = emission_masks(t)
        bud_same = budget_ok(t, dvec)
        bud_del = budget_ok(t, dvec - 1)
        for s in range(s_count):
            for b in range(n_branches[t]):
                pr = branch_prior[t, b]
                if pr == 0.0:
                    continue
                r, x, ctx, w2, ev, ilp, sub = section_tables(t, s, b)
                s2 = int(next_state[t, s, b])
                base = alpha[t, :, :, s, :] * pr          # [W, 5, D]
                if not base.any():
                    continue
                # NoErr
                gate = (valid0 & (ysym == x) & bud_same).astype(float)
                tmp = np.einsum('wzd,wz->wd', base, ev[:, :, EV_NOERR]) * gate
                acc = np.zeros((wmod, delta))
                np.add.at(acc, w2, tmp)
                a_n[:, EV_NOERR, s2, :] += acc
                # Sub
                gate = (valid0 & (ysym != x) & bud_same)
                sp = np.where(gate[None, :], sub[:, np.clip(ysym, 0, 3)], 0.0)
                tmp = np.einsum('wzd,wz->wd', base, ev[:, :, EV_SUB]) * sp
                acc = np.zeros((wmod, delta))
                np.add.at(acc, w2, tmp)
                a_n[:, EV_SUB, s2, :] += acc
                # Del
                tmp = np.einsum('wzd,wz->wd', base, ev[:, :, EV_DEL])
                tmp = tmp[:, 1:] * bud_del[1:]
                acc = np.zeros((wmod, delta))
                acc[:, :delta - 1] = tmp
                acc2 = np.zeros((wmod, delta))
                np.add.at(acc2, w2, acc)
                a_n[:, EV_DEL, s2, :] += acc2
                # Ins
                ains = np.einsum('wzd,wz->wd', base, ev[:, :, EV_INS])
                for ell in range(2, l_max + 1):
                    if ell >= delta:
                        break
                    pos_last = pos0 + ell
                    gate = ((pos0 >= 0) & (pos_last < ny)
                            & budget_ok(t, dvec + ell))
                    gate = gate & (np.where(pos_last < ny,
                                            y[np.clip(pos_last, 0,
                                                      max(ny - 1, 0))],
                                            -1) == x)
                    if not gate.any():
                        continue
                    tmp = (ains * 0.25 ** ell * ilp[:, ell - 2:ell - 1]
                           * gate[None, :])
                    acc = np.zeros((wmod, delta))
                    acc[:, ell:] = tmp[:, :delta - ell]
                    acc2 = np.zeros((wmod, delta))
                    np.add.at(acc2, w2, acc)
                    a_n[:, EV_INS, s2, ell:] += acc2[:, ell:]
        c = a_n.sum()
        if c == 0.0:
            return (apps, 1, alpha.reshape(t_total + 1, -1), scales)
        a_n /= c
        scales[t] = c

    beta_next = np.zeros((wmod, 5, s_count, delta))
    di_end = d_end - d_min
    beta_next[:, :, 0, di_end] = 1.0
    if alpha[t_total, :, :, 0, di_end].sum() == 0.0:
        return (apps, 2, alpha.reshape(t_total + 1, -1), scales)

    for t in range(t_total - 1, -1, -1):
        beta_cur = np.zeros_like(beta_next)
        pos0, valid0, ysym = emission_masks(t)
        bud_same = budget_ok(t, dvec)
        bud_del = budget_ok(t, dvec - 1)
        for s in range(s_count):
            for b in range(n_branches[t]):
                pr = branch_prior[t, b]
                if pr == 0.0:
                    continue
                r, x, ctx, w2, ev, ilp, sub = section_tables(t, s, b)
                s2 = int(next_state[t, s, b])
                a_s = alpha[t, :, :, s, :]                 # [W, 5, D]
                # per-event gathered beta weighted by emissions: [W, D]
                g = np.zeros((4, wmod, delta))
                gate = (valid0 & (ysym == x) & bud_same).astype(float)
                g[EV_NOERR] = beta_next[w2, EV_NOERR, s2, :] * gate[None, :]
                gate_s = (valid0 & (ysym != x) & bud_same)
                sp = np.where(gate_s[None, :], sub[:, np.clip(ysym, 0, 3)], 0.0)
                g[EV_SUB] = beta_next[w2, EV_SUB, s2, :] * sp
                bdel = np.zeros((wmod, delta))
                bdel[:, 1:] = beta_next[w2, EV_DEL, s2, :delta - 1] \
                    * bud_del[1:]
                g[EV_DEL] = bdel
                for ell in range(2, l_max + 1):
                    if ell >= delta:
                        break
                    pos_last = pos0 + ell
                    gate = ((pos0 >= 0) & (pos_last < ny)
                            & budget_ok(t, dvec + ell))
                    gate = gate & (np.where(pos_last < ny,
                                            y[np.clip(pos_last, 0,
                                                      max(ny - 1, 0))],
                                            -1) == x)
                    if not gate.any():
                        continue
                    bi = np.zeros((wmod, delta))
                    bi[:, :delta - ell] = beta_next[w2, EV_INS, s2, ell:]
                    g[EV_INS] += (bi * 0.25 ** ell * ilp[:, ell - 2:ell - 1]
                                  * gate[None, :])
                # beta update: sum over events of ev[w,z,e] * g[e,w,d]
                beta_cur[:, :, s, :] += pr * np.einsum('wze,ewd->wzd', ev, g)
                # app mass: alpha * pr * ev * g summed over w,z,d per event
                if a_s.any():
                    mass = pr * np.einsum('wzd,wze,ewd->', a_s, ev, g)
                    if mass > 0.0:
                        for j in range(2):
                            var = section_bits[t, j]
                            if var >= 0:
                                apps[var, branch_bit_values[t, b, j]] += mass
        c = beta_cur.sum()
        if c == 0.0:
            return (apps, 2, alpha.reshape(t_total + 1, -1), scales)
        beta_next = beta_cur / c

    return apps, 0, alpha.reshape(t_total + 1, -1), scales


if HAS_NUMBA:
    bcjr_core = _njit(_bcjr_core)
else:
    bcjr_core = _bcjr_core_np


# -- flooding sum-product decoding on a binary parity-check graph ------------
#
# LLR convention ln(p0/p1); messages clamped; edges are numbered by their
# position in the check-grouped arrays, with a var-grouped permutation for
# the variable-side pass.


def _bp_core(llr, chk_ptr, edge_var, var_ptr, var_eids, max_iters, clamp,
             early_stop):
    n = llr.shape[0]
    m = chk_ptr.shape[0] - 1
    n_edges = edge_var.shape[0]
    v2c = np.zeros(n_edges)
    c2v = np.zeros(n_edges)
    ts = np.zeros(n_edges)
    total = llr.copy()
    hard = np.zeros(n, dtype=np.int8)
    iters = 0
    converged = False
    for _ in range(max_iters):
        iters += 1
        for v in range(n):
            for p in range(var_ptr[v], var_ptr[v + 1]):
                e = var_eids[p]
                msg = total[v] - c2v[e]
                if msg > clamp:
                    msg = clamp
                elif msg < -clamp:
                    msg = -clamp
                v2c[e] = msg
        for c in range(m):
            a = chk_ptr[c]
            b = chk_ptr[c + 1]
            prod = 1.0
            nzero = 0
            for e in range(a, b):
                t = np.tanh(0.5 * v2c[e])
                ts[e] = t
                if t == 0.0:
                    nzero += 1
                else:
                    prod *= t
            for e in range(a, b):
                if nzero == 0:
                    ext = prod / ts[e]
                elif nzero == 1 and ts[e] == 0.0:
                    ext = prod
                else:
                    ext = 0.0
                if ext > 1.0 - 1e-12:
                    ext = 1.0 - 1e-12
                elif ext < -1.0 + 1e-12:
                    ext = -1.0 + 1e-12
                msg = 2.0 * np.arctanh(ext)
                if msg > clamp:
                    msg = clamp
                elif msg < -clamp:
                    msg = -clamp
                c2v[e] = msg
        undecided = False
        for v in range(n):
            acc = llr[v]
            for p in range(var_ptr[v], var_ptr[v + 1]):
                acc += c2v[var_eids[p]]
            total[v] = acc
            hard[v] = 0 if acc >= 0.0 else 1
            if acc == 0.0:
                undecided = True
        ok = not undecided
        for c in range(m):
            s = 0
            for e in range(chk_ptr[c], chk_ptr[c + 1]):
                s ^= hard[edge_var[e]]
            if s != 0:
                ok = False
                break
        if ok:
            converged = True
            if early_stop:
                break
    return total, hard, converged, iters


def _bp_core_np(llr, chk_ptr, edge_var, var_ptr, var_eids, max_iters, clamp,
                early_stop):
    """Vectorized flooding schedule, same contract as the scalar version."""
    n = llr.shape[0]
    n_edges = edge_var.shape[0]
    chk_starts = np.asarray(chk_ptr[:-1], dtype=np.int64)
    chk_sizes = np.diff(chk_ptr)
    chk_of_edge = np.repeat(np.arange(chk_ptr.shape[0] - 1), chk_sizes)
    c2v = np.zeros(n_edges)
    total = llr.copy()
    hard = np.zeros(n, dtype=np.int8)
    iters = 0
    converged = False
    for _ in range(max_iters):
        iters += 1
        v2c = np.clip(total[edge_var] - c2v, -clamp, clamp)
        ts = np.tanh(0.5 * v2c)
        zero = ts == 0.0
        safe = np.where(zero, 1.0, ts)
        prod = np.multiply.reduceat(safe, chk_starts)
        nzero = np.add.reduceat(zero.astype(np.int64), chk_starts)
        pe = prod[chk_of_edge]
        nz = nzero[chk_of_edge]
        ext = np.where(nz == 0, pe / safe, np.where((nz == 1) & zero, pe, 0.0))
        ext = np.clip(ext, -1.0 + 1e-12, 1.0 - 1e-12)
        c2v = np.clip(2.0 * np.arctanh(ext), -clamp, clamp)
        total = llr.copy()
        np.add.at(total, edge_var, c2v)
        hard = (total < 0.0).astype(np.int8)
        syn = np.bitwise_xor.reduceat(hard[edge_var], chk_starts)
        if not syn.any() and not (total == 0.0).any():
            converged = True
            if early_stop:
                break
    return total, hard, converged, iters


if HAS_NUMBA:
    bp_core = _njit(_bp_core)
else:
    bp_core = _bp_core_np

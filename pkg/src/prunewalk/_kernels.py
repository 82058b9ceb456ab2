"""Compiled inner loops.

Paths are passed as arrays of step codes. Loop families are passed as a trie
over reversed loop step codes: ``child[node, code]`` is the next node (or -1)
and ``loop_id[node]`` the matching loop index (or -1).
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def match_top(stack_c, h, child, loop_id):
    """Index of the loop whose steps equal the top of the code stack, or -1."""
    node = 0
    k = h - 1
    while k >= 0:
        node = child[node, stack_c[k]]
        if node < 0:
            return -1
        if loop_id[node] >= 0:
            return loop_id[node]
        k -= 1
    return -1


@njit(**_JIT)
def prune_scan(codes, child, loop_id, loop_len):
    """Incremental pruning of the path with the given step codes.

    Returns (height, pop_time, top_after, stack_t, h):
    height[t]    number of retained steps of the pruning of s[0, t]
    pop_time[j]  time at which step j is erased (-1 if never)
    top_after[t] creation time of the top retained step right after the
                 erasure at time t (0 for the start point, -1 if none at t)
    stack_t[:h]  creation times of the finally retained steps
    """
    n = codes.shape[0]
    stack_c = np.empty(n + 1, np.int64)
    stack_t = np.empty(n + 1, np.int64)
    height = np.zeros(n + 1, np.int64)
    pop_time = np.full(n + 1, -1, np.int64)
    top_after = np.full(n + 1, -1, np.int64)
    h = 0
    for t in range(1, n + 1):
        stack_c[h] = codes[t - 1]
        stack_t[h] = t
        h += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            L = loop_len[k]
            for q in range(h - L, h):
                pop_time[stack_t[q]] = t
            h -= L
            top_after[t] = stack_t[h - 1] if h > 0 else 0
        height[t] = h
    return height, pop_time, top_after, stack_t[:h].copy(), h


@njit(**_JIT)
def final_stack_codes(codes, child, loop_id, loop_len):
    n = codes.shape[0]
    stack_c = np.empty(n + 1, np.int64)
    h = 0
    for t in range(n):
        stack_c[h] = codes[t]
        h += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            h -= loop_len[k]
    return stack_c[:h].copy()


@njit(**_JIT)
def literal_prune_codes(codes, child, loop_id, loop_len):
    """Iterate single-loop removal, rescanning from the start each time."""
    cur = codes.copy()
    n = cur.shape[0]
    while True:
        tau = -1
        L = 0
        for i in range(1, n + 1):
            k = match_top(cur, i, child, loop_id)
            if k >= 0:
                tau = i
                L = loop_len[k]
                break
        if tau < 0:
            return cur[:n].copy()
        for q in range(tau, n):
            cur[q - L] = cur[q]
        n -= L


@njit(**_JIT)
def retained_after_scan(codes, start, stop, child, loop_id, loop_len, out):
    """Mark in ``out`` the steps retained in the pruning of s[start, stop]."""
    n = stop - start
    stack_c = np.empty(n + 1, np.int64)
    stack_t = np.empty(n + 1, np.int64)
    h = 0
    for t in range(start + 1, stop + 1):
        stack_c[h] = codes[t - 1]
        stack_t[h] = t
        h += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            h -= loop_len[k]
    for q in range(h):
        out[stack_t[q]] = True


@njit(**_JIT)
def erasable_cover(codes, last_same, child, loop_id, loop_len):
    """Steps covered by some erasable sub-path s[a, b] of the window.

    A step i is covered when there are a < i <= b with the pruning of s[a, b]
    reduced to its start point. ``last_same[a]`` is the last time after a at
    which the path revisits s_a (-1 if never); no erasable s[a, b] ends later.
    """
    n = codes.shape[0]
    reach = np.full(n + 1, -1, np.int64)
    stack_c = np.empty(n + 1, np.int64)
    for a in range(n):
        b_last = last_same[a]
        if b_last <= a:
            continue
        h = 0
        best = -1
        for t in range(a + 1, b_last + 1):
            stack_c[h] = codes[t - 1]
            h += 1
            k = match_top(stack_c, h, child, loop_id)
            if k >= 0:
                h -= loop_len[k]
                if h == 0:
                    best = t
        reach[a] = best
    covered = np.zeros(n + 1, np.bool_)
    far = -1
    for a in range(n):
        if reach[a] > far:
            far = reach[a]
        if far > a:
            covered[a + 1] = True
    return covered


@njit(**_JIT)
def dfs_walks(ncodes, max_len, child, loop_id, loop_len, max_drop, target, out, collect):
    """Exhaustive search over all code sequences of length <= max_len.

    Counts, per length, the sequences whose pruning equals ``target``; with
    ``collect`` the sequences are written row-wise into ``out`` (padded -1).
    Branches are cut only when the pruned height cannot come back to
    len(target) in the remaining steps.
    """
    counts = np.zeros(max_len + 1, np.int64)
    tl = target.shape[0]
    if tl == 0:
        counts[0] = 1
        if collect:
            out[0, :] = -1
    stack_c = np.empty(max_len + 1, np.int64)
    choice = np.full(max_len + 1, -1, np.int64)
    h_before = np.zeros(max_len + 1, np.int64)
    saved = np.zeros((max_len + 1, max_drop + 1), np.int64)
    seq = np.empty(max_len + 1, np.int64)
    n_found = counts[0]
    h = 0
    depth = 0
    if max_len == 0:
        return counts
    while depth >= 0:
        choice[depth] += 1
        if choice[depth] == ncodes:
            depth -= 1
            if depth >= 0:
                hb = h_before[depth]
                nsave = hb - h
                for q in range(nsave):
                    stack_c[h + q] = saved[depth, q]
                h = hb
            continue
        c = choice[depth]
        seq[depth] = c
        hb = h
        h_before[depth] = hb
        stack_c[h] = c
        h += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            L = loop_len[k]
            h -= L
            for q in range(hb - h):
                saved[depth, q] = stack_c[h + q]
        n = depth + 1
        if h == tl:
            same = True
            for q in range(tl):
                if stack_c[q] != target[q]:
                    same = False
                    break
            if same:
                counts[n] += 1
                if collect:
                    for q in range(n):
                        out[n_found, q] = seq[q]
                    for q in range(n, out.shape[1]):
                        out[n_found, q] = -1
                n_found += 1
        if n < max_len and h - tl <= max_drop * (max_len - n):
            depth += 1
            choice[depth] = -1
        else:
            nsave = hb - h
            for q in range(nsave):
                stack_c[h + q] = saved[depth, q]
            h = hb
    return counts


@njit(**_JIT)
def _displace(rng, d, k, x):
    """Add to x the displacement of k uniform unit steps in Z^d."""
    left = k
    for axis in range(d):
        if axis == d - 1:
            na = left
        else:
            na = rng.binomial(left, 1.0 / (d - axis))
        left -= na
        if na > 0:
            up = rng.binomial(na, 0.5)
            x[axis] += 2 * up - na


@njit(**_JIT)
def first_return_time(rng, d, horizon, single_below):
    """First time in [1, horizon] at which the walk is back at 0, else -1.

    While the walk sits at l1 distance r > 0 it cannot hit 0 before r more
    steps, so the position after r steps is drawn in one multinomial jump;
    hitting 0 within the jump can only happen at its last step.
    """
    x = np.zeros(d, np.int64)
    t = 0
    ncodes = 2 * d
    while t < horizon:
        r = 0
        for i in range(d):
            r += abs(x[i])
        if r == 0 and t > 0:
            return t
        if r < single_below:
            c = int(rng.random() * ncodes)
            if c % 2 == 0:
                x[c // 2] += 1
            else:
                x[c // 2] -= 1
            t += 1
            continue
        k = r
        if k > horizon - t:
            k = horizon - t
        _displace(rng, d, k, x)
        t += k
    r = 0
    for i in range(d):
        r += abs(x[i])
    if r == 0:
        return t
    return -1


@njit(**_JIT)
def first_excursion(rng, d, horizon, out):
    """Simulate step by step until the first return to 0 or the horizon.

    Step codes are written into ``out``; returns the return time or -1.
    """
    x = np.zeros(d, np.int64)
    ncodes = 2 * d
    for t in range(horizon):
        c = int(rng.random() * ncodes)
        out[t] = c
        if c % 2 == 0:
            x[c // 2] += 1
        else:
            x[c // 2] -= 1
        r = 0
        for i in range(d):
            r += abs(x[i])
        if r == 0:
            return t + 1
        if r > horizon - t - 1:
            return -1
    return -1


@njit(**_JIT)
def step_codes(rng, n, d):
    out = np.empty(n, np.int64)
    ncodes = 2 * d
    for t in range(n):
        out[t] = int(rng.random() * ncodes)
    return out


@njit(**_JIT)
def first_return_block(rng, n, d, horizon, single_below, out):
    for i in range(n):
        out[i] = first_return_time(rng, d, horizon, single_below)


@njit(**_JIT)
def erasable_codes(codes, child, loop_id, loop_len):
    n = codes.shape[0]
    stack_c = np.empty(n + 1, np.int64)
    h = 0
    for t in range(n):
        stack_c[h] = codes[t]
        h += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            h -= loop_len[k]
    return h == 0


@njit(**_JIT)
def excursion_block(rng, n, d, horizon, child, loop_id, loop_len, buf, out_time, out_erasable):
    """First excursions of n walks: return time (-1 if none by the horizon)
    and whether the returned excursion is erasable."""
    for i in range(n):
        tau = first_excursion(rng, d, horizon, buf)
        out_time[i] = tau
        out_erasable[i] = False
        if tau > 0:
            out_erasable[i] = erasable_codes(buf[:tau], child, loop_id, loop_len)


@njit(**_JIT)
def walk_points(codes, d):
    n = codes.shape[0]
    pts = np.zeros((n + 1, d), np.int64)
    for t in range(n):
        c = codes[t]
        for i in range(d):
            pts[t + 1, i] = pts[t, i]
        if c % 2 == 0:
            pts[t + 1, c // 2] += 1
        else:
            pts[t + 1, c // 2] -= 1
    return pts


@njit(**_JIT)
def site_keys(pts):
    """Injective int64 keys of lattice points within a box of half-width 2^20 per axis."""
    n, d = pts.shape
    out = np.empty(n, np.int64)
    for t in range(n):
        k = 0
        for i in range(d):
            k = k * 2097152 + (pts[t, i] + 1048576)
        out[t] = k
    return out


@njit(**_JIT)
def origin_visits_pruned(codes, child, loop_id, loop_len, d, marks, out):
    """Local time at 0 of the pruning of s[0, marks[k]] for each increasing mark."""
    n = codes.shape[0]
    stack_c = np.empty(n + 1, np.int64)
    pos = np.zeros((n + 1, d), np.int64)
    zero_count = 1
    h = 0
    m = 0
    while m < marks.shape[0] and marks[m] == 0:
        out[m] = 1
        m += 1
    for t in range(1, n + 1):
        c = codes[t - 1]
        stack_c[h] = c
        for i in range(d):
            pos[h + 1, i] = pos[h, i]
        if c % 2 == 0:
            pos[h + 1, c // 2] += 1
        else:
            pos[h + 1, c // 2] -= 1
        h += 1
        is0 = True
        for i in range(d):
            if pos[h, i] != 0:
                is0 = False
        if is0:
            zero_count += 1
        k = match_top(stack_c, h, child, loop_id)
        if k >= 0:
            for q in range(h - loop_len[k] + 1, h + 1):
                z = True
                for i in range(d):
                    if pos[q, i] != 0:
                        z = False
                if z:
                    zero_count -= 1
            h -= loop_len[k]
        while m < marks.shape[0] and marks[m] == t:
            out[m] = zero_count
            m += 1


@njit(**_JIT)
def count_erasable(flat, offsets, child, loop_id, loop_len):
    c = 0
    for i in range(offsets.shape[0] - 1):
        if erasable_codes(flat[offsets[i]:offsets[i + 1]], child, loop_id, loop_len):
            c += 1
    return c


@njit(**_JIT)
def left_witness(codes, a_lo, a_hi, rho, width, child, loop_id, loop_len):
    """Largest a in [a_lo, a_hi] such that one of the last ``width`` steps of
    s[a, rho] is erased by its pruning; -1 if there is none. Indices are
    positions in ``codes`` (step t is codes[t - 1])."""
    n = rho - a_lo
    stack_c = np.empty(n + 1, np.int64)
    stack_t = np.empty(n + 1, np.int64)
    for a in range(a_hi, a_lo - 1, -1):
        h = 0
        for t in range(a + 1, rho + 1):
            stack_c[h] = codes[t - 1]
            stack_t[h] = t
            h += 1
            k = match_top(stack_c, h, child, loop_id)
            if k >= 0:
                h -= loop_len[k]
        if h < width:
            return a
        for q in range(width):
            if stack_t[h - 1 - q] != rho - q:
                return a
    return -1


@njit(**_JIT)
def condition_block(rng, n, d, horizon, u, max_store, child, loop_id, loop_len,
                    out_skel, out_len, out_codes):
    """Walks of ``horizon`` steps: the first u skeleton steps and the first
    u + 1 pruned segments, as seen at the horizon.

    out_len[i, k] is the length of segment k, -1 when the skeleton is too
    short and -2 when the segment exceeds ``max_store`` steps.
    """
    codes = np.empty(horizon, np.int64)
    for i in range(n):
        for t in range(horizon):
            codes[t] = int(rng.random() * 2 * d)
        height, pop_time, top_after, stack_t, h = prune_scan(codes, child, loop_id, loop_len)
        N = np.empty(horizon + 1, np.int64)
        m = height[horizon]
        for t in range(horizon, -1, -1):
            if height[t] < m:
                m = height[t]
            N[t] = m
        inv = np.full(u + 2, -1, np.int64)
        k = 0
        for t in range(horizon + 1):
            while k <= u + 1 and N[t] >= k:
                inv[k] = t
                k += 1
        ok = inv[u + 1] >= 0
        for k in range(u + 1):
            if not ok:
                out_len[i, k] = -1
                continue
            a = inv[k]
            b = inv[k + 1] - 1
            ln = b - a
            if ln > max_store:
                out_len[i, k] = -2
                continue
            out_len[i, k] = ln
            for q in range(ln):
                out_codes[i, k, q] = codes[a + q]
        for k in range(u):
            out_skel[i, k] = codes[inv[k + 1] - 1] if ok else -1


@njit(**_JIT)
def staging_failures(codes, child, loop_id, loop_len):
    """Split points 0 < m < n where pruning s[0, m] first and then the
    remaining steps disagrees with the literal pruning of s."""
    ref = literal_prune_codes(codes, child, loop_id, loop_len)
    n = codes.shape[0]
    bad = 0
    buf = np.empty(n, np.int64)
    for m in range(1, n):
        head = final_stack_codes(codes[:m], child, loop_id, loop_len)
        k = head.shape[0]
        buf[:k] = head
        buf[k:k + n - m] = codes[m:]
        got = final_stack_codes(buf[:k + n - m], child, loop_id, loop_len)
        if got.shape[0] != ref.shape[0]:
            bad += 1
        else:
            for q in range(ref.shape[0]):
                if got[q] != ref[q]:
                    bad += 1
                    break
    return bad

"""Numba kernels for the lattice search passes.

The value table lives in a flat float64 array over the full lattice
``{0..T}^4`` (index ``((a*S+b)*S+c)*S+d`` with ``S = T+1``).  Only
canonical positions are processed; after an update the new value is
mirrored to all four orbit images so that child lookups inside the hot
loops are plain array reads, no canonicalization needed.

Each pass visits every canonical position once (in the caller-supplied
order), takes the maximum over all candidate moves, and applies it when
it beats the stored value by more than ``min_gain``.  The best move is
recorded per improved position: the raw (non-canonical) children for
splits, the factor and direction for scalings.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def fill_zero_bit(S, s):
    for a in range(S):
        for b in range(S):
            for c in range(S):
                base = ((a * S + b) * S + c) * S
                for d in range(S):
                    m1 = a if a < c else c
                    m2 = b if b < d else d
                    s[base + d] = m1 if m1 > m2 else m2


@njit(cache=True)
def split_pass(S, s, pos, orbit, order, min_gain,
               rec_idx, rec_val, rec_children, rec_pattern):
    """One splitting pass.  Returns (improved count, max gain)."""
    nrec = 0
    max_gain = 0.0
    for oi in range(order.shape[0]):
        i = order[oi]
        a = pos[i, 0]
        b = pos[i, 1]
        c = pos[i, 2]
        d = pos[i, 3]
        cur = s[((a * S + b) * S + c) * S + d]
        best = cur
        bp = -1
        bl0 = bl1 = bl2 = bl3 = 0
        br0 = br1 = br2 = br3 = 0
        # pattern 0: sender 1, anchor c, floor d
        if c > 0:
            for c0 in range(c // 2 + 1):
                d0 = d * c0 // c
                c1 = c - c0
                d1 = d * c1 // c
                off0 = c0 * S + d0
                off1 = c1 * S + d1
                for a0 in range(a + 1):
                    ab0 = a0 * S
                    ab1 = (a - a0) * S
                    for b0 in range(b + 1):
                        cand = s[(ab0 + b0) * S * S + off0] + \
                               s[(ab1 + b - b0) * S * S + off1]
                        if cand > best:
                            best = cand
                            bp = 0
                            bl0, bl1, bl2, bl3 = a0, b0, c0, d0
                            br0, br1, br2, br3 = a - a0, b - b0, c1, d1
        # pattern 1: sender 1, anchor d, floor c
        if d > 0:
            for d0 in range(d // 2 + 1):
                c0 = c * d0 // d
                d1 = d - d0
                c1 = c * d1 // d
                off0 = c0 * S + d0
                off1 = c1 * S + d1
                for a0 in range(a + 1):
                    ab0 = a0 * S
                    ab1 = (a - a0) * S
                    for b0 in range(b + 1):
                        cand = s[(ab0 + b0) * S * S + off0] + \
                               s[(ab1 + b - b0) * S * S + off1]
                        if cand > best:
                            best = cand
                            bp = 1
                            bl0, bl1, bl2, bl3 = a0, b0, c0, d0
                            br0, br1, br2, br3 = a - a0, b - b0, c1, d1
        # pattern 2: sender 2, anchor a, floor b
        if a > 0:
            for a0 in range(a // 2 + 1):
                b0v = b * a0 // a
                a1 = a - a0
                b1v = b * a1 // a
                off0 = (a0 * S + b0v) * S * S
                off1 = (a1 * S + b1v) * S * S
                for c0 in range(c + 1):
                    cd0 = c0 * S
                    cd1 = (c - c0) * S
                    for d0 in range(d + 1):
                        cand = s[off0 + cd0 + d0] + s[off1 + cd1 + d - d0]
                        if cand > best:
                            best = cand
                            bp = 2
                            bl0, bl1, bl2, bl3 = a0, b0v, c0, d0
                            br0, br1, br2, br3 = a1, b1v, c - c0, d - d0
        # pattern 3: sender 2, anchor b, floor a
        if b > 0:
            for b0 in range(b // 2 + 1):
                a0v = a * b0 // b
                b1 = b - b0
                a1v = a * b1 // b
                off0 = (a0v * S + b0) * S * S
                off1 = (a1v * S + b1) * S * S
                for c0 in range(c + 1):
                    cd0 = c0 * S
                    cd1 = (c - c0) * S
                    for d0 in range(d + 1):
                        cand = s[off0 + cd0 + d0] + s[off1 + cd1 + d - d0]
                        if cand > best:
                            best = cand
                            bp = 3
                            bl0, bl1, bl2, bl3 = a0v, b0, c0, d0
                            br0, br1, br2, br3 = a1v, b1, c - c0, d - d0
        gain = best - cur
        if gain > min_gain:
            if gain > max_gain:
                max_gain = gain
            for k in range(4):
                s[orbit[i, k]] = best
            rec_idx[nrec] = i
            rec_val[nrec] = best
            rec_pattern[nrec] = bp
            rec_children[nrec, 0] = bl0
            rec_children[nrec, 1] = bl1
            rec_children[nrec, 2] = bl2
            rec_children[nrec, 3] = bl3
            rec_children[nrec, 4] = br0
            rec_children[nrec, 5] = br1
            rec_children[nrec, 6] = br2
            rec_children[nrec, 7] = br3
            nrec += 1
    return nrec, max_gain


@njit(cache=True)
def scale_pass(S, s, pos, orbit, order, min_gain, upward,
               rec_idx, rec_val, rec_factor, rec_up):
    """One scaling pass; pulls values down from integer multiples.

    With ``upward`` set, positions additionally inherit scaled-up values
    from their integer divisors (experimental, off by default).
    Returns (improved count, max gain).
    """
    T = S - 1
    nrec = 0
    max_gain = 0.0
    for oi in range(order.shape[0]):
        i = order[oi]
        a = pos[i, 0]
        if a == 0:
            continue
        b = pos[i, 1]
        c = pos[i, 2]
        d = pos[i, 3]
        cur = s[((a * S + b) * S + c) * S + d]
        best = cur
        bf = 0
        bup = False
        lam = 2
        while lam * a <= T:
            cand = s[(((lam * a) * S + lam * b) * S + lam * c) * S + lam * d] / lam
            if cand > best:
                best = cand
                bf = lam
                bup = False
            lam += 1
        if upward:
            lam = 2
            while lam <= a:
                if a % lam == 0 and b % lam == 0 and c % lam == 0 and d % lam == 0:
                    cand = s[(((a // lam) * S + b // lam) * S + c // lam) * S
                             + d // lam] * lam
                    if cand > best:
                        best = cand
                        bf = lam
                        bup = True
                lam += 1
        gain = best - cur
        if gain > min_gain:
            if gain > max_gain:
                max_gain = gain
            for k in range(4):
                s[orbit[i, k]] = best
            rec_idx[nrec] = i
            rec_val[nrec] = best
            rec_factor[nrec] = bf
            rec_up[nrec] = bup
            nrec += 1
    return nrec, max_gain


def make_record_buffers(n):
    return (np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.float64),
            np.empty((n, 8), dtype=np.int16),
            np.empty(n, dtype=np.int8))


def make_scale_buffers(n):
    return (np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.float64),
            np.empty(n, dtype=np.int32),
            np.empty(n, dtype=np.bool_))

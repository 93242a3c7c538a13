# cython: language_level=3
"""Compiled kernels: scalar loops with early exit, draw-for-draw
identical to `_kernel_py` (see that module for the stream contract)."""

import numpy as np

from libc.stdint cimport int16_t, int32_t, int64_t, uint8_t, uint64_t

BACKEND_NAME = "cython"

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _u01(uint64_t seed, uint64_t index) nogil:
    return <double>(_mix64(seed + (index + 1) * GOLDEN) >> 11) * INV_2_53


def clause_outputs(states, int n_states, x, bint training):
    """Per-clause 0/1 outputs of one class bank for a single input."""
    cdef int16_t[:, ::1] bank = states
    cdef uint8_t[::1] xv = x
    cdef int C = bank.shape[0]
    cdef int L = bank.shape[1]
    cdef int F = L // 2
    out_arr = np.zeros(C, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef int c, l, v
    cdef bint any_inc, ok
    for c in range(C):
        any_inc = 0
        ok = 1
        for l in range(L):
            if bank[c, l] > n_states:
                any_inc = 1
                v = xv[l] if l < F else 1 - xv[l - F]
                if v == 0:
                    ok = 0
                    break
        if any_inc:
            out[c] = 1 if ok else 0
        else:
            out[c] = 1 if training else 0
    return out_arr


def class_scores_batch(states, int n_states, X):
    """Inference-mode vote sums, shape (examples, classes), dtype int32."""
    cdef int16_t[:, :, ::1] st = states
    cdef uint8_t[:, ::1] xs = X
    cdef int K = st.shape[0]
    cdef int C = st.shape[1]
    cdef int L = st.shape[2]
    cdef int F = L // 2
    cdef int n = xs.shape[0]
    scores = np.zeros((n, K), dtype=np.int32)
    cdef int32_t[:, ::1] sc = scores
    cdef int i, k, c, l, v
    cdef int32_t s
    cdef bint any_inc, ok
    with nogil:
        for i in range(n):
            for k in range(K):
                s = 0
                for c in range(C):
                    any_inc = 0
                    ok = 1
                    for l in range(L):
                        if st[k, c, l] > n_states:
                            any_inc = 1
                            v = xs[i, l] if l < F else 1 - xs[i, l - F]
                            if v == 0:
                                ok = 0
                                break
                    if any_inc and ok:
                        s += 1 if c % 2 == 0 else -1
                sc[i, k] = s
    return scores


cdef inline (uint64_t, int64_t, int64_t) _update_bank(
    int16_t[:, ::1] bank,
    uint8_t[::1] lit,
    bint is_target,
    int threshold,
    double p_low,
    double p_high,
    int n_states,
    uint64_t seed,
    uint64_t counter,
    uint8_t[::1] out,
    uint8_t[::1] sel,
) nogil:
    cdef int C = bank.shape[0]
    cdef int L = bank.shape[1]
    cdef int c, l, votes, v
    cdef bint any_inc, ok, c_pos
    cdef double p, u
    cdef int64_t type_i = 0
    cdef int64_t type_ii = 0
    cdef int high = 2 * n_states

    votes = 0
    for c in range(C):
        any_inc = 0
        ok = 1
        for l in range(L):
            if bank[c, l] > n_states:
                any_inc = 1
                if lit[l] == 0:
                    ok = 0
                    break
        out[c] = 1 if (ok or not any_inc) else 0
        if out[c]:
            votes += 1 if c % 2 == 0 else -1

    v = votes
    if v > threshold:
        v = threshold
    elif v < -threshold:
        v = -threshold
    if is_target:
        p = (threshold - v) / (2.0 * threshold)
    else:
        p = (threshold + v) / (2.0 * threshold)

    for c in range(C):
        sel[c] = 1 if _u01(seed, counter) < p else 0
        counter += 1

    for c in range(C):
        if not sel[c]:
            continue
        c_pos = c % 2 == 0
        if c_pos == is_target:
            # reinforcement: 2F draws, literal order
            type_i += 1
            if out[c]:
                for l in range(L):
                    u = _u01(seed, counter)
                    counter += 1
                    if lit[l]:
                        if u < p_high and bank[c, l] < high:
                            bank[c, l] += 1
                    else:
                        if u < p_low and bank[c, l] > 1:
                            bank[c, l] -= 1
            else:
                for l in range(L):
                    u = _u01(seed, counter)
                    counter += 1
                    if u < p_low and bank[c, l] > 1:
                        bank[c, l] -= 1
        else:
            # penalty: deterministic, no draws
            if out[c]:
                type_ii += 1
                for l in range(L):
                    if lit[l] == 0 and bank[c, l] <= n_states:
                        bank[c, l] += 1

    return counter, type_i, type_ii


def train_epoch(states, int n_states, X, y, int threshold, double specificity,
                seeds, counters):
    """One in-order pass over (X, y); mutates states and counters in place.

    Returns (reinforcement events, penalty events), counted per clause.
    """
    cdef int16_t[:, :, ::1] st = states
    cdef uint8_t[:, ::1] xs = X
    cdef int64_t[::1] ys = y
    cdef uint64_t[::1] sd = seeds
    cdef uint64_t[::1] ct = counters
    cdef int K = st.shape[0]
    cdef int C = st.shape[1]
    cdef int L = st.shape[2]
    cdef int F = L // 2
    cdef int n = xs.shape[0]
    cdef double p_low = 1.0 / specificity
    cdef double p_high = (specificity - 1.0) / specificity

    lit_arr = np.empty(L, dtype=np.uint8)
    out_arr = np.empty(C, dtype=np.uint8)
    sel_arr = np.empty(C, dtype=np.uint8)
    cdef uint8_t[::1] lit = lit_arr
    cdef uint8_t[::1] out = out_arr
    cdef uint8_t[::1] sel = sel_arr

    cdef int64_t type_i = 0
    cdef int64_t type_ii = 0
    cdef int64_t ev1, ev2, target, neg
    cdef int i, l
    cdef double u
    cdef uint64_t ctr

    with nogil:
        for i in range(n):
            for l in range(F):
                lit[l] = xs[i, l]
                lit[F + l] = 1 - xs[i, l]
            target = ys[i]

            ctr, ev1, ev2 = _update_bank(
                st[target], lit, 1, threshold, p_low, p_high, n_states,
                sd[target], ct[target], out, sel)
            ct[target] = ctr
            type_i += ev1
            type_ii += ev2

            if K >= 2:
                u = _u01(sd[K], ct[K])
                ct[K] += 1
                neg = <int64_t>(u * (K - 1))
                if neg >= K - 1:
                    neg = K - 2
                if neg >= target:
                    neg += 1
                ctr, ev1, ev2 = _update_bank(
                    st[neg], lit, 0, threshold, p_low, p_high, n_states,
                    sd[neg], ct[neg], out, sel)
                ct[neg] = ctr
                type_i += ev1
                type_ii += ev2

    return int(type_i), int(type_ii)

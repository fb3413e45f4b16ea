# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
"""int64 inner loop for the mass-splitting consensus rounds.

Mirrors the pure-Python reference round for round: same phase order, same
node order, same PCG32 draw sequence.  Masses are plain int64; the loop
re-checks its headroom every round and hands the instance back to the
caller (status 1) before anything could overflow, so results are either
bit-identical to the reference or not produced at all.
"""

from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.stdlib cimport calloc, free

cdef uint64_t _MULT = 6364136223846793005u

# Masses at or below this bound cannot overflow int64 within one round even
# if every node forwards its whole holding to one target (n is capped at
# 4096 by the caller, and 2**45 * (4096 + 1) is still well under 2**63).
cdef int64_t _W_SAFE = (<int64_t>1) << 45
W_SAFE = _W_SAFE


cdef inline uint32_t _next_u32(uint64_t *state, uint64_t inc) nogil:
    cdef uint64_t old = state[0]
    cdef uint32_t xorshifted, rot
    state[0] = old * _MULT + inc
    xorshifted = <uint32_t>(((old >> 18) ^ old) >> 27)
    rot = <uint32_t>(old >> 59)
    return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))


cdef inline uint32_t _randbelow(uint32_t n, uint64_t *state, uint64_t inc) nogil:
    # Lemire-free rejection sampling; must consume draws exactly like the
    # Python implementation (no draw at all for n <= 1).
    cdef uint32_t threshold, r
    if n <= 1:
        return 0
    threshold = (<uint32_t>(0 - n)) % n
    while True:
        r = _next_u32(state, inc)
        if r >= threshold:
            return r % n


cdef inline int64_t _fdiv(int64_t num, int64_t den) nogil:
    # floor division for den > 0 (C division truncates toward zero)
    cdef int64_t q = num / den
    if num % den != 0 and num < 0:
        q -= 1
    return q


cdef inline int64_t _cdiv(int64_t num, int64_t den) nogil:
    return -_fdiv(-num, den)


def run_rounds(w_list, out_adj, in_adj, d_eff_in, max_rounds_in,
               rng_state_in, rng_inc_in):
    """Run consensus rounds on integer masses until the stop test passes.

    ``w_list`` holds each node's initial (integer) mass; every node starts
    with z = 2 tokens.  Returns ``(status, rounds, m_common, mass_tx,
    alphabet, rng_state, rng_inc)`` where status 0 means the protocol
    stopped, 1 means the headroom guard tripped (caller should replay the
    instance in pure Python from its RNG snapshot), 2 means the round cap
    was hit, and 3 means the stop test fired with disagreeing nodes (a
    protocol-invariant violation; never expected).
    """
    cdef Py_ssize_t n = len(w_list)
    cdef int64_t d_eff = d_eff_in
    cdef int64_t max_rounds = max_rounds_in
    cdef uint64_t state = rng_state_in
    cdef uint64_t inc = rng_inc_in

    cdef Py_ssize_t i, j, e, deg, pick, tgt, q_len
    cdef Py_ssize_t total_out = 0, total_in = 0
    cdef int64_t lam = 0, mass_tx = 0, m_common = 0
    cdef int64_t c, best_M, best_m
    cdef int status = 2
    cdef bint stop_ok, bailed = False

    for i in range(n):
        total_out += len(out_adj[i])
        total_in += len(in_adj[i])

    cdef int64_t *y = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef int64_t *z = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef int64_t *M = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef int64_t *m = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef int64_t *newM = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef int64_t *newm = <int64_t *>calloc(n if n else 1, sizeof(int64_t))
    cdef Py_ssize_t *o_ptr = <Py_ssize_t *>calloc(n + 1, sizeof(Py_ssize_t))
    cdef Py_ssize_t *o_idx = <Py_ssize_t *>calloc(total_out if total_out else 1,
                                                  sizeof(Py_ssize_t))
    cdef Py_ssize_t *i_ptr = <Py_ssize_t *>calloc(n + 1, sizeof(Py_ssize_t))
    cdef Py_ssize_t *i_idx = <Py_ssize_t *>calloc(total_in if total_in else 1,
                                                  sizeof(Py_ssize_t))
    cdef Py_ssize_t *q_tgt = <Py_ssize_t *>calloc(2 * n + 1, sizeof(Py_ssize_t))
    cdef int64_t *q_val = <int64_t *>calloc(2 * n + 1, sizeof(int64_t))

    alphabet = set()

    try:
        if (y == NULL or z == NULL or M == NULL or m == NULL or newM == NULL
                or newm == NULL or o_ptr == NULL or o_idx == NULL
                or i_ptr == NULL or i_idx == NULL or q_tgt == NULL
                or q_val == NULL):
            raise MemoryError()

        for i in range(n):
            y[i] = w_list[i]
            z[i] = 2

        e = 0
        for i in range(n):
            o_ptr[i] = e
            for v in out_adj[i]:
                o_idx[e] = v
                e += 1
        o_ptr[n] = e
        e = 0
        for i in range(n):
            i_ptr[i] = e
            for v in in_adj[i]:
                i_idx[e] = v
                e += 1
        i_ptr[n] = e

        for lam in range(1, max_rounds + 1):
            # headroom guard: hand back to the pure path before any chance
            # of overflow (deliveries can grow a holding by a factor ~n)
            for i in range(n):
                if y[i] > _W_SAFE or y[i] < -_W_SAFE:
                    bailed = True
                    break
            if bailed:
                status = 1
                break

            # (a) epoch start: snapshot ceil/floor of each node's average
            if lam % d_eff == 1:
                for i in range(n):
                    if z[i] >= 1:
                        m[i] = _fdiv(y[i], z[i])
                        M[i] = _cdiv(y[i], z[i])

            # (b) one synchronous max/min flood step over in-neighbours
            for i in range(n):
                best_M = M[i]
                best_m = m[i]
                for e in range(i_ptr[i], i_ptr[i + 1]):
                    j = i_idx[e]
                    if M[j] > best_M:
                        best_M = M[j]
                    if m[j] < best_m:
                        best_m = m[j]
                newM[i] = best_M
                newm[i] = best_m
            for i in range(n):
                M[i] = newM[i]
                m[i] = newm[i]

            # (c) each node splits its holding into z-1 posted chunks
            q_len = 0
            for i in range(n):
                deg = o_ptr[i + 1] - o_ptr[i]
                while z[i] > 1:
                    c = _fdiv(y[i], z[i])
                    y[i] -= c
                    z[i] -= 1
                    pick = _randbelow(<uint32_t>(1 + deg), &state, inc)
                    if pick == 0:
                        tgt = i
                    else:
                        tgt = o_idx[o_ptr[i] + pick - 1]
                    q_tgt[q_len] = tgt
                    q_val[q_len] = c
                    q_len += 1
                    mass_tx += 1
                    alphabet.add(c)

            # (d) deliver everything queued this round
            for e in range(q_len):
                y[q_tgt[e]] += q_val[e]
                z[q_tgt[e]] += 1

            # (e) epoch end: stop once the flooded extrema are adjacent
            if lam % d_eff == 0:
                stop_ok = True
                for i in range(n):
                    if M[i] - m[i] > 1:
                        stop_ok = False
                        break
                if stop_ok:
                    m_common = m[0]
                    status = 0
                    for i in range(1, n):
                        if m[i] != m_common or M[i] != M[0]:
                            status = 3
                            break
                    break

        if status == 1:
            return (1, 0, 0, 0, [], rng_state_in, rng_inc_in)
        return (status, int(lam), int(m_common), int(mass_tx),
                sorted(alphabet), int(state), int(inc))
    finally:
        free(y)
        free(z)
        free(M)
        free(m)
        free(newM)
        free(newm)
        free(o_ptr)
        free(o_idx)
        free(i_ptr)
        free(i_idx)
        free(q_tgt)
        free(q_val)

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Signatures and results match ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef inline double _G(double y, double h, double b) noexcept nogil:
    return h * y if y > 0 else -b * y


def tbs_path(const int64_t[:] demand, int64_t r, int64_t S, int L, int L0,
             double h, double b, double cR, double cE, double step,
             int64_t I0, Py_ssize_t warmup, bint use_express, double[:] costs_out):
    """Run the constant-order / order-up-to policy over one demand path.

    All quantities are in lattice units.  Returns the mean per-period cost over
    periods ``[warmup, n)``; purchase cost is charged when the order is placed.
    """
    cdef Py_ssize_t n = demand.shape[0]
    cdef Py_ssize_t t, k
    cdef int64_t[:] qR = np.zeros(L + 1, dtype=np.int64)
    cdef int64_t[:] qE = np.zeros(L0 + 1, dtype=np.int64)
    cdef int64_t inv = I0, pos, qe, arrive
    cdef double cost, total = 0.0
    cdef bint record = costs_out.shape[0] >= n
    with nogil:
        for t in range(n):
            # expedited position: on hand + express due in [t, t+L0) + regular due in [t, t+L0]
            pos = inv
            for k in range(1, L0 + 1):
                if t - k >= 0:
                    pos += qE[(t - k) % (L0 + 1)]
            for k in range(L - L0, L + 1):
                if t - k >= 0:
                    pos += qR[(t - k) % (L + 1)]
            qe = 0
            if use_express and S > pos:
                qe = S - pos
            qE[t % (L0 + 1)] = qe
            qR[t % (L + 1)] = r
            arrive = 0
            if t - L0 >= 0:
                arrive = qE[(t - L0) % (L0 + 1)]
            if t - L >= 0:
                arrive += qR[(t - L) % (L + 1)]
            inv = inv + arrive - demand[t]
            cost = (cR * r + cE * qe) * step + _G(inv * step, h, b)
            if record:
                costs_out[t] = cost
            if t >= warmup:
                total += cost
    return total / (n - warmup)


def table_path(const int64_t[:] demand, const int64_t[:] qR_tab, const int64_t[:] qE_tab,
               int m, int capR, int64_t pmin, int64_t pmax, int L, int L0,
               double h, double b, double cR, double cE, double step,
               int64_t I0, Py_ssize_t warmup, double[:] costs_out):
    """Run a tabulated policy indexed by (truncated regular pipeline, expedited position).

    Returns ``(mean_cost, escape_period, escape_position)``; escape_period is -1
    when the path stayed inside the table.
    """
    cdef Py_ssize_t n = demand.shape[0]
    cdef Py_ssize_t t, k
    cdef int64_t[:] qR = np.zeros(L + 1, dtype=np.int64)
    cdef int64_t[:] qE = np.zeros(L0 + 1, dtype=np.int64)
    cdef int64_t inv = I0, pos, qe, qr, arrive, pidx, NX = pmax - pmin + 1
    cdef int64_t base = capR + 1
    cdef double cost, total = 0.0
    cdef bint record = costs_out.shape[0] >= n
    cdef Py_ssize_t escape = -1
    with nogil:
        for t in range(n):
            pos = inv
            for k in range(1, L0 + 1):
                if t - k >= 0:
                    pos += qE[(t - k) % (L0 + 1)]
            for k in range(L - L0, L + 1):
                if t - k >= 0:
                    pos += qR[(t - k) % (L + 1)]
            if pos < pmin or pos > pmax:
                escape = t
                break
            # pipeline entry j (1-based) is the regular order placed at t - (m + 1 - j)
            pidx = 0
            for k in range(m, 0, -1):
                pidx = pidx * base
                if t - k >= 0:
                    pidx += qR[(t - k) % (L + 1)]
            qr = qR_tab[pidx * NX + pos - pmin]
            qe = qE_tab[pidx * NX + pos - pmin]
            qE[t % (L0 + 1)] = qe
            qR[t % (L + 1)] = qr
            arrive = 0
            if t - L0 >= 0:
                arrive = qE[(t - L0) % (L0 + 1)]
            if t - L >= 0:
                arrive += qR[(t - L) % (L + 1)]
            inv = inv + arrive - demand[t]
            cost = (cR * qr + cE * qe) * step + _G(inv * step, h, b)
            if record:
                costs_out[t] = cost
            if t >= warmup:
                total += cost
    if escape >= 0:
        return float("nan"), escape, pos
    return total / (n - warmup), -1, 0


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _splitmix(uint64_t* s) noexcept nogil:
    s[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = s[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def walk_sup(const int64_t[:] d_units, const uint64_t[:] thresholds, int64_t r,
             Py_ssize_t steps, const uint64_t[:] seeds):
    """Per-path ``max(0, W_1, ..., W_steps)`` with ``W_k = sum_j (r - D_j)``.

    Demand is drawn by inverse CDF from 53-bit uniforms of a per-path
    xoshiro256** stream seeded through splitmix64.
    """
    cdef Py_ssize_t npaths = seeds.shape[0], nd = d_units.shape[0]
    cdef cnp.ndarray[int64_t, ndim=1] out_arr = np.zeros(npaths, dtype=np.int64)
    cdef int64_t[:] out = out_arr
    cdef Py_ssize_t i, k, j
    cdef uint64_t sm, s0, s1, s2, s3, res, tt, u
    cdef int64_t w, best
    with nogil:
        for i in range(npaths):
            sm = seeds[i]
            s0 = _splitmix(&sm)
            s1 = _splitmix(&sm)
            s2 = _splitmix(&sm)
            s3 = _splitmix(&sm)
            w = 0
            best = 0
            for k in range(steps):
                res = _rotl(s1 * 5, 7) * 9
                tt = s1 << 17
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= tt
                s3 = _rotl(s3, 45)
                u = res >> 11
                j = 0
                while j < nd - 1 and u >= thresholds[j]:
                    j += 1
                w += r - d_units[j]
                if w > best:
                    best = w
            out[i] = best
    return out_arr


def bellman_sweep(const double[:] V, const double[:] probs, const int64_t[:] d_units,
                  const double[:] Gbar, double c_step, int m, int capR, int capE, int NX):
    """One undiscounted Bellman operator application on the truncated state space.

    State ``(p, i)`` is pipeline index p (first entry most significant, base
    ``capR + 1``) and position index i.  Returns ``(TV, qR, qE)`` flattened as
    ``p * NX + i``.  Ties go to the smallest express order, then smallest qR.
    """
    cdef int base = capR + 1
    cdef Py_ssize_t P = V.shape[0] // NX, NZ = NX + capR
    cdef Py_ssize_t top = P // base
    cdef Py_ssize_t nd = probs.shape[0]
    cdef cnp.ndarray[double, ndim=1] EV_arr = np.empty(P * NZ)
    cdef cnp.ndarray[double, ndim=1] B_arr = np.empty(top * NZ)
    cdef cnp.ndarray[int64_t, ndim=1] QB_arr = np.empty(top * NZ, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] TV_arr = np.empty(P * NX)
    cdef cnp.ndarray[int64_t, ndim=1] QR_arr = np.empty(P * NX, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] QE_arr = np.empty(P * NX, dtype=np.int64)
    cdef double[:] EV = EV_arr, B = B_arr, TV = TV_arr
    cdef int64_t[:] QB = QB_arr, QR = QR_arr, QE = QE_arr
    cdef Py_ssize_t p, k, j, idx, t, q, i, e, R1, kk
    cdef double acc, best, val
    cdef int64_t bq, be
    with nogil:
        for p in range(P):
            for k in range(NZ):
                acc = 0.0
                for j in range(nd):
                    idx = k - d_units[j]
                    if idx < 0:
                        idx = 0
                    elif idx > NX - 1:
                        idx = NX - 1
                    acc = acc + probs[j] * V[p * NX + idx]
                EV[p * NZ + k] = acc
        for t in range(top):
            for k in range(NZ):
                best = EV[(t * base) * NZ + k]
                bq = 0
                for q in range(1, base):
                    val = EV[(t * base + q) * NZ + k]
                    if val < best:
                        best = val
                        bq = q
                B[t * NZ + k] = best
                QB[t * NZ + k] = bq
        for p in range(P):
            R1 = p // top
            t = p % top
            for i in range(NX):
                best = 0.0
                be = -1
                for e in range(capE + 1):
                    if i + e > NX - 1:
                        break
                    kk = i + e + R1
                    val = c_step * e + Gbar[i + e] + B[t * NZ + kk]
                    if be < 0 or val < best:
                        best = val
                        be = e
                TV[p * NX + i] = best
                QE[p * NX + i] = be
                QR[p * NX + i] = QB[t * NZ + i + be + R1]
    return TV_arr, QR_arr, QE_arr


def walk_sup_bytes(const int64_t[:] tot, const int64_t[:] pm, const int64_t[:] inc_u,
                   int bits, int per_byte, Py_ssize_t steps, const uint64_t[:] seeds):
    """Byte-batched variant of :func:`walk_sup` for dyadic demand laws.

    Each random byte encodes ``per_byte`` draws of ``bits`` bits; ``tot[v]`` and
    ``pm[v]`` are the summed increment and the running maximum of byte v.
    """
    cdef Py_ssize_t npaths = seeds.shape[0]
    cdef cnp.ndarray[int64_t, ndim=1] out_arr = np.zeros(npaths, dtype=np.int64)
    cdef int64_t[:] out = out_arr
    cdef Py_ssize_t i, g, j, groups = steps // per_byte, rem = steps % per_byte
    cdef uint64_t sm, s0, s1, s2, s3, res, tt, word = 0
    cdef int nbytes, v
    cdef int64_t w, best, cand
    cdef uint64_t mask = (1 << bits) - 1
    with nogil:
        for i in range(npaths):
            sm = seeds[i]
            s0 = _splitmix(&sm)
            s1 = _splitmix(&sm)
            s2 = _splitmix(&sm)
            s3 = _splitmix(&sm)
            w = 0
            best = 0
            nbytes = 0
            for g in range(groups + (1 if rem else 0)):
                if nbytes == 0:
                    res = _rotl(s1 * 5, 7) * 9
                    tt = s1 << 17
                    s2 ^= s0
                    s3 ^= s1
                    s1 ^= s2
                    s0 ^= s3
                    s2 ^= tt
                    s3 = _rotl(s3, 45)
                    word = res
                    nbytes = 8
                v = <int>(word & 0xFF)
                word >>= 8
                nbytes -= 1
                if g < groups:
                    cand = w + pm[v]
                    if cand > best:
                        best = cand
                    w += tot[v]
                else:
                    for j in range(rem):
                        w += inc_u[(v >> (j * bits)) & mask]
                        if w > best:
                            best = w
            out[i] = best
    return out_arr


def gth_band(double[:, :] B, int up, int down):
    """Stationary law of a banded chain by GTH state reduction (modifies ``B``).

    ``B[i, k]`` is the probability of moving from state i to ``i + k - down``;
    moves span ``[-down, up]``.  No subtractions are performed, so small
    probabilities keep full relative accuracy.
    """
    cdef Py_ssize_t N = B.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] s_arr = np.zeros(N + 1)
    cdef cnp.ndarray[double, ndim=1] pi_arr = np.zeros(N + 1)
    cdef double[:] s = s_arr, pi = pi_arr
    cdef Py_ssize_t n, i, j, jlo, ilo
    cdef double acc, f, tot
    with nogil:
        for n in range(N, 0, -1):
            jlo = n - down if n > down else 0
            acc = 0.0
            for j in range(jlo, n):
                acc = acc + B[n, j - n + down]
            s[n] = acc
            if acc <= 0.0:
                continue
            ilo = n - up if n > up else 0
            for i in range(ilo, n):
                f = B[i, n - i + down]
                if f == 0.0:
                    continue
                f = f / acc
                for j in range(jlo, n):
                    B[i, j - i + down] += f * B[n, j - n + down]
        pi[0] = 1.0
        tot = 1.0
        for n in range(1, N + 1):
            acc = 0.0
            ilo = n - up if n > up else 0
            for i in range(ilo, n):
                acc = acc + pi[i] * B[i, n - i + down]
            pi[n] = acc / s[n] if s[n] > 0.0 else 0.0
            tot = tot + pi[n]
        for n in range(N + 1):
            pi[n] = pi[n] / tot
    return pi_arr

"""Pure numpy implementations of the hot loops in ``_kernels.pyx``.

Same signatures, same tie-breaking, same RNG stream.  ``tbs_path`` and the
``walk_sup`` variants reproduce the compiled results bit for bit; ``bellman_sweep``
matches to rounding.
"""
from __future__ import annotations

import numpy as np

def tbs_path(demand, r, S, L, L0, h, b, cR, cE, step, I0, warmup, use_express, costs_out):
    """Vectorized via the reflected-walk form of the expedited position.

    With ``x_t`` the expedited position and ``y_t = max(x_t, S)``, one has
    ``y_{t+1} = max(y_t + a_t - D_t, S)`` where ``a_t`` is the regular order
    entering the express horizon.  The reflected walk has the closed form
    ``Y_t = C_t + max(Y_0, -min_{1<=s<=t} C_s)``.
    """
    D = np.asarray(demand, dtype=np.int64)
    n = D.size
    t = np.arange(n, dtype=np.int64)
    arr_R = np.where(t >= L, r, 0).astype(np.int64)
    if use_express:
        a = np.where(t + 1 - L + L0 >= 0, r, 0).astype(np.int64)
        inc = a - D
        C = np.concatenate(([0], np.cumsum(inc)))[:n]
        Y0 = max(I0 - S, 0)
        if n > 1:
            run_min = np.minimum.accumulate(C[1:])
            Y = np.empty(n, dtype=np.int64)
            Y[0] = Y0
            Y[1:] = C[1:] + np.maximum(Y0, -run_min)
        else:
            Y = np.array([Y0], dtype=np.int64)
        x = np.empty(n, dtype=np.int64)
        x[0] = I0
        x[1:] = S + Y[:-1] + inc[:-1]
        qE = S + Y - x
        arr_E = np.zeros(n, dtype=np.int64)
        arr_E[L0:] = qE[: max(n - L0, 0)]
    else:
        qE = np.zeros(n, dtype=np.int64)
        arr_E = qE
    inv = I0 + np.cumsum(arr_R + arr_E - D)
    y = inv * step
    costs = (cR * r + cE * qE) * step + np.where(y > 0, h * y, -b * y)
    if costs_out.shape[0] >= n:
        costs_out[:n] = costs
    return float(np.cumsum(costs[warmup:])[-1]) / (n - warmup)


def table_path(demand, qR_tab, qE_tab, m, capR, pmin, pmax, L, L0, h, b, cR, cE, step,
               I0, warmup, costs_out):
    n = len(demand)
    qR = [0] * (L + 1)
    qE = [0] * (L0 + 1)
    inv = int(I0)
    NX = pmax - pmin + 1
    base = capR + 1
    total = 0.0
    record = costs_out.shape[0] >= n
    for t in range(n):
        pos = inv
        for k in range(1, L0 + 1):
            if t - k >= 0:
                pos += qE[(t - k) % (L0 + 1)]
        for k in range(L - L0, L + 1):
            if t - k >= 0:
                pos += qR[(t - k) % (L + 1)]
        if pos < pmin or pos > pmax:
            return float("nan"), t, pos
        pidx = 0
        for k in range(m, 0, -1):
            pidx *= base
            if t - k >= 0:
                pidx += qR[(t - k) % (L + 1)]
        qr = int(qR_tab[pidx * NX + pos - pmin])
        qe = int(qE_tab[pidx * NX + pos - pmin])
        qE[t % (L0 + 1)] = qe
        qR[t % (L + 1)] = qr
        arrive = qE[(t - L0) % (L0 + 1)] if t >= L0 else 0
        if t >= L:
            arrive += qR[(t - L) % (L + 1)]
        inv = inv + arrive - int(demand[t])
        y = inv * step
        cost = (cR * qr + cE * qe) * step + (h * y if y > 0 else -b * y)
        if record:
            costs_out[t] = cost
        if t >= warmup:
            total += cost
    return total / (n - warmup), -1, 0


def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _splitmix(state):
    state += np.uint64(0x9E3779B97F4A7C15)
    z = state.copy()
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return state, z ^ (z >> np.uint64(31))


def walk_sup(d_units, thresholds, r, steps, seeds, chunk=4096):
    d_units = np.asarray(d_units, dtype=np.int64)
    thresholds = np.asarray(thresholds, dtype=np.uint64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.zeros(seeds.size, dtype=np.int64)
    with np.errstate(over="ignore"):
        for lo in range(0, seeds.size, chunk):
            sm = seeds[lo : lo + chunk].copy()
            sm, s0 = _splitmix(sm)
            sm, s1 = _splitmix(sm)
            sm, s2 = _splitmix(sm)
            sm, s3 = _splitmix(sm)
            w = np.zeros(sm.size, dtype=np.int64)
            best = np.zeros(sm.size, dtype=np.int64)
            for _ in range(steps):
                res = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
                tt = s1 << np.uint64(17)
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= tt
                s3 = _rotl(s3, 45)
                u = res >> np.uint64(11)
                j = np.searchsorted(thresholds, u, side="right")
                w += r - d_units[j]
                np.maximum(best, w, out=best)
            out[lo : lo + chunk] = best
    return out


def bellman_sweep(V, probs, d_units, Gbar, c_step, m, capR, capE, NX):
    base = capR + 1
    P = V.size // NX
    top = P // base
    NZ = NX + capR
    Vm = V.reshape(P, NX)
    k = np.arange(NZ)
    EV = np.zeros((P, NZ))
    for pj, dj in zip(probs, d_units):
        EV = EV + pj * Vm[:, np.clip(k - dj, 0, NX - 1)]
    EVq = EV.reshape(top, base, NZ)
    QB = np.argmin(EVq, axis=1)
    B = np.take_along_axis(EVq, QB[:, None, :], axis=1)[:, 0, :]

    p = np.arange(P)
    R1 = p // top
    tail = p % top
    Bp = B[tail]
    QBp = QB[tail]
    i = np.arange(NX)
    best = np.full((P, NX), np.inf)
    be = np.zeros((P, NX), dtype=np.int64)
    for e in range(capE + 1):
        ok = i + e <= NX - 1
        ii = i[ok]
        kk = ii[None, :] + e + R1[:, None]
        val = c_step * e + Gbar[ii + e][None, :] + np.take_along_axis(Bp, kk, axis=1)
        cur = best[:, ok]
        better = val < cur
        cur[better] = val[better]
        best[:, ok] = cur
        sub = be[:, ok]
        sub[better] = e
        be[:, ok] = sub
    kk = i[None, :] + be + R1[:, None]
    qR = np.take_along_axis(QBp, kk, axis=1)
    return best.ravel(), qR.ravel().astype(np.int64), be.ravel()


def walk_sup_bytes(tot, pm, inc_u, bits, per_byte, steps, seeds, chunk=8192):
    tot = np.asarray(tot, dtype=np.int64)
    pm = np.asarray(pm, dtype=np.int64)
    inc_u = np.asarray(inc_u, dtype=np.int64)
    seeds = np.asarray(seeds, dtype=np.uint64)
    groups, rem = divmod(steps, per_byte)
    mask = (1 << bits) - 1
    out = np.zeros(seeds.size, dtype=np.int64)
    with np.errstate(over="ignore"):
        for lo in range(0, seeds.size, chunk):
            sm = seeds[lo : lo + chunk].copy()
            sm, s0 = _splitmix(sm)
            sm, s1 = _splitmix(sm)
            sm, s2 = _splitmix(sm)
            sm, s3 = _splitmix(sm)
            w = np.zeros(sm.size, dtype=np.int64)
            best = np.zeros(sm.size, dtype=np.int64)
            word = None
            nbytes = 0
            for g in range(groups + (1 if rem else 0)):
                if nbytes == 0:
                    res = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
                    tt = s1 << np.uint64(17)
                    s2 ^= s0
                    s3 ^= s1
                    s1 ^= s2
                    s0 ^= s3
                    s2 ^= tt
                    s3 = _rotl(s3, 45)
                    word = res
                    nbytes = 8
                v = (word & np.uint64(0xFF)).astype(np.int64)
                word = word >> np.uint64(8)
                nbytes -= 1
                if g < groups:
                    np.maximum(best, w + pm[v], out=best)
                    w += tot[v]
                else:
                    for j in range(rem):
                        w += inc_u[(v >> (j * bits)) & mask]
                        np.maximum(best, w, out=best)
            out[lo : lo + chunk] = best
    return out


def gth_band(B, up, down):
    N = B.shape[0] - 1
    s = np.zeros(N + 1)
    for n in range(N, 0, -1):
        jlo = max(n - down, 0)
        row = B[n, jlo - n + down : down]
        acc = row.sum()
        s[n] = acc
        if acc <= 0.0:
            continue
        ilo = max(n - up, 0)
        i = np.arange(ilo, n)
        f = B[i, n - i + down] / acc
        # entry (i, j) lives at column j - i + down
        cols = np.arange(jlo, n)[None, :] - i[:, None] + down
        B[i[:, None], cols] += f[:, None] * row[None, :]
    pi = np.zeros(N + 1)
    pi[0] = 1.0
    for n in range(1, N + 1):
        ilo = max(n - up, 0)
        i = np.arange(ilo, n)
        pi[n] = (pi[i] @ B[i, n - i + down]) / s[n] if s[n] > 0 else 0.0
    return pi / pi.sum()

"""Exact laws of random-walk maxima via Lindley's recursion.

For the walk ``W_k = sum_{j<=k} (r - D_j)`` the prefix maximum
``Z_k = max(W_0, ..., W_{k-1})`` satisfies ``Z_{k+1} ~ max(Z_k + r - D, 0)``,
so iterating that map from a point mass at zero gives ``Z_k`` exactly and its
fixed point is the law of ``sup_j W_j``, the stationary overshoot ``I^r``.

The fixed point is computed directly as the stationary law of the reflected
walk, truncated where the Lundberg bound puts less than ``tol`` of mass
above, by GTH state reduction.  Plain iteration needs on the order of
``Var(D) / drift^2`` steps and becomes impractical as ``r`` nears ``E[D]``;
it is kept as ``method="iterate"`` for cross-checking.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .demand import DemandDistribution, LatticeDistribution, lattice_units, refinement_factor
from .errors import NoConvergence, NonNegativeDrift, OffLattice

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class WalkSpec:
    """Walk with increments ``r - D``; ``r`` is moved onto a refinement of the demand lattice."""

    demand: DemandDistribution
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise OffLattice(f"r must be nonnegative, got {self.r}")
        m = refinement_factor(self.demand.step, self.r)
        object.__setattr__(self, "demand", self.demand.refine(m))

    @property
    def step(self) -> float:
        return self.demand.step

    @property
    def r_units(self) -> int:
        return lattice_units(self.r, self.step)

    @property
    def drift(self) -> float:
        return self.r - self.demand.lattice().mean()

    def increment(self) -> LatticeDistribution:
        """Law of ``r - D`` on the walk lattice."""
        return self.demand.lattice().negated().shifted(self.r_units)

    def require_negative_drift(self) -> None:
        mean = self.demand.lattice().mean()
        if not self.r < mean - 1e-12 * max(1.0, mean):
            raise NonNegativeDrift(
                f"r = {self.r} is not below E[D] = {mean}; the supremum is infinite",
                r=self.r,
                mean=mean,
            )


@dataclass(frozen=True)
class LindleyResult:
    dist: LatticeDistribution
    iterations: int  # Lindley steps taken (0 for the direct solve)
    discarded_mass: float  # probability removed by truncation (a bound for the direct solve)
    last_tv: float  # TV change under one more Lindley step
    method: str = "iterate"
    states: int = 0


def _lindley_step(p: np.ndarray, inc_offset: int, inc_probs: np.ndarray) -> np.ndarray:
    """One application of ``nu -> law of max(X + inc, 0)`` on arrays starting at 0."""
    new = np.convolve(p, inc_probs)
    if inc_offset < 0:
        cut = -inc_offset
        if cut >= new.size:
            return np.array([new.sum()])
        out = new[cut:].copy()
        out[0] += new[:cut].sum()
        return out
    return np.concatenate((np.zeros(inc_offset), new))


def _trim_tail(p: np.ndarray, tail_tol: float) -> tuple[np.ndarray, float]:
    if tail_tol <= 0 or p.size <= 1:
        return p, 0.0
    tail = np.cumsum(p[::-1])[::-1]
    # tail[i] is the mass at indices >= i; keep entries whose tail mass reaches tail_tol
    keep = max(1, int(np.count_nonzero(tail >= tail_tol)))
    if keep >= p.size:
        return p, 0.0
    dropped = float(tail[keep])
    out = p[:keep] / (1.0 - dropped)
    return out, dropped


def _tv(a: np.ndarray, b: np.ndarray) -> float:
    n = max(a.size, b.size)
    if a.size < n:
        a = np.concatenate((a, np.zeros(n - a.size)))
    if b.size < n:
        b = np.concatenate((b, np.zeros(n - b.size)))
    return 0.5 * float(np.abs(a - b).sum())


@functools.lru_cache(maxsize=256)
def _fixed_point(demand: DemandDistribution, r_units: int, tol: float, max_iter: int) -> LindleyResult:
    step = demand.step
    inc = demand.lattice().negated().shifted(r_units)
    p = np.ones(1)
    discarded = 0.0
    tv = math.inf
    for it in range(1, max_iter + 1):
        new = _lindley_step(p, inc.offset, inc.probs)
        new, dropped = _trim_tail(new, tol)
        discarded += dropped
        tv = _tv(new, p)
        p = new
        if tv < tol:
            break
    else:
        raise NoConvergence(f"Lindley iteration did not reach TV < {tol} in {max_iter} steps", last_tv=tv)
    floor = tol / p.size
    small = p < floor
    if small.any():
        discarded += float(p[small].sum())
        p = np.where(small, 0.0, p)
        p = p / p.sum()
    return LindleyResult(LatticeDistribution(step, 0, p), it, discarded, tv)


def lundberg_exponent(inc: LatticeDistribution) -> float:
    """Positive root ``theta`` of ``E[exp(theta X)] = 1`` for a negative-drift increment, per lattice unit.

    ``P(sup_j W_j >= k) <= exp(-theta k)``.
    """
    x = inc.units.astype(np.float64)
    lp = np.log(np.where(inc.probs > 0, inc.probs, 1.0))
    lp[inc.probs <= 0] = -np.inf

    def f(t: float) -> float:
        a = lp + t * x
        m = a.max()
        return m + math.log(np.exp(a - m).sum())

    hi = 1.0
    while f(hi) <= 0.0:
        hi *= 2.0
    lo = 0.0
    while f(hi / 2) > 0.0 and hi > 1e-300:
        hi /= 2.0
    lo = hi / 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return lo


MAX_BAND_CELLS = 50_000_000


@functools.lru_cache(maxsize=256)
def _direct(demand: DemandDistribution, r_units: int, tol: float) -> LindleyResult:
    step = demand.step
    inc = demand.lattice().negated().shifted(r_units)
    up = int(inc.offset + inc.probs.size - 1)
    if up <= 0:
        one = LatticeDistribution(step, 0, np.ones(1))
        return LindleyResult(one, 0, 0.0, 0.0, "direct", 1)
    down = max(int(-inc.offset), 1)
    theta = lundberg_exponent(inc)
    N = int(math.ceil(math.log(1.0 / tol) / theta)) + up + 1
    W = up + down + 1
    if (N + 1) * W > MAX_BAND_CELLS:
        raise NoConvergence(
            f"overshoot support needs {N + 1} lattice states; drift too close to zero",
            states=N + 1, lundberg_exponent=theta,
        )
    B = np.zeros((N + 1, W))
    i = np.arange(N + 1)
    for x, p in zip(inc.units, inc.probs):
        if p <= 0:
            continue
        t = np.clip(i + int(x), 0, N)
        np.add.at(B, (i, t - i + down), p)
    pi = kernels.gth_band(B, up, down)
    pi, dropped = _trim_tail(pi, tol)
    floor = tol / pi.size
    small = pi < floor
    if small.any():
        dropped += float(pi[small].sum())
        pi = np.where(small, 0.0, pi)
        pi = pi / pi.sum()
    tv = _tv(_lindley_step(pi, inc.offset, inc.probs), pi)
    bound = math.exp(-theta * (N + 1)) + dropped
    return LindleyResult(LatticeDistribution(step, 0, pi), 0, bound, tv, "direct", N + 1)


def stationary_overshoot_result(w: WalkSpec, tol: float = DEFAULT_TOL, max_iter: int = 5_000_000,
                                method: str = "direct") -> LindleyResult:
    w.require_negative_drift()
    if method == "direct":
        return _direct(w.demand, w.r_units, float(tol))
    if method == "iterate":
        return _fixed_point(w.demand, w.r_units, float(tol), int(max_iter))
    raise ValueError(f"unknown method {method!r}")


def stationary_overshoot(w: WalkSpec, tol: float = DEFAULT_TOL) -> LatticeDistribution:
    """Law of ``I^r = sup_{j>=0} (j r - D_1 - ... - D_j)`` for ``r < E[D]``."""
    return stationary_overshoot_result(w, tol).dist


def prefix_max_dist(w: WalkSpec, k: int, tol: float = 0.0) -> LatticeDistribution:
    """Exact law of ``Z_k = max(W_0, ..., W_{k-1})`` (no truncation unless ``tol > 0``)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    inc = w.increment()
    p = np.ones(1)
    for _ in range(k - 1):
        p = _lindley_step(p, inc.offset, inc.probs)
        if tol > 0:
            p, _ = _trim_tail(p, tol)
    return LatticeDistribution(w.step, 0, p)


@dataclass(frozen=True)
class MeanSequence:
    M: np.ndarray  # M[k-1] = E[Z_k], k = 1..k_max
    M_inf: float | None
    positive_part_means: np.ndarray  # E[max(0, W_k)], k = 1..k_max-1
    spitzer_residual: float

    def __getitem__(self, k: int) -> float:
        return float(self.M[k - 1])


def mean_sequence(w: WalkSpec, k_max: int, tol: float = DEFAULT_TOL, with_limit: bool = True) -> MeanSequence:
    """``M_k = E[Z_k]`` for k = 1..k_max, plus ``M_inf`` when the drift is negative.

    Cross-checks the increments against ``M_i - M_j = sum_{k=j}^{i-1} E[W_k^+] / k``
    and raises if the two routes disagree beyond 1e-9.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    inc = w.increment()
    p = np.ones(1)
    M = np.empty(k_max)
    M[0] = 0.0
    for k in range(2, k_max + 1):
        p = _lindley_step(p, inc.offset, inc.probs)
        M[k - 1] = float(np.dot(np.arange(p.size) * w.step, p))

    pos = np.empty(max(k_max - 1, 0))
    Wk = inc
    for k in range(1, k_max):
        pos[k - 1] = Wk.expect(lambda v: np.maximum(v, 0.0))
        if k < k_max - 1:
            Wk = Wk.convolve(inc)
    spitzer = np.concatenate(([0.0], np.cumsum(pos / np.arange(1, k_max))))
    residual = float(np.max(np.abs((M - M[0]) - spitzer))) if k_max > 1 else 0.0
    if residual > 1e-9 * max(1.0, float(M[-1])):
        raise ArithmeticError(f"Spitzer increment identity violated by {residual}")

    M_inf = None
    if with_limit:
        w.require_negative_drift()
        M_inf = stationary_overshoot(w, tol).mean()
    return MeanSequence(M, M_inf, pos, residual)


def _dyadic_bits(probs, max_bits: int = 8) -> int | None:
    """Smallest b such that every cumulative probability is a multiple of 2**-b."""
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    for b in range(1, max_bits + 1):
        scaled = cdf * 2.0**b
        if np.all(scaled == np.round(scaled)) and scaled[-1] == 2.0**b:
            return b
    return None


def _byte_tables(inc_units: np.ndarray, cdf_int: np.ndarray, bits: int):
    per_byte = 8 // bits
    mask = (1 << bits) - 1
    u = np.arange(1 << bits)
    inc_u = inc_units[np.searchsorted(cdf_int, u, side="right")]
    tot = np.zeros(256, dtype=np.int64)
    pm = np.zeros(256, dtype=np.int64)
    for v in range(256):
        w, best = 0, None
        for j in range(per_byte):
            w += int(inc_u[(v >> (j * bits)) & mask])
            best = w if best is None else max(best, w)
        tot[v], pm[v] = w, best
    return tot, pm, inc_u.astype(np.int64), per_byte


def walk_sup_mc(w: WalkSpec, steps: int, paths: int, seed: int = 0) -> tuple[float, float, np.ndarray]:
    """Monte Carlo ``max_{0<=j<=steps} W_j``; returns ``(mean, standard error, samples)``.

    Laws whose probabilities are multiples of 1/256 are sampled exactly several
    draws per random byte; others use one 53-bit uniform per draw.
    """
    d = w.demand
    seeds = np.random.SeedSequence(seed).generate_state(paths, dtype=np.uint64)
    inc_units = w.r_units - np.asarray(d.units, dtype=np.int64)
    bits = _dyadic_bits(d.probs)
    if bits is not None:
        cdf_int = np.round(np.cumsum(d.probs) * 2.0**bits).astype(np.int64)[:-1]
        tot, pm, inc_u, per_byte = _byte_tables(inc_units, cdf_int, bits)
        sups = kernels.walk_sup_bytes(tot, pm, inc_u, bits, per_byte, steps, seeds)
    else:
        cdf = np.cumsum(np.asarray(d.probs))
        thresholds = np.floor(cdf[:-1] * 2.0**53).astype(np.uint64)
        sups = kernels.walk_sup(np.asarray(d.units, dtype=np.int64), thresholds, w.r_units, steps, seeds)
    vals = sups * w.step
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(paths)), vals

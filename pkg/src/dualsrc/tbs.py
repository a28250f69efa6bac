"""Tailored Base-Surge policies: exact long-run cost and the best (r, S) pair.

A TBS policy orders ``r`` from the regular source every period and raises the
expedited inventory position to ``S`` with the express source.  Its long-run
average cost is

    c (E[D] - r) + E[G(I^r + S - D'_1 - ... - D'_{L0+1})]

where ``I^r`` is the stationary overshoot of the walk with increments
``r - D``.  The cost does not depend on the regular lead time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cost import Instance, expected_G, lead_demand
from .demand import LatticeDistribution, lattice_units
from .lindley import DEFAULT_TOL, WalkSpec, stationary_overshoot


@dataclass(frozen=True)
class TbsPolicy:
    r: float
    S: float
    cost: float = math.nan


@dataclass
class TbsSearch:
    policy: TbsPolicy
    step: float
    profile: dict[float, float] = field(default_factory=dict)
    tol: float = DEFAULT_TOL

    def profile_rows(self) -> list[list[float]]:
        return [[r, self.profile[r]] for r in sorted(self.profile)]


def overshoot_minus_lead_demand(inst: Instance, r: float, tol: float = DEFAULT_TOL) -> LatticeDistribution:
    """Law of ``I^r - sum_{i<=L0+1} D'_i`` on the walk lattice of r."""
    w = WalkSpec(inst.demand, r)
    over = stationary_overshoot(w, tol)
    return over.convolve(lead_demand(inst, w.demand).negated())


def tbs_cost(inst: Instance, r: float, S: float, tol: float = DEFAULT_TOL) -> float:
    """Exact long-run average cost of the TBS policy (r, S), including ``c_R E[D]``."""
    X = overshoot_minus_lead_demand(inst, r, tol)
    return inst.offset + inst.c * (inst.mean_demand - r) + expected_G(X, S, inst)


def best_S(inst: Instance, r: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Newsvendor order-up-to level for fixed r; returns ``(S*, F(r))``.

    ``S*`` is the ``b / (b + h)`` quantile of ``sum D' - I^r``.
    """
    X = overshoot_minus_lead_demand(inst, r, tol)
    S = X.negated().quantile(inst.b / (inst.b + inst.h))
    return S, inst.offset + inst.c * (inst.mean_demand - r) + expected_G(X, S, inst)


def r_grid(inst: Instance, step: float | None = None) -> np.ndarray:
    """Lattice points ``0, step, 2 step, ...`` strictly below E[D]."""
    step = inst.demand.step if step is None else step
    mean = inst.mean_demand
    n = int(math.floor(mean / step + 1e-9))
    if n * step >= mean - 1e-12 * max(1.0, mean):
        n -= 1
    return np.arange(n + 1) * step


def tbs_profile(inst: Instance, step: float | None = None, tol: float = DEFAULT_TOL) -> list[tuple[float, float, float]]:
    """Exhaustive ``(r, S*(r), F(r))`` over the r grid."""
    return [(float(r), *best_S(inst, float(r), tol)) for r in r_grid(inst, step)]


def _argmin_convex(f, n: int) -> int:
    """Ternary search for a minimizer of a convex sequence f(0..n-1), then a
    +-2 neighbourhood sweep.  Ties resolve to the smallest index."""
    lo, hi = 0, n - 1
    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    cand = range(max(0, lo - 2), min(n - 1, hi + 2) + 1)
    return min(cand, key=lambda i: (f(i), i))


def best_tbs(inst: Instance, grid_refine: int = 0, step: float | None = None,
             tol: float = DEFAULT_TOL) -> TbsSearch:
    """Best TBS policy over the r lattice, exploiting convexity of F in r.

    With ``grid_refine = k`` the lattice step is halved k times, each time
    searching only the bracket ``[r* - old step, r* + old step]``; convexity
    guarantees the refined optimum lies there.
    """
    step = inst.demand.step if step is None else step
    cache: dict[float, tuple[float, float]] = {}

    def evaluate(r: float) -> float:
        key = float(r)
        if key not in cache:
            cache[key] = best_S(inst, key, tol)
        return cache[key][1]

    grid = r_grid(inst, step)
    i = _argmin_convex(lambda k: evaluate(grid[k]), grid.size)
    r_star = float(grid[i])
    for _ in range(grid_refine):
        old = step
        step = step / 2
        full = r_grid(inst, step)
        lo = lattice_units(max(r_star - old, 0.0), step)
        sub = full[lo : lattice_units(r_star + old, step) + 1]
        j = _argmin_convex(lambda k: evaluate(sub[k]), sub.size)
        r_star = float(sub[j])
    S_star, cost = cache[r_star]
    profile = {r: v[1] for r, v in cache.items()}
    return TbsSearch(TbsPolicy(r_star, S_star, cost), step, profile, tol)

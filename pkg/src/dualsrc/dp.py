"""Dynamic programming for the dual-sourcing MDP and its single-source relaxation.

Two solvers live here:

* :func:`solve_opt_exact` runs relative value iteration on the full
  (regular pipeline, expedited position) state space, truncated to a finite
  window, and returns the optimal long-run average cost.
* :func:`bellman_1d` and :func:`lower_bound` evaluate the discounted
  single-source value functions ``V_alpha^n(r, x)`` and the lower bound on the
  optimal cost built from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cost import Instance, lead_demand
from .demand import DemandDistribution, lattice_units, refinement_factor
from .errors import GridTooNarrow, NoConvergence, OffLattice, TruncationTooTight

DEFAULT_RVI_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 200_000
CAP_HIT_LIMIT = 1e-3
CLAMP_FLAG_LIMIT = 1e-4
DEFAULT_ALPHAS = (0.5, 0.8, 0.9, 0.95, 0.99)


# ---------------------------------------------------------------------------
# exact average-cost MDP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationSpec:
    """Action caps and position window, all in units of the demand lattice step."""

    cap_R: int
    cap_E: int
    pos_min: int
    pos_max: int

    @classmethod
    def default(cls, inst: Instance) -> "TruncationSpec":
        dmax = inst.demand.max_units
        w = (inst.L + 2 + inst.L0 + 1) * dmax
        return cls(dmax, dmax, -w, w)

    @property
    def width(self) -> int:
        return self.pos_max - self.pos_min + 1

    def to_json(self) -> dict:
        return {"cap_R": self.cap_R, "cap_E": self.cap_E, "pos_min": self.pos_min, "pos_max": self.pos_max}

    @classmethod
    def from_json(cls, obj: dict, inst: Instance | None = None) -> "TruncationSpec":
        base = cls.default(inst).to_json() if inst is not None else {}
        base.update({k: int(v) for k, v in obj.items() if k in ("cap_R", "cap_E", "pos_min", "pos_max")})
        return cls(**base)


def pipeline_dim(inst: Instance) -> int:
    return inst.L - inst.L0 - 1


def state_count(inst: Instance, caps: TruncationSpec | None = None) -> int:
    caps = caps or TruncationSpec.default(inst)
    return (caps.cap_R + 1) ** pipeline_dim(inst) * caps.width


@dataclass
class ExactSolution:
    opt_cost: float
    gain_bounds: tuple[float, float]
    sweeps: int
    clamped_mass: float
    cap_hit_fraction: float
    clamp_flagged: bool
    caps: TruncationSpec
    step: float
    m: int
    qR: np.ndarray = field(repr=False)
    qE: np.ndarray = field(repr=False)
    stationary: np.ndarray = field(repr=False)
    span_history: list[float] = field(default_factory=list, repr=False)
    cap_R_slack: float | None = None  # gain drop when cap_R is raised by one, if that was checked

    def policy_rows(self):
        """``(R_1..R_m, position, qR, qE)`` in lattice values, flat-index order."""
        base = self.caps.cap_R + 1
        NX = self.caps.width
        for idx in range(self.qR.size):
            p, i = divmod(idx, NX)
            digits = []
            for _ in range(self.m):
                p, d = divmod(p, base)
                digits.append(d * self.step)
            yield [*digits[::-1], (self.caps.pos_min + i) * self.step, int(self.qR[idx]) * self.step,
                   int(self.qE[idx]) * self.step]

    def policy_header(self) -> list[str]:
        return [f"R{j}" for j in range(1, self.m + 1)] + ["position", "qR", "qE"]


def _post_decision_cost(inst: Instance, caps: TruncationSpec) -> np.ndarray:
    """``E[G(y - D_1 - ... - D_{L0+1})]`` for every window position y."""
    lead = lead_demand(inst)
    y = np.arange(caps.pos_min, caps.pos_max + 1)
    diff = (y[:, None] - lead.units[None, :]) * inst.demand.step
    G = np.where(diff > 0, inst.h * diff, -inst.b * diff)
    return G @ lead.probs


def _transition_parts(qR, qE, m, base, NX):
    """Successor pipeline index and pre-demand position index for each state."""
    P = qR.size // NX
    top = P // base
    p = np.repeat(np.arange(P), NX)
    i = np.tile(np.arange(NX), P)
    R1 = p // top
    nxt_p = (p % top) * base + qR
    z = i + qE + R1
    return nxt_p, z


def _stationary(nxt_p, z, d_units, probs, NX, start, tol=1e-13, max_iter=200_000):
    """Stationary law of the greedy chain from ``start`` (lazy power iteration).

    Also returns the per-period probability of a clamped transition.
    """
    n = nxt_p.size
    targets = []
    clamp = np.zeros(n)
    for d, pd in zip(d_units, probs):
        k = z - d
        clamp += pd * ((k < 0) | (k > NX - 1))
        targets.append(nxt_p * NX + np.clip(k, 0, NX - 1))
    pi = np.zeros(n)
    pi[start] = 1.0
    for _ in range(max_iter):
        step = np.zeros(n)
        for t, pd in zip(targets, probs):
            step += np.bincount(t, weights=pi * pd, minlength=n)
        new = 0.5 * (pi + step)
        if 0.5 * np.abs(new - pi).sum() < tol:
            pi = new
            break
        pi = new
    pi /= pi.sum()
    return pi, float(pi @ clamp)


def solve_opt_exact(inst: Instance, caps: TruncationSpec | None = None, tol: float = DEFAULT_RVI_TOL,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS, tau: float = 0.5,
                    check_caps: bool = True) -> ExactSolution:
    """Optimal long-run average cost by relative value iteration.

    States are ``(R, x)`` with ``R`` the regular orders that arrive after the
    express horizon and ``x`` the expedited inventory position.  Decisions are
    made in post-decision form: choosing express ``e`` and regular ``q`` costs
    ``c e + E[G(x + e - D_1 - ... - D_{L0+1})]`` and moves to
    ``((R_2, ..., R_m, q), x + e + R_1 - D)``.  Positions leaving the window are
    clamped and the stationary clamped mass is reported.

    The iteration uses the aperiodicity transform ``h <- h + tau (T h - h)``
    and stops when the Odoni bounds ``min/max(T h - h)`` agree to ``tol``.
    """
    caps = caps or TruncationSpec.default(inst)
    m = pipeline_dim(inst)
    NX = caps.width
    base = caps.cap_R + 1
    P = base ** m
    d = inst.demand
    probs = np.asarray(d.probs, dtype=np.float64)
    d_units = np.asarray(d.units, dtype=np.int64)
    Gbar = _post_decision_cost(inst, caps)
    c_step = inst.c * d.step
    anchor = -caps.pos_min if caps.pos_min <= 0 <= caps.pos_max else 0

    h = np.zeros(P * NX)
    lo = hi = math.nan
    spans: list[float] = []
    for sweep in range(1, max_sweeps + 1):
        TV, QR, QE = kernels.bellman_sweep(h, probs, d_units, Gbar, c_step, m, caps.cap_R, caps.cap_E, NX)
        diff = TV - h
        lo, hi = float(diff.min()), float(diff.max())
        spans.append(hi - lo)
        if hi - lo < tol:
            break
        h = h + tau * diff
        h -= h[anchor]
    else:
        raise NoConvergence(f"relative value iteration did not converge in {max_sweeps} sweeps",
                            span=hi - lo, lower=lo, upper=hi)
    gain = 0.5 * (lo + hi)

    nxt_p, z = _transition_parts(QR, QE, m, base, NX)
    pi, clamped = _stationary(nxt_p, z, d_units, probs, NX, anchor)

    # a cap only matters if the decision sits on it and one more unit would have been at least as good
    y = np.tile(np.arange(NX), P) + QE
    on_cap_E = QE == caps.cap_E
    probe = on_cap_E & (y + 1 <= NX - 1)
    binding_E = on_cap_E & ~probe
    if probe.any():
        idx = np.nonzero(probe)[0]
        p_idx = idx // NX
        top = P // base
        # value of e + 1 through the same decomposition the kernel uses
        vals_here = TV[idx]
        y1 = y[idx] + 1
        R1 = p_idx // top
        tail = p_idx % top
        Vm = h.reshape(P, NX)
        k = y1 + R1
        best_q = np.full(idx.size, np.inf)
        for q in range(base):
            ev = np.zeros(idx.size)
            for pd, du in zip(probs, d_units):
                ev += pd * Vm[tail * base + q, np.clip(k - du, 0, NX - 1)]
            best_q = np.minimum(best_q, ev)
        vals_more = c_step * (QE[idx] + 1) + Gbar[y1] + best_q
        binding_E[idx[vals_more <= vals_here + 1e-12 * max(1.0, abs(vals_here).max())]] = True
    hits_E = float(pi[binding_E].sum())
    hits_R = float(pi[QR == caps.cap_R].sum())
    # the regular cap cannot be probed in place (the pipeline has no slot for cap_R + 1),
    # so a frequent hit is settled by re-solving with a larger cap and comparing gains
    cap_R_slack = None
    if check_caps and hits_R > CAP_HIT_LIMIT:
        wider = TruncationSpec(caps.cap_R + 1, caps.cap_E, caps.pos_min, caps.pos_max)
        alt = solve_opt_exact(inst, wider, tol, max_sweeps, tau, check_caps=False)
        cap_R_slack = (gain + inst.offset) - alt.opt_cost
        if cap_R_slack <= 10 * tol:
            hits_R = 0.0
    cap_hits = hits_E + hits_R

    sol = ExactSolution(
        opt_cost=gain + inst.offset,
        gain_bounds=(lo + inst.offset, hi + inst.offset),
        sweeps=sweep,
        clamped_mass=clamped,
        cap_hit_fraction=cap_hits,
        clamp_flagged=clamped > CLAMP_FLAG_LIMIT,
        caps=caps,
        step=d.step,
        m=m,
        qR=QR,
        qE=QE,
        stationary=pi,
        span_history=spans,
        cap_R_slack=cap_R_slack,
    )
    if check_caps and cap_hits > CAP_HIT_LIMIT:
        raise TruncationTooTight(
            f"an order cap binds for {cap_hits:.3%} of the stationary mass",
            cap_hit_fraction=cap_hits,
            caps=caps.to_json(),
        )
    return sol


# ---------------------------------------------------------------------------
# single-source discounted recursion and the lower bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueFunction1D:
    r: float
    alpha: float
    horizon: int
    x_min: float
    x_max: float
    step: float
    values: np.ndarray = field(repr=False)
    slope_above: float = 0.0

    @property
    def grid(self) -> np.ndarray:
        return self.x_min + np.arange(self.values.size) * self.step

    def min(self) -> float:
        return float(self.values.min())

    def __call__(self, x):
        """Evaluate with constant extension below the grid and linear extension above."""
        x = np.asarray(x, dtype=float)
        k = np.clip(np.round((x - self.x_min) / self.step).astype(np.int64), 0, self.values.size - 1)
        out = self.values[k]
        above = x > self.x_max
        return np.where(above, self.values[-1] + self.slope_above * (x - self.x_max), out)


@dataclass(frozen=True)
class Grid1D:
    """Lattice window ``[lo, hi]`` in units of ``step``."""

    lo: int
    hi: int
    step: float


def _walk_demand(inst: Instance, r: float) -> tuple[DemandDistribution, int]:
    m = refinement_factor(inst.demand.step, r)
    d = inst.demand.refine(m)
    return d, lattice_units(r, d.step)


def default_grid_1d(inst: Instance, r: float, n: int) -> Grid1D:
    """Window around the newsvendor point wide enough for ``n`` stages."""
    d, ru = _walk_demand(inst, r)
    lead = lead_demand(inst, d)
    centre = lattice_units(lead.quantile(inst.b / (inst.b + inst.h)), d.step) - (inst.L0 + 1) * ru
    half = (n + inst.L0 + 2) * (d.max_units + ru) + d.max_units
    return Grid1D(centre - half, centre + half + n * ru, d.step)


def bellman_1d(inst: Instance, r: float, alpha: float, n: int, grid: Grid1D | None = None) -> ValueFunction1D:
    """``V_alpha^n(r, .)`` for the single-source relaxation by backward recursion.

    ``V^0 = 0`` and ``V^k(x) = min_{y >= x} J^k(y)`` with
    ``J^k(y) = E[G(y + (L0+1) r - D_1 - ... - D_{L0+1})] + alpha E[V^{k-1}(y + r - D)]``.
    Off-grid values of ``V^{k-1}`` are constant below the window and grow with
    slope ``max(b, h) / (1 - alpha)`` above it.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 0:
        raise ValueError("n must be nonnegative")
    d, ru = _walk_demand(inst, r)
    grid = grid or default_grid_1d(inst, r, n)
    if abs(grid.step - d.step) > 1e-12 * d.step:
        raise ValueError("grid step must match the demand lattice refined for r")
    step = d.step
    xs = np.arange(grid.lo, grid.hi + 1)
    N = xs.size
    slope = max(inst.b, inst.h) / (1.0 - alpha)
    V = np.zeros(N)
    if n == 0:
        return ValueFunction1D(r, alpha, 0, grid.lo * step, grid.hi * step, step, V, slope)

    lead = lead_demand(inst, d)
    diff = (xs[:, None] + (inst.L0 + 1) * ru - lead.units[None, :]) * step
    Gbar = np.where(diff > 0, inst.h * diff, -inst.b * diff) @ lead.probs
    probs = np.asarray(d.probs)
    shifts = ru - np.asarray(d.units, dtype=np.int64)
    for k in range(1, n + 1):
        EV = np.zeros(N)
        for pd, s in zip(probs, shifts):
            j = np.arange(N) + s
            val = V[np.clip(j, 0, N - 1)]
            over = j > N - 1
            val = np.where(over, V[-1] + slope * (j - (N - 1)) * step, val)
            EV += pd * val
        J = Gbar + alpha * EV
        jmin = int(np.argmin(J))
        if jmin == 0 or jmin == N - 1:
            raise GridTooNarrow(
                f"stage {k} minimizer sits on the grid edge at x = {xs[jmin] * step}",
                stage=k, x=float(xs[jmin] * step), x_min=float(xs[0] * step), x_max=float(xs[-1] * step),
            )
        V = np.minimum.accumulate(J[::-1])[::-1]
    return ValueFunction1D(r, alpha, n, grid.lo * step, grid.hi * step, step, V, slope)


def bellman_1d_auto(inst: Instance, r: float, alpha: float, n: int, max_doublings: int = 8) -> ValueFunction1D:
    """:func:`bellman_1d` on the default window, doubling it on :class:`GridTooNarrow`."""
    grid = default_grid_1d(inst, r, n)
    for _ in range(max_doublings + 1):
        try:
            return bellman_1d(inst, r, alpha, n, grid)
        except GridTooNarrow:
            half = grid.hi - grid.lo
            grid = Grid1D(grid.lo - half // 2 - 1, grid.hi + half // 2 + 1, grid.step)
    return bellman_1d(inst, r, alpha, n, grid)


def alpha_schedule(L: int) -> float:
    """``1 - 5 log(L) / L`` clamped to ``[0.5, 1)``."""
    return min(max(1.0 - 5.0 * math.log(L) / L, 0.5), 1.0 - 1e-9)


def default_r_grid(inst: Instance, refine: int = 4) -> np.ndarray:
    """``{0, delta/refine, ...}`` up to and including E[D]."""
    step = inst.demand.step / refine
    mean = inst.mean_demand
    n = int(math.floor(mean / step + 1e-9))
    grid = list(np.arange(n + 1) * step)
    if lattice_units(mean, step) is None:
        try:
            refinement_factor(inst.demand.step, mean)
            grid.append(mean)
        except OffLattice:
            pass
    return np.asarray(grid)


@dataclass
class LowerBound:
    value: float
    alpha: float
    r: float
    table: list[tuple[float, float, float]]  # (alpha, r, objective)

    def rows(self):
        return [list(t) for t in self.table]


def lower_bound(inst: Instance, L: int | None = None, alpha_grid=None, r_grid=None) -> LowerBound:
    """``max_alpha min_r { c (E[D] - r) + (1 - alpha) min_x V_alpha^{L-L0}(r, x) } + c_R E[D]``.

    Valid for every alpha and every r bracketing the optimal policy's mean
    regular order, which lies in ``[0, E[D]]``.
    """
    L = inst.L if L is None else int(L)
    n = L - inst.L0
    alphas = sorted(set(DEFAULT_ALPHAS if alpha_grid is None else alpha_grid) | {alpha_schedule(L)})
    rs = default_r_grid(inst) if r_grid is None else np.asarray(r_grid, dtype=float)
    if len(alphas) == 0 or rs.size == 0:
        raise ValueError("alpha and r grids must be nonempty")
    mean = inst.mean_demand
    table = []
    best = (-math.inf, math.nan, math.nan)
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha {a} outside (0, 1)")
        inner = (math.inf, math.nan)
        for r in rs:
            r = float(r)
            vf = bellman_1d_auto(inst, r, a, n)
            obj = inst.c * (mean - r) + (1.0 - a) * vf.min()
            table.append((a, r, obj + inst.offset))
            if obj < inner[0]:
                inner = (obj, r)
        if inner[0] > best[0]:
            best = (inner[0], a, inner[1])
    return LowerBound(best[0] + inst.offset, best[1], best[2], table)

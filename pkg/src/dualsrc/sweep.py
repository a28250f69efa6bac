"""Lead-time sweeps: best TBS cost against exact OPT(L) and the lower bound."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .bounds import certificate
from .cost import Instance
from .dp import TruncationSpec, lower_bound, solve_opt_exact, state_count
from .errors import DualSourcingError, LeadTimeOrder
from .sim import _threads
from .tbs import best_tbs

DEFAULT_BUDGET = 50_000_000

COLUMNS = (
    "L", "tbs_cost", "opt_exact", "lower_bound", "ratio_vs_opt", "ratio_vs_lb",
    "gap_certificate_additive", "states", "clamped_mass", "note",
)


@dataclass
class SweepRow:
    L: int
    tbs_cost: float
    opt_exact: float | None
    lower_bound: float | None
    ratio_vs_opt: float | None
    ratio_vs_lb: float | None
    gap_certificate_additive: float | None
    states: int
    clamped_mass: float | None
    note: str = ""

    def as_list(self) -> list:
        return [getattr(self, c) for c in COLUMNS]

    def to_json(self) -> dict:
        return {c: getattr(self, c) for c in COLUMNS}


@dataclass
class SweepResult:
    r_star: float
    S_star: float
    rows: list[SweepRow] = field(default_factory=list)

    def ratio_trend_ok(self, slack: float = 0.02) -> bool:
        """Soft check: ratio_vs_opt never rises by more than ``slack`` from one row to the next."""
        vals = [r.ratio_vs_opt for r in self.rows if r.ratio_vs_opt is not None]
        return all(b <= a + slack for a, b in zip(vals, vals[1:]))

    def to_json(self) -> dict:
        return {
            "r_star": self.r_star,
            "S_star": self.S_star,
            "ratio_trend_ok": self.ratio_trend_ok(),
            "rows": [r.to_json() for r in self.rows],
        }


def parse_L_range(text: str) -> list[int]:
    """``"2:12"`` (inclusive) or ``"2,3,5"``."""
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def sweep_leadtime(inst: Instance, L_list: Sequence[int], budget: float = DEFAULT_BUDGET,
                   on_row: Callable[[SweepRow], None] | None = None,
                   alpha_grid=None, r_grid=None) -> SweepResult:
    Ls = list(L_list)
    if Ls != sorted(Ls):
        raise ValueError("L values must be ascending")
    for L in Ls:
        if not L > inst.L0 + 1:
            raise LeadTimeOrder(f"L = {L} must exceed L0 + 1 = {inst.L0 + 1}", L=L, L0=inst.L0)

    # the TBS optimum does not involve L
    tbs = best_tbs(inst).policy
    cert = certificate(inst)

    def row(L: int) -> SweepRow:
        sub = inst.with_lead_time(L)
        notes = []
        caps = TruncationSpec.default(sub)
        n_states = state_count(sub, caps)
        opt = clamped = None
        if n_states <= budget:
            try:
                sol = solve_opt_exact(sub, caps)
                opt, clamped = sol.opt_cost, sol.clamped_mass
                if sol.clamp_flagged:
                    notes.append("clamped-mass-flag")
            except DualSourcingError as e:
                notes.append(e.code)
        else:
            notes.append("over-budget")
        lb = None
        try:
            lb = lower_bound(sub, L, alpha_grid, r_grid).value
        except DualSourcingError as e:
            notes.append(e.code)
        gap = cert.additive_gap(L) if cert.gap_applicable(L) else None
        return SweepRow(
            L=L,
            tbs_cost=tbs.cost,
            opt_exact=opt,
            lower_bound=lb,
            ratio_vs_opt=tbs.cost / opt if opt else None,
            ratio_vs_lb=tbs.cost / lb if lb and lb > 0 else (math.inf if lb is not None else None),
            gap_certificate_additive=gap,
            states=n_states,
            clamped_mass=clamped,
            note=";".join(notes),
        )

    result = SweepResult(tbs.r, tbs.S)
    n = _threads()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            rows = ex.map(row, Ls)
            for r in rows:
                result.rows.append(r)
                if on_row:
                    on_row(r)
    else:
        for L in Ls:
            r = row(L)
            result.rows.append(r)
            if on_row:
                on_row(r)
    return result

"""Monte Carlo simulation of the periodic-review dual-sourcing system.

Each period: both orders are placed, the regular order from ``L`` periods ago
and the express order from ``L0`` periods ago arrive, demand is realized, and
the period is charged ``c_R q^R + c_E q^E + G(net inventory)``.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import kernels
from .cost import Instance
from .demand import lattice_units, refinement_factor
from .errors import InvalidInstance, StateEscape

Z99 = NormalDist().inv_cdf(0.995)
INIT_MODES = ("zero_state", "paper_geometric")


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    warmup: int | None = None  # defaults to 10 L
    replications: int = 20
    seed: int = 0
    init: str = "zero_state"

    def resolved_warmup(self, inst: Instance) -> int:
        return 10 * inst.L if self.warmup is None else self.warmup

    def validate(self, inst: Instance) -> None:
        w = self.resolved_warmup(inst)
        if not self.horizon > w >= 0:
            raise InvalidInstance(f"need horizon > warmup >= 0, got horizon={self.horizon}, warmup={w}")
        if self.replications < 1:
            raise InvalidInstance("replications must be >= 1")
        if self.init not in INIT_MODES:
            raise InvalidInstance(f"init must be one of {INIT_MODES}")


@dataclass(frozen=True)
class TablePolicy:
    """Order quantities indexed by (truncated regular pipeline, expedited position), in lattice units."""

    qR: np.ndarray
    qE: np.ndarray
    m: int
    cap_R: int
    pos_min: int
    pos_max: int
    step: float

    @classmethod
    def from_solution(cls, sol) -> "TablePolicy":
        c = sol.caps
        return cls(sol.qR.astype(np.int64), sol.qE.astype(np.int64), sol.m, c.cap_R, c.pos_min, c.pos_max, sol.step)

    @classmethod
    def from_csv(cls, path, step: float) -> "TablePolicy":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        m = len(header) - 3
        arr = np.array([[float(v) for v in r] for r in body])
        units = np.rint(arr / step).astype(np.int64)
        pos = units[:, m]
        cap_R = int(units[:, :m].max()) if m else 0
        return cls(units[:, m + 1].copy(), units[:, m + 2].copy(), m, cap_R, int(pos.min()), int(pos.max()), step)


@dataclass(frozen=True)
class PolicySpec:
    kind: str  # tbs | constant_order | express_base_stock | table
    r: float = 0.0
    S: float = 0.0
    table: TablePolicy | None = field(default=None, repr=False)

    @classmethod
    def tbs(cls, r: float, S: float) -> "PolicySpec":
        return cls("tbs", r, S)

    @classmethod
    def constant_order(cls, r: float) -> "PolicySpec":
        return cls("constant_order", r, 0.0)

    @classmethod
    def express_base_stock(cls, S: float) -> "PolicySpec":
        return cls("express_base_stock", 0.0, S)

    @classmethod
    def from_json(cls, obj: dict, inst: Instance, base_dir: Path | None = None) -> "PolicySpec":
        kind = obj.get("kind")
        if kind == "tbs":
            return cls.tbs(float(obj["r"]), float(obj["S"]))
        if kind == "constant_order":
            return cls.constant_order(float(obj["r"]))
        if kind == "express_base_stock":
            return cls.express_base_stock(float(obj["S"]))
        if kind == "table":
            path = Path(obj["file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return cls("table", table=TablePolicy.from_csv(path, inst.demand.step))
        raise InvalidInstance(f"unknown policy kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "tbs":
            return {"kind": "tbs", "r": self.r, "S": self.S}
        if self.kind == "constant_order":
            return {"kind": "constant_order", "r": self.r}
        if self.kind == "express_base_stock":
            return {"kind": "express_base_stock", "S": self.S}
        return {"kind": "table"}


@dataclass
class SimResult:
    mean: float
    half_width: float
    per_rep: np.ndarray

    @property
    def ci99(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def contains(self, x: float) -> bool:
        lo, hi = self.ci99
        return lo <= x <= hi


def _lattice_for(inst: Instance, policy: PolicySpec):
    if policy.kind == "table":
        if abs(policy.table.step - inst.demand.step) > 1e-12 * inst.demand.step:
            raise InvalidInstance("table policy lattice does not match the instance")
        return inst.demand
    return inst.demand.refine(refinement_factor(inst.demand.step, policy.r, policy.S))


def run_path(inst: Instance, policy: PolicySpec, demand_units: np.ndarray, I0: int = 0,
             warmup: int = 0, step: float | None = None) -> tuple[float, np.ndarray]:
    """Run one demand path (in lattice units); returns ``(mean cost, per-period costs)``.

    This is also the hook for scripted demand sequences.
    """
    d = _lattice_for(inst, policy)
    step = d.step if step is None else step
    demand_units = np.ascontiguousarray(demand_units, dtype=np.int64)
    costs = np.empty(demand_units.size)
    if policy.kind == "table":
        t = policy.table
        mean, esc, pos = kernels.table_path(
            demand_units, t.qR, t.qE, t.m, t.cap_R, t.pos_min, t.pos_max, inst.L, inst.L0,
            inst.h, inst.b, inst.c_R, inst.c_E, step, int(I0), warmup, costs,
        )
        if esc >= 0:
            raise StateEscape(
                f"table policy left its position window at period {esc}",
                period=int(esc), position=float(pos * step), pos_min=t.pos_min * step, pos_max=t.pos_max * step,
            )
        return mean, costs
    r = lattice_units(policy.r, step)
    S = lattice_units(policy.S, step)
    use_express = policy.kind in ("tbs", "express_base_stock")
    mean = kernels.tbs_path(
        demand_units, r, S, inst.L, inst.L0, inst.h, inst.b, inst.c_R, inst.c_E, step,
        int(I0), warmup, use_express, costs,
    )
    return mean, costs


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DUALSRC_THREADS", "1")))
    except ValueError:
        return 1


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def simulate(inst: Instance, policy: PolicySpec, cfg: SimConfig) -> SimResult:
    """Average per-period cost over ``[warmup, horizon)``, one value per replication."""
    cfg.validate(inst)
    d = _lattice_for(inst, policy)
    units = np.asarray(d.units, dtype=np.int64)
    cdf = np.cumsum(d.probs)
    cdf[-1] = 1.0
    warmup = cfg.resolved_warmup(inst)

    def one(rep: int) -> float:
        rng = replication_rng(cfg.seed, rep)
        demand = units[np.searchsorted(cdf, rng.random(cfg.horizon), side="right")]
        I0 = 0
        if cfg.init == "paper_geometric":
            k = int(rng.geometric(0.5))
            I0 = -int(units[np.searchsorted(cdf, rng.random(k), side="right")].sum())
        empty = np.empty(0)
        if policy.kind == "table":
            return run_path(inst, policy, demand, I0, warmup, d.step)[0]
        r = lattice_units(policy.r, d.step)
        S = lattice_units(policy.S, d.step)
        return kernels.tbs_path(
            demand, r, S, inst.L, inst.L0, inst.h, inst.b, inst.c_R, inst.c_E, d.step,
            I0, warmup, policy.kind in ("tbs", "express_base_stock"), empty,
        )

    n = _threads()
    if n > 1 and cfg.replications > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            reps = np.array(list(ex.map(one, range(cfg.replications))))
    else:
        reps = np.array([one(i) for i in range(cfg.replications)])
    mean = float(reps.mean())
    hw = Z99 * float(reps.std(ddof=1)) / math.sqrt(reps.size) if reps.size > 1 else math.inf
    return SimResult(mean, hw, reps)

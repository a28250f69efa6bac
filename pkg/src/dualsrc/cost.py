"""Problem instances and the holding/backorder cost."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .demand import DemandDistribution, LatticeDistribution, convolve_n
from .errors import InvalidInstance, LeadTimeOrder


@dataclass(frozen=True)
class Instance:
    """Costs, lead times and demand of a dual-sourcing system.

    ``L`` is the regular lead time, ``L0`` the express one.  Purchase costs
    enter the long-run objective only through the premium ``c = c_E - c_R``
    plus the constant ``c_R * E[D]`` (see :func:`reduce_regular_cost`).
    """

    h: float
    b: float
    c_R: float
    c_E: float
    L: int
    L0: int
    demand: DemandDistribution

    def __post_init__(self):
        for name in ("h", "b", "c_R", "c_E"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise InvalidInstance(f"{name} must be finite, got {v}", field=name)
        if self.h <= 0 or self.b <= 0:
            raise InvalidInstance("holding and backorder costs must be positive")
        if self.c_R < 0:
            raise InvalidInstance("regular unit cost must be nonnegative")
        if not self.c_E - self.c_R > 0:
            raise InvalidInstance(
                f"express premium c_E - c_R = {self.c_E - self.c_R} must be positive",
                field="c_E",
            )
        if int(self.L) != self.L or int(self.L0) != self.L0 or self.L0 < 0 or self.L < 2:
            raise LeadTimeOrder(f"lead times must be integers with L >= 2, L0 >= 0 (got L={self.L}, L0={self.L0})")
        if not self.L > self.L0 + 1:
            raise LeadTimeOrder(f"need L > L0 + 1, got L={self.L}, L0={self.L0}", L=self.L, L0=self.L0)
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "L0", int(self.L0))

    @property
    def c(self) -> float:
        return self.c_E - self.c_R

    @property
    def mean_demand(self) -> float:
        return self.demand.lattice().mean()

    @property
    def offset(self) -> float:
        """Constant long-run purchase cost ``c_R * E[D]``."""
        return self.c_R * self.mean_demand

    def with_lead_time(self, L: int) -> "Instance":
        return replace(self, L=L)

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "b": self.b,
            "c_R": self.c_R,
            "c_E": self.c_E,
            "L": self.L,
            "L0": self.L0,
            "demand": self.demand.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Instance":
        missing = {"h", "b", "c_R", "c_E", "L", "L0", "demand"} - set(obj)
        if missing:
            raise InvalidInstance(f"instance is missing fields {sorted(missing)}")
        L, L0 = obj["L"], obj["L0"]
        if int(L) != L or int(L0) != L0:
            raise LeadTimeOrder(f"lead times must be integers (got L={L}, L0={L0})")
        return cls(
            h=float(obj["h"]),
            b=float(obj["b"]),
            c_R=float(obj["c_R"]),
            c_E=float(obj["c_E"]),
            L=int(L),
            L0=int(L0),
            demand=DemandDistribution.from_json(obj["demand"]),
        )

    def digest(self) -> str:
        from .io import canonical_json

        return hashlib.sha256(canonical_json(self.to_json()).encode()).hexdigest()


def G(y, inst: Instance):
    """End-of-period holding plus backorder cost; works elementwise on arrays."""
    return inst.h * np.maximum(y, 0.0) + inst.b * np.maximum(-np.asarray(y, dtype=float), 0.0)


def expected_G(dist: LatticeDistribution, shift: float, inst: Instance) -> float:
    """``E[G(shift + X)]`` for ``X ~ dist``."""
    return dist.expect(lambda v: G(shift + v, inst))


def lead_demand(inst: Instance, demand: DemandDistribution | None = None) -> LatticeDistribution:
    """Law of the demand over the express lead time plus one period."""
    return convolve_n(demand if demand is not None else inst.demand, inst.L0 + 1)


def newsvendor(dist: LatticeDistribution, inst: Instance) -> tuple[float, float]:
    """Minimize ``E[G(x - X)]`` over x; returns ``(x*, value)``.

    The optimum is the ``b / (b + h)`` quantile of X, which is a lattice point.
    """
    x = dist.quantile(inst.b / (inst.b + inst.h))
    return x, expected_G(dist.negated(), x, inst)


def reduce_regular_cost(inst: Instance) -> tuple[Instance, float]:
    """Return the equivalent instance with ``c_R = 0`` and the additive offset.

    Every unit demanded is bought from one source or the other, so in the
    long-run average ``c_R * E[D]`` is paid regardless of policy.
    """
    if inst.c_R == 0:
        return inst, 0.0
    return replace(inst, c_R=0.0, c_E=inst.c_E - inst.c_R), inst.offset

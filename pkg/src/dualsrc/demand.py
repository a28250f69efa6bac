"""Finite discrete distributions on a uniform lattice.

Two types live here.  :class:`DemandDistribution` is the user-facing demand
law: nonnegative, positive variance, hashable so that expensive downstream
results can be cached on it.  :class:`LatticeDistribution` is the signed
workhorse used for overshoots, random-walk maxima and convolutions; it stores
a dense probability vector starting at an integer offset.

All values are integer multiples of the lattice step, so every expectation is
an exact finite sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NegativeValue, OffLattice, ProbSumMismatch, ZeroVariance

INPUT_PROB_TOL = 1e-9
LATTICE_TOL = 1e-9
QUANTILE_TOL = 1e-12
# exp(-700) is ~1e-304; anything beyond underflows into denormals
EXP_GUARD = 700.0


def lattice_units(x: float, step: float) -> int | None:
    """Return ``x / step`` as an int if ``x`` sits on the lattice, else None."""
    q = x / step
    k = round(q)
    if abs(q - k) <= LATTICE_TOL * max(1.0, abs(q)):
        return int(k)
    return None


def refinement_factor(step: float, *xs: float, max_factor: int = 4096) -> int:
    """Smallest m such that every x is a multiple of ``step / m``."""
    for m in range(1, max_factor + 1):
        if all(lattice_units(x, step / m) is not None for x in xs):
            return m
    raise OffLattice(
        f"values {xs} are not on any refinement of step {step} up to 1/{max_factor}",
        step=step,
    )


@dataclass(frozen=True, eq=False)
class LatticeDistribution:
    """Distribution on ``{(offset + i) * step : i = 0..len(probs)-1}``."""

    step: float
    offset: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        nz = np.flatnonzero(p > 0.0)
        if nz.size == 0:
            raise ProbSumMismatch("distribution has no positive mass")
        lo, hi = int(nz[0]), int(nz[-1])
        p = p[lo : hi + 1].copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "offset", int(self.offset) + lo)

    @classmethod
    def from_atoms(cls, step: float, atoms: Iterable[tuple[float, float]]) -> "LatticeDistribution":
        atoms = list(atoms)
        units = []
        for v, _ in atoms:
            k = lattice_units(v, step)
            if k is None:
                raise OffLattice(f"value {v} is not a multiple of step {step}", value=v)
            units.append(k)
        lo = min(units)
        p = np.zeros(max(units) - lo + 1)
        for k, (_, pr) in zip(units, atoms):
            p[k - lo] += pr
        return cls(step, lo, p)

    @classmethod
    def point_mass(cls, step: float, units: int = 0) -> "LatticeDistribution":
        return cls(step, units, np.ones(1))

    @property
    def units(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.probs.size, dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return self.units * self.step

    @property
    def max_units(self) -> int:
        return self.offset + self.probs.size - 1

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(v), float(p)) for v, p in zip(self.values, self.probs) if p > 0.0]

    def total(self) -> float:
        return math.fsum(self.probs)

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.values - m) ** 2, self.probs))

    def expect(self, f) -> float:
        return float(np.dot(f(self.values), self.probs))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def quantile(self, p: float) -> float:
        """Left-continuous generalized inverse ``inf{x : F(x) >= p}``."""
        if not 0.0 < p <= 1.0:
            raise ValueError(f"quantile level must lie in (0, 1], got {p}")
        idx = int(np.searchsorted(self.cdf(), p - QUANTILE_TOL, side="left"))
        idx = min(idx, self.probs.size - 1)
        return (self.offset + idx) * self.step

    def shifted(self, units: int) -> "LatticeDistribution":
        return LatticeDistribution(self.step, self.offset + units, self.probs)

    def negated(self) -> "LatticeDistribution":
        return LatticeDistribution(self.step, -self.max_units, self.probs[::-1])

    def refined(self, m: int) -> "LatticeDistribution":
        if m == 1:
            return self
        p = np.zeros((self.probs.size - 1) * m + 1)
        p[::m] = self.probs
        return LatticeDistribution(self.step / m, self.offset * m, p)

    def convolve(self, other: "LatticeDistribution") -> "LatticeDistribution":
        _check_same_step(self.step, other.step)
        return LatticeDistribution(
            self.step, self.offset + other.offset, np.convolve(self.probs, other.probs)
        )

    def tv_distance(self, other: "LatticeDistribution") -> float:
        _check_same_step(self.step, other.step)
        lo = min(self.offset, other.offset)
        hi = max(self.max_units, other.max_units)
        a = np.zeros(hi - lo + 1)
        b = np.zeros(hi - lo + 1)
        a[self.offset - lo : self.offset - lo + self.probs.size] = self.probs
        b[other.offset - lo : other.offset - lo + other.probs.size] = other.probs
        return 0.5 * float(np.abs(a - b).sum())


def _check_same_step(a: float, b: float) -> None:
    if not math.isclose(a, b, rel_tol=1e-12):
        raise OffLattice(f"lattice steps differ: {a} vs {b}")


@dataclass(frozen=True)
class DemandDistribution:
    """Nonnegative demand law with positive variance; build with :func:`make_demand`."""

    step: float
    units: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.units, dtype=np.float64) * self.step

    @property
    def max_units(self) -> int:
        return self.units[-1]

    @property
    def max_value(self) -> float:
        return self.units[-1] * self.step

    def atoms(self) -> list[tuple[float, float]]:
        return [(u * self.step, p) for u, p in zip(self.units, self.probs)]

    def lattice(self) -> LatticeDistribution:
        p = np.zeros(self.units[-1] - self.units[0] + 1)
        for u, pr in zip(self.units, self.probs):
            p[u - self.units[0]] = pr
        return LatticeDistribution(self.step, self.units[0], p)

    def refine(self, m: int) -> "DemandDistribution":
        """Same law expressed on the finer lattice ``step / m``."""
        if m == 1:
            return self
        return DemandDistribution(self.step / m, tuple(u * m for u in self.units), self.probs)

    def on_lattice_with(self, *xs: float) -> "DemandDistribution":
        """Refine just enough that every x is a lattice point."""
        return self.refine(refinement_factor(self.step, *xs))

    def to_json(self) -> dict:
        return {"step": self.step, "atoms": [[v, p] for v, p in self.atoms()]}

    @classmethod
    def from_json(cls, obj: dict) -> "DemandDistribution":
        return make_demand(obj["step"], obj["atoms"])


def make_demand(step: float, atoms: Sequence[Sequence[float]]) -> DemandDistribution:
    """Validate, merge, sort and normalize a list of ``(value, prob)`` atoms."""
    step = float(step)
    if not step > 0 or not math.isfinite(step):
        raise OffLattice(f"lattice step must be positive and finite, got {step}")
    if len(atoms) == 0:
        raise ProbSumMismatch("no atoms given")
    merged: dict[int, float] = {}
    for v, p in atoms:
        v, p = float(v), float(p)
        if v < 0:
            raise NegativeValue(f"demand value {v} is negative", value=v)
        if not p > 0:
            raise ProbSumMismatch(f"probability {p} of value {v} is not positive", value=v)
        k = lattice_units(v, step)
        if k is None:
            raise OffLattice(f"value {v} is not a multiple of step {step}", value=v)
        merged[k] = merged.get(k, 0.0) + p
    total = math.fsum(merged.values())
    if abs(total - 1.0) > INPUT_PROB_TOL:
        raise ProbSumMismatch(f"probabilities sum to {total!r}", total=total)
    units = tuple(sorted(merged))
    probs = [merged[k] for k in units]
    # skip exact-ish sums so canonicalization is idempotent
    if abs(total - 1.0) > 1e-14:
        probs = [p / total for p in probs]
    if len(units) < 2:
        raise ZeroVariance("demand must have at least two atoms with positive probability")
    return DemandDistribution(step, units, tuple(probs))


def _as_lattice(d) -> LatticeDistribution:
    return d.lattice() if isinstance(d, DemandDistribution) else d


def mean(d) -> float:
    return _as_lattice(d).mean()


def variance(d) -> float:
    return _as_lattice(d).variance()


def convolve_n(d, n: int) -> LatticeDistribution:
    """Law of the sum of ``n`` i.i.d. copies, by binary powering."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    base = _as_lattice(d)
    result = None
    while n:
        if n & 1:
            result = base if result is None else result.convolve(base)
        n >>= 1
        if n:
            base = base.convolve(base)
    return result


def quantile(d, p: float) -> float:
    return _as_lattice(d).quantile(p)


def laplace(d, theta: float) -> float:
    """``E[exp(-theta * D)]``; terms with ``theta * v > 700`` are dropped as zero."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    lat = _as_lattice(d)
    v, p = lat.values, lat.probs
    if math.isinf(theta):
        return float(p[v == 0].sum())
    x = theta * v
    keep = x <= EXP_GUARD
    return float(np.dot(np.exp(-x[keep]), p[keep]))


def log_laplace(d, theta: float) -> float:
    """``log E[exp(-theta * D)]`` computed stably (log-sum-exp)."""
    lat = _as_lattice(d)
    v, p = lat.values, lat.probs
    mask = p > 0
    a = np.log(p[mask]) - theta * v[mask]
    m = a.max()
    return float(m + math.log(np.exp(a - m).sum()))


def min_mean_abs_dev(d) -> float:
    """``min_z E|z - D|``, attained at any median."""
    lat = _as_lattice(d)
    med = lat.quantile(0.5)
    return lat.expect(lambda v: np.abs(med - v))

"""Explicit constants behind the asymptotic-optimality guarantee of TBS policies.

Everything is computed on the instance with ``c_R`` folded away, since the
guarantee is a statement about the reduced problem; adding the common
constant ``c_R E[D]`` to both costs only shrinks their ratio.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .cost import Instance, expected_G, lead_demand, newsvendor, reduce_regular_cost
from .demand import laplace, log_laplace, min_mean_abs_dev

ROOT_RTOL = 1e-14


def phi(inst: Instance, eps: float, theta: float) -> float:
    """``exp(theta (E[D] - eps)) E[exp(-theta D)]``."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    return math.exp(theta * (inst.mean_demand - eps)) * laplace(inst.demand, theta)


def _centered(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    d = inst.demand
    x = np.asarray(d.values) - inst.mean_demand
    return x, np.asarray(d.probs)


def _expm1_minus_linear(y: np.ndarray) -> np.ndarray:
    """``expm1(y) - y`` without cancellation for small ``|y|``."""
    out = np.expm1(y) - y
    small = np.abs(y) < 1e-2
    ys = y[small]
    out[small] = ys * ys * (0.5 + ys * (1 / 6 + ys * (1 / 24 + ys * (1 / 120 + ys * (1 / 720 + ys / 5040)))))
    return out


def log_phi(inst: Instance, eps: float, theta: float) -> float:
    """``log phi`` evaluated as ``log E[exp(-theta (D - E[D]))] - theta eps``.

    The centred form keeps full relative accuracy when ``theta`` is tiny, where
    ``log phi`` is of order ``theta^2`` and the naive sum cancels.
    """
    x, p = _centered(inst)
    y = -theta * x
    guard = y > 700.0
    if guard.any():
        return theta * (inst.mean_demand - eps) + log_laplace(inst.demand, theta)
    # sum p x = 0, so the linear part of expm1 drops out
    return math.log1p(float(p @ _expm1_minus_linear(y))) - theta * eps


def log_phi_slope(inst: Instance, eps: float, theta: float) -> float:
    """``d/dtheta log phi = E[D] - eps - E_theta[D]`` (tilted mean), nondecreasing in theta."""
    x, p = _centered(inst)
    y = -theta * x
    if float(np.abs(y).max()) <= 700.0:
        # x * expm1(-theta x) <= 0 termwise, so this sum has no cancellation
        return -eps - float(p @ (x * np.expm1(y))) / (1.0 + float(p @ np.expm1(y)))
    w = p * np.exp(y - y.max())
    return -eps - float(w @ x) / float(w.sum())


@dataclass(frozen=True)
class TiltMinimum:
    gamma: float
    vartheta: float  # math.inf when the infimum is only approached
    attained: bool
    log_gamma: float = 0.0

    @property
    def one_minus_gamma(self) -> float:
        return -math.expm1(self.log_gamma)


def gamma_vartheta(inst: Instance, eps: float, rtol: float = ROOT_RTOL) -> TiltMinimum:
    """``gamma = inf_theta phi(theta)`` and the minimizing ``theta``.

    ``log phi`` is convex with slope ``-eps`` at 0 and asymptotic slope
    ``E[D] - eps - min D``.  If that slope is not positive the infimum is the
    limit at infinity, reported with ``vartheta = inf`` and ``attained = False``.
    Otherwise the minimizer is bracketed by doubling and located as the root
    of the monotone slope by bisection to relative width ``rtol``.
    """
    mean = inst.mean_demand
    if not 0.0 < eps <= mean:
        raise ValueError(f"eps must lie in (0, E[D]] = (0, {mean}], got {eps}")
    d = inst.demand
    dmin, p_min = d.units[0] * d.step, d.probs[0]
    slope_inf = mean - eps - dmin
    if slope_inf <= 1e-15 * max(1.0, mean):
        gamma = p_min if abs(slope_inf) <= 1e-15 * max(1.0, mean) else 0.0
        return TiltMinimum(gamma, math.inf, False, math.log(gamma) if gamma > 0 else -math.inf)

    slope = lambda t: log_phi_slope(inst, eps, t)
    # start near the small-eps scale eps / Var(D) so tiny eps brackets quickly
    hi = max(eps / d.lattice().variance(), 1e-300)
    while slope(hi) < 0:
        hi *= 2.0
    lo = 0.0 if slope(hi / 2) >= 0 else hi / 2
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slope(mid) < 0:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    lg = log_phi(inst, eps, theta)
    return TiltMinimum(math.exp(lg), theta, True, lg)


def prefix_max_tail_bound(inst: Instance, eps: float, n: int, tilt: TiltMinimum | None = None) -> float:
    """``gamma^n / (vartheta (1 - gamma))``: bounds ``M_inf - M_n`` for every ``r <= E[D] - eps``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = tilt or gamma_vartheta(inst, eps)
    if math.isinf(t.vartheta):
        return 0.0
    return math.exp(n * t.log_gamma) / (t.vartheta * t.one_minus_gamma)


@dataclass(frozen=True)
class GapCertificate:
    p0: float
    p_hat0: float
    Q0: float
    eta0: float
    c0: float
    U0: float
    g: float
    U: float
    eps0: float
    eps0_terms: tuple[float, float, float, float]
    gamma0: float
    one_minus_gamma0: float
    vartheta0: float
    vartheta0_attained: bool
    K: float  # U0 2^L0 + max(b,h) gamma0 / (vartheta0 (1 - gamma0)^2)
    Y0: float
    L0: int

    def min_L_for(self, eps: float) -> int:
        """Smallest integer L with ``L > eps0^-2 + Y0 eps^-2``."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        x = self.eps0**-2 + self.Y0 / eps**2
        return int(math.floor(x)) + 1

    def gap_applicable(self, L: int) -> bool:
        return L > self.eps0**-2 + self.L0 + 1

    def additive_gap(self, L: int) -> float:
        """``5 log(L) / L * K``; meaningful only where :meth:`gap_applicable` holds."""
        return 5.0 * math.log(L) / L * self.K

    def ratio_bound(self, L: int) -> float:
        return 1.0 + self.additive_gap(L) / self.g

    def gap_report(self, L: int) -> dict:
        return {
            "L": int(L),
            "applicable": self.gap_applicable(L),
            "additive_gap": self.additive_gap(L),
            "ratio_bound": self.ratio_bound(L),
        }

    def to_json(self) -> dict:
        out = asdict(self)
        out["eps0_terms"] = list(self.eps0_terms)
        return out


def certificate(inst: Instance) -> GapCertificate:
    red, _ = reduce_regular_cost(inst)
    d = red.demand
    lat = d.lattice()
    mean = lat.mean()
    b, h = red.b, red.h
    lo, hi = min(b, h), max(b, h)

    mean_units = mean / d.step
    units = np.asarray(d.units)
    probs = np.asarray(d.probs)
    p0 = float(probs[units < mean_units - 1e-9 * max(1.0, mean_units)].sum())
    p_hat0 = math.sqrt(0.5 * p0 * (1.0 - p0))
    Q0 = max(lat.quantile(0.5 * p0), 0.0)
    eta0 = min_mean_abs_dev(d)
    c0 = lo * p_hat0 * eta0 / 240.0
    U0 = 64.0 * (red.L0 + 1) * hi**2 / lo * mean
    lead = lead_demand(red)
    g = newsvendor(lead, red)[1]
    U = red.c * mean + expected_G(lead.negated(), 0.0, red)
    terms = (
        mean - Q0,
        0.25 * (eta0 * p_hat0) ** 2,
        -math.expm1(-math.log(2.0) * p_hat0**2 / 400.0),
        c0**2 * (U0 * 2.0**red.L0 + eta0 + U + 1.0) ** -2 / 625.0,
    )
    eps0 = min(terms)
    tilt = gamma_vartheta(red, eps0)
    inv_theta = 0.0 if math.isinf(tilt.vartheta) else 1.0 / tilt.vartheta
    K = U0 * 2.0**red.L0 + hi * tilt.gamma * inv_theta * tilt.one_minus_gamma**-2
    Y0 = 25.0 * K**2 / g**2 + red.L0 + 1
    return GapCertificate(
        p0=p0, p_hat0=p_hat0, Q0=Q0, eta0=eta0, c0=c0, U0=U0, g=g, U=U,
        eps0=eps0, eps0_terms=terms, gamma0=tilt.gamma, one_minus_gamma0=tilt.one_minus_gamma, vartheta0=tilt.vartheta,
        vartheta0_attained=tilt.attained, K=K, Y0=Y0, L0=red.L0,
    )

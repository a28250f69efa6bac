import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import instances
from dualsrc.bounds import certificate, gamma_vartheta, log_phi, phi, prefix_max_tail_bound
from dualsrc.cost import Instance
from dualsrc.demand import make_demand
from dualsrc.lindley import WalkSpec, mean_sequence


def test_reference_tilt_closed_form(ref_instance):
    # phi(theta) = e^{theta/2} (1 + e^{-2 theta}) / 2, minimized at log(3)/2
    t = gamma_vartheta(ref_instance, 0.5)
    assert t.attained
    assert t.vartheta == pytest.approx(math.log(3) / 2, rel=1e-12)
    assert t.gamma == pytest.approx(phi(ref_instance, 0.5, math.log(3) / 2), rel=1e-14)
    assert t.gamma == pytest.approx(0.877382675, abs=1e-9)


@given(instances(), st.floats(0.05, 1.0))
def test_tilt_matches_grid_scan(inst, frac):
    eps = frac * inst.mean_demand
    t = gamma_vartheta(inst, eps)
    thetas = np.linspace(0, 40, 40001)
    v = np.asarray(inst.demand.values)
    a = np.log(np.asarray(inst.demand.probs))[None, :] - thetas[:, None] * v[None, :]
    top = a.max(axis=1)
    vals = thetas * (inst.mean_demand - eps) + top + np.log(np.exp(a - top[:, None]).sum(axis=1))
    scan = math.exp(vals.min())
    assert t.gamma <= scan * (1 + 1e-12) + 1e-300
    if t.attained and t.vartheta < 39:
        assert t.gamma == pytest.approx(scan, rel=1e-4, abs=1e-12)
        assert abs(t.vartheta - thetas[vals.argmin()]) <= 1e-3 * (1 + t.vartheta) + 1e-3


def test_unattained_infimum():
    # D in {1, 3}: at eps = E[D] - min D the slope at infinity is zero
    d = make_demand(1, [(1, 0.25), (3, 0.75)])
    inst = Instance(h=1, b=1, c_R=0, c_E=1, L=4, L0=0, demand=d)
    t = gamma_vartheta(inst, inst.mean_demand - 1.0)
    assert not t.attained and math.isinf(t.vartheta)
    assert t.gamma == pytest.approx(0.25)
    t2 = gamma_vartheta(inst, inst.mean_demand)
    assert math.isinf(t2.vartheta)
    assert prefix_max_tail_bound(inst, inst.mean_demand - 1.0, 3) == 0.0


@given(instances())
def test_gamma_decreases_in_eps(inst):
    m = inst.mean_demand
    gs = [gamma_vartheta(inst, f * m).gamma for f in (0.05, 0.2, 0.5, 0.9)]
    assert all(b <= a + 1e-15 for a, b in zip(gs, gs[1:]))
    assert all(0 <= g < 1 for g in gs)


def test_tiny_eps_is_resolved(ref_instance):
    t = gamma_vartheta(ref_instance, 1e-12)
    # second-order expansion: log gamma ~ -eps^2 / (2 Var D), vartheta ~ eps / Var D
    assert t.vartheta == pytest.approx(1e-12, rel=1e-6)
    assert t.one_minus_gamma == pytest.approx(0.5e-24, rel=1e-6)


def test_tail_bound_against_exact_means(ref_instance):
    for r in (0.0, 0.25, 0.5):
        seq = mean_sequence(WalkSpec(ref_instance.demand, r), 30)
        for n in (1, 5, 30):
            assert prefix_max_tail_bound(ref_instance, 0.5, n) >= seq.M_inf - seq[n] - 1e-12


def test_reference_certificate(ref_instance):
    cert = certificate(ref_instance)
    assert cert.p0 == 0.5
    assert cert.p_hat0 == pytest.approx(math.sqrt(0.125))
    assert cert.Q0 == 0.0
    assert cert.eta0 == pytest.approx(1.0)
    assert cert.g == pytest.approx(1.0)
    assert cert.U == pytest.approx(2.0)
    assert cert.eps0 == pytest.approx(7.509e-13, rel=1e-3)
    assert cert.eps0 == min(cert.eps0_terms)
    assert cert.vartheta0_attained
    assert 0 < cert.one_minus_gamma0 < 1e-20
    L = cert.min_L_for(0.1)
    assert cert.gap_applicable(L)
    assert cert.additive_gap(L) / cert.g <= 0.1
    assert not cert.gap_applicable(10**6)
    rep = cert.gap_report(L)
    assert rep["ratio_bound"] == pytest.approx(1 + rep["additive_gap"] / cert.g)


def test_certificate_ignores_regular_cost(ref_demand):
    a = certificate(Instance(h=1, b=2, c_R=0, c_E=1, L=4, L0=0, demand=ref_demand))
    b = certificate(Instance(h=1, b=2, c_R=0.4, c_E=1.4, L=4, L0=0, demand=ref_demand))
    assert a.to_json() == b.to_json()


@given(instances(), st.floats(0.01, 1.0), st.floats(0, 20))
def test_log_phi_is_log_of_phi(inst, frac, theta):
    eps = frac * inst.mean_demand
    p = phi(inst, eps, theta)
    if p > 1e-250:
        assert log_phi(inst, eps, theta) == pytest.approx(math.log(p), rel=1e-10, abs=1e-13)

"""The compiled and numpy backends must agree."""
import numpy as np
import pytest

from dualsrc import _pykernels, kernels
from dualsrc.dp import TruncationSpec, _post_decision_cost, solve_opt_exact

compiled = pytest.importorskip("dualsrc._kernels")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_tbs_path_bitwise(ref_instance):
    rng = np.random.default_rng(0)
    demand = rng.choice([0, 2, 4], size=5000).astype(np.int64)
    args = (demand, 1, 2, 6, 1, 1.0, 3.0, 0.2, 1.2, 0.5, -3, 10)
    for express in (True, False):
        a_out, b_out = np.empty(demand.size), np.empty(demand.size)
        a = compiled.tbs_path(*args, express, a_out)
        b = _pykernels.tbs_path(*args, express, b_out)
        assert a == b
        np.testing.assert_array_equal(a_out, b_out)


def test_walk_sup_bitwise():
    seeds = np.random.SeedSequence(1).generate_state(64, dtype=np.uint64)
    units = np.array([0, 1, 3], dtype=np.int64)
    thr = np.floor(np.cumsum([0.3, 0.3])[:] * 2.0**53).astype(np.uint64)
    np.testing.assert_array_equal(
        compiled.walk_sup(units, thr, 1, 3000, seeds), _pykernels.walk_sup(units, thr, 1, 3000, seeds)
    )


def test_walk_sup_bytes_bitwise(ref_demand):
    from dualsrc.lindley import _byte_tables

    seeds = np.random.SeedSequence(2).generate_state(32, dtype=np.uint64)
    tot, pm, inc_u, per_byte = _byte_tables(np.array([1, -1], dtype=np.int64), np.array([1]), 1)
    np.testing.assert_array_equal(
        compiled.walk_sup_bytes(tot, pm, inc_u, 1, per_byte, 4001, seeds),
        _pykernels.walk_sup_bytes(tot, pm, inc_u, 1, per_byte, 4001, seeds),
    )


def test_bellman_sweep_agrees(ref_instance):
    inst = ref_instance.with_lead_time(4)
    caps = TruncationSpec.default(inst)
    G = _post_decision_cost(inst, caps)
    m = inst.L - inst.L0 - 1
    n = (caps.cap_R + 1) ** m * caps.width
    V = np.random.default_rng(3).random(n)
    probs = np.asarray(inst.demand.probs)
    units = np.asarray(inst.demand.units, dtype=np.int64)
    a = compiled.bellman_sweep(V, probs, units, G, 1.0, m, caps.cap_R, caps.cap_E, caps.width)
    b = _pykernels.bellman_sweep(V, probs, units, G, 1.0, m, caps.cap_R, caps.cap_E, caps.width)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-13, atol=1e-13)
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[2], b[2])


def test_gth_agrees(ref_demand):
    from dualsrc.lindley import WalkSpec, _direct

    rng = np.random.default_rng(4)
    N, up, down = 300, 3, 5
    B = rng.random((N + 1, up + down + 1))
    for i in range(N + 1):
        for k in range(B.shape[1]):
            if not 0 <= i + k - down <= N:
                B[i, k] = 0
    B /= B.sum(axis=1, keepdims=True)
    a = compiled.gth_band(B.copy(), up, down)
    b = _pykernels.gth_band(B.copy(), up, down)
    np.testing.assert_allclose(a, b, rtol=1e-12)
    # stationary: pi P = pi
    P = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for k in range(B.shape[1]):
            if B[i, k]:
                P[i, i + k - down] = B[i, k]
    np.testing.assert_allclose(a @ P, a, atol=1e-14)


def test_solver_result_independent_of_backend(ref_instance, monkeypatch):
    inst = ref_instance.with_lead_time(3)
    a = solve_opt_exact(inst).opt_cost
    monkeypatch.setattr(kernels, "bellman_sweep", _pykernels.bellman_sweep)
    b = solve_opt_exact(inst).opt_cost
    assert a == pytest.approx(b, abs=1e-12)

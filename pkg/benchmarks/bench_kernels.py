"""Time the compiled kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Prints one line per kernel with the best wall time of each backend and the
speedup.  Both backends get identical inputs; results are checked for
agreement before timing is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from dualsrc import _pykernels
from dualsrc.cost import Instance
from dualsrc.demand import make_demand
from dualsrc.dp import TruncationSpec, _post_decision_cost

try:
    from dualsrc import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(scale: float):
    rng = np.random.default_rng(0)
    n = int(2_000_000 * scale)
    demand = rng.choice([0, 2], size=n).astype(np.int64)
    out = np.empty(0)
    yield "tbs_path", lambda k: k.tbs_path(demand, 1, 0, 6, 0, 1.0, 1.0, 0.0, 1.0, 0.5, 0, 60, True, out), np.testing.assert_allclose

    seeds = np.random.SeedSequence(1).generate_state(int(200 * scale) or 1, dtype=np.uint64)
    units = np.array([0, 1, 3], dtype=np.int64)
    thr = np.floor(np.cumsum([0.3, 0.3]) * 2.0**53).astype(np.uint64)
    yield "walk_sup", lambda k: k.walk_sup(units, thr, 1, 10_000, seeds), np.testing.assert_array_equal

    d = make_demand(1, [(0, 0.5), (2, 0.5)])
    inst = Instance(h=1, b=1, c_R=0, c_E=1, L=6, L0=0, demand=d)
    caps = TruncationSpec.default(inst)
    G = _post_decision_cost(inst, caps)
    m = inst.L - inst.L0 - 1
    V = rng.random((caps.cap_R + 1) ** m * caps.width)
    probs = np.asarray(d.probs)
    du = np.asarray(d.units, dtype=np.int64)

    def sweep(k):
        return k.bellman_sweep(V, probs, du, G, 1.0, m, caps.cap_R, caps.cap_E, caps.width)[0]

    yield "bellman_sweep", sweep, lambda a, b: np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    N, up, down = int(20_000 * scale), 40, 41
    B = rng.random((N + 1, up + down + 1))
    B /= B.sum(axis=1, keepdims=True)
    yield "gth_band", lambda k: k.gth_band(B.copy(), up, down), lambda a, b: np.testing.assert_allclose(a, b, rtol=1e-9)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<15} {'compiled':>11} {'numpy':>11} {'speedup':>8}")
    for name, fn, check in cases(args.scale):
        tc, a = best_time(lambda: fn(_kernels), args.repeat)
        tp, b = best_time(lambda: fn(_pykernels), args.repeat)
        check(a, b)
        print(f"{name:<15} {tc * 1e3:>9.1f}ms {tp * 1e3:>9.1f}ms {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()

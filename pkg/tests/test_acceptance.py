"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict that is printed in the pytest
terminal summary, then asserts it.
"""
import json
import math
import time
from pathlib import Path

import mpmath as mp
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance
from dualsrc.bounds import certificate, gamma_vartheta, prefix_max_tail_bound
from dualsrc.cli import main
from dualsrc.cost import Instance
from dualsrc.demand import make_demand
from dualsrc.dp import Grid1D, bellman_1d, bellman_1d_auto, lower_bound, solve_opt_exact
from dualsrc.lindley import WalkSpec, mean_sequence, stationary_overshoot, walk_sup_mc
from dualsrc.sim import PolicySpec, SimConfig, simulate
from dualsrc.sweep import sweep_leadtime
from dualsrc.tbs import best_tbs, tbs_cost, tbs_profile
from oracles import positive_part_mean, prefix_max_law

pytestmark = pytest.mark.acceptance


def verdict(k: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture
def reference():
    d = make_demand(1, [(0, 0.5), (2, 0.5)])
    return Instance(h=1, b=1, c_R=0, c_E=1, L=6, L0=0, demand=d)


def test_1_tbs_formula_vs_simulation(reference):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    rs = rng.choice([0.0, 0.25, 0.5, 0.75], size=10)
    Ss = rng.integers(-8, 13, size=10) * 0.25
    cfg = SimConfig(horizon=1_000_000, replications=20, seed=7)
    misses, zs = [], []
    for r, S in zip(rs, Ss):
        exact = tbs_cost(reference, float(r), float(S))
        res = simulate(reference, PolicySpec.tbs(float(r), float(S)), cfg)
        zs.append((res.mean - exact) / res.half_width)
        if not res.contains(exact):
            misses.append((float(r), float(S), exact, res.ci99))
        print(f"r={r:<5} S={S:<6} exact={exact:.6f} sim={res.mean:.6f} +- {res.half_width:.6f}")
    dt = time.time() - t0
    verdict(1, not misses and dt < 300,
            f"10/10 pairs inside 99% CI (max |err|/halfwidth {max(map(abs, zs)):.2f}), {dt:.1f}s"
            if not misses else f"{len(misses)} pair(s) outside 99% CI: {misses}")


def _sandwich_instances(reference):
    rng = np.random.default_rng(11)
    return [reference] + [random_instance(rng, L=2, max_atoms=4, max_value=4) for _ in range(5)]


def test_2_sandwich(reference):
    t0 = time.time()
    bad = []
    rows = 0
    for inst in _sandwich_instances(reference):
        ub = best_tbs(inst).policy.cost
        for L in (2, 3, 4, 5):
            sub = inst.with_lead_time(L)
            sol = solve_opt_exact(sub)
            lb = lower_bound(sub).value
            slack = 1e-6 + sol.clamped_mass
            rows += 1
            if not (lb <= sol.opt_cost + slack and sol.opt_cost <= ub + slack):
                bad.append((inst.digest()[:8], L, lb, sol.opt_cost, ub))
    dt = time.time() - t0
    verdict(2, not bad and dt < 900, f"{rows} (instance, L) cases satisfy LB <= OPT <= TBS, {dt:.1f}s"
            if not bad else f"violations: {bad}")


def test_3_ratio_trend(reference):
    res = sweep_leadtime(reference, [2, 3, 4, 5])
    print(f"{'L':>3} {'TBS':>10} {'OPT':>10} {'LB':>10} {'TBS/OPT':>9} {'TBS/LB':>9}")
    for r in res.rows:
        print(f"{r.L:>3} {r.tbs_cost:>10.6f} {r.opt_exact:>10.6f} {r.lower_bound:>10.6f} "
              f"{r.ratio_vs_opt:>9.4f} {r.ratio_vs_lb:>9.4f}")
    ratios = [r.ratio_vs_opt for r in res.rows]
    ok = ratios[-1] <= ratios[0] + 0.02 and ratios[-1] < ratios[0]
    verdict(3, ok, "TBS/OPT for L=2..5: " + ", ".join(f"{x:.4f}" for x in ratios))


def test_4_lindley(reference):
    worst = 0.0
    for r in (0.25, 0.5, 0.75):
        w = WalkSpec(reference.demand, r)
        exact = stationary_overshoot(w).mean()
        mc, se, _ = walk_sup_mc(w, steps=100_000, paths=100_000, seed=31)
        z = abs(mc - exact) / se
        worst = max(worst, z)
        print(f"r={r}: exact {exact:.6f}  MC {mc:.6f} +- {se:.6f}  ({z:.2f} SE)")
    spitzer_err = 0.0
    vals, probs = [0.0, 2.0], [0.5, 0.5]
    for r in (0.0, 0.25, 0.5, 0.75, 1.0, 1.5):
        seq = mean_sequence(WalkSpec(reference.demand, r), 6, with_limit=False)
        law6 = prefix_max_law(vals, probs, r, 6)
        M6 = sum(v * p for v, p in law6.items())
        rhs = sum(positive_part_mean(vals, probs, r, k) / k for k in range(1, 6))
        spitzer_err = max(spitzer_err, abs((seq[6] - seq[1]) - rhs), abs(M6 - rhs), abs(seq[6] - M6))
    verdict(4, worst <= 3 and spitzer_err <= 1e-10,
            f"MC within {worst:.2f} SE (limit 3); Spitzer (1,6) max error {spitzer_err:.1e} over 2^5 paths")


def test_5_tail_bound_dominance(reference):
    rng = np.random.default_rng(5)
    insts = [reference] + [random_instance(rng, L=4) for _ in range(4)]
    checks = violations = 0
    worst = -math.inf
    for inst in insts:
        m = inst.mean_demand
        for eps in (0.25, 0.5):
            if eps >= m:
                continue
            tilt = gamma_vartheta(inst, eps)
            r = 0.0
            while r <= m - eps + 1e-12:
                seq = mean_sequence(WalkSpec(inst.demand, r), 50)
                for n in range(1, 51):
                    gap = seq.M_inf - seq[n]
                    bound = prefix_max_tail_bound(inst, eps, n, tilt)
                    checks += 1
                    worst = max(worst, gap - bound)
                    if gap > bound + 1e-12:
                        violations += 1
                r += inst.demand.step / 4
    verdict(5, violations == 0, f"{checks} (instance, eps, r, n) checks, {violations} violations "
            f"(max gap - bound {worst:.3e})")


def _random_instance_wide(rng):
    n = int(rng.integers(2, 7))
    step = float(rng.choice([1.0, 0.5, 0.25]))
    vals = np.sort(rng.choice(12, size=n, replace=False)) * step
    p = rng.dirichlet(np.ones(n))
    p = np.maximum(p, 0.01)
    p /= p.sum()
    d = make_demand(step, list(zip(vals.tolist(), p.tolist())))
    c_R = float(rng.uniform(0, 2))
    L0 = int(rng.integers(0, 3))
    return Instance(h=float(rng.uniform(0.1, 5)), b=float(rng.uniform(0.1, 20)), c_R=c_R,
                    c_E=c_R + float(rng.uniform(0.05, 5)), L=L0 + 2 + int(rng.integers(0, 5)), L0=L0, demand=d)


def test_6_constant_containments():
    rng = np.random.default_rng(6)
    failures = []
    for i in range(100):
        inst = _random_instance_wide(rng)
        c = certificate(inst)
        checks = {
            "p0": 0 < c.p0 < 1,
            "p_hat0": 0 < c.p_hat0 < 1,
            "Q0": 0 <= c.Q0 < inst.mean_demand,
            "eta0": c.eta0 > 0,
            # gamma is carried as its complement; it rounds to 1.0 in double precision
            "gamma0": c.gamma0 >= 0 and c.one_minus_gamma0 > 0,
            "eps0": 0 < c.eps0 < 0.002,
            "g<=U": c.g <= c.U,
        }
        bad = [k for k, v in checks.items() if not v]
        if bad:
            failures.append((i, bad))
    verdict(6, not failures, "all containments hold on 100 random instances"
            if not failures else f"failures: {failures[:5]}")


def test_7_convexity(reference):
    rng = np.random.default_rng(7)
    insts = [reference] + [random_instance(rng, L=4) for _ in range(10)]
    f_viol = v_viol = 0
    f_checks = v_checks = 0
    for inst in insts:
        f = np.array([x for _, _, x in tbs_profile(inst, inst.demand.step / 4)])
        sec = f[:-2] + f[2:] - 2 * f[1:-1]
        f_checks += sec.size
        f_viol += int(np.sum(sec < -1e-8))
    for alpha in (0.5, 0.9, 0.99):
        for r in (0.0, 0.5):
            top = bellman_1d_auto(reference, r, alpha, 30)
            grid = Grid1D(round(top.x_min / top.step), round(top.x_max / top.step), top.step)
            prev = np.zeros(top.values.size)
            for n in range(1, 31):
                v = bellman_1d(reference, r, alpha, n, grid).values
                v_checks += 1
                ok = (np.all(np.diff(v) >= -1e-9)
                      and np.all(v[:-2] + v[2:] - 2 * v[1:-1] >= -1e-8)
                      and np.all(v >= prev - 1e-9))
                v_viol += int(not ok)
                prev = v
    verdict(7, f_viol == 0 and v_viol == 0,
            f"F midpoint-convex at {f_checks - f_viol}/{f_checks} points; "
            f"V shape holds for {v_checks - v_viol}/{v_checks} (alpha, r, n) cases")


def _run_all(workdir: Path, capsys) -> dict[str, bytes]:
    inst = {"h": 1, "b": 1, "c_R": 0, "c_E": 1, "L": 3, "L0": 0,
            "demand": {"step": 1, "atoms": [[0, 0.5], [2, 0.5]]}}
    (workdir / "inst.json").write_text(json.dumps(inst))
    (workdir / "tbs.json").write_text(json.dumps({"kind": "tbs", "r": 0.5, "S": 0}))
    (workdir / "table.json").write_text(json.dumps({"kind": "table", "file": "dp/policy.csv"}))
    cmds = [
        ["optimize-tbs", "--grid-refine", "2", "--out-dir", "tbs"],
        ["solve-dp", "--out-dir", "dp"],
        ["lower-bound", "--out-dir", "lb"],
        ["simulate", "--policy", "tbs.json", "--horizon", "20000", "--reps", "4", "--seed", "1", "--out-dir", "sim"],
        ["simulate", "--policy", "table.json", "--horizon", "20000", "--reps", "4", "--seed", "2", "--out-dir", "simt"],
        ["gap-bound", "--L", "10", "--L-range", "3:6", "--out-dir", "gap"],
        ["lindley", "--r", "0.5", "--out-dir", "lin"],
        ["sweep", "--L", "2:4", "--out-dir", "sweep"],
    ]
    out: dict[str, bytes] = {}
    for i, cmd in enumerate(cmds):
        assert main([cmd[0], "--instance", "inst.json", *cmd[1:]]) == 0
        out[f"stdout{i}"] = capsys.readouterr().out.encode()
    for p in sorted(workdir.rglob("*")):
        if p.is_file() and p.suffix in (".json", ".csv"):
            out[str(p.relative_to(workdir))] = p.read_bytes()
    return out


def test_8_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    runs = []
    for k, threads in enumerate(("1", "2")):
        d = tmp_path / f"run{k}"
        d.mkdir()
        monkeypatch.chdir(d)
        monkeypatch.setenv("DUALSRC_THREADS", threads)
        runs.append(_run_all(d, capsys))
    a, b = runs
    manifests = [k for k in a if k.endswith("manifest.json")]
    same_manifests = all(a[k] == b.get(k) for k in manifests)
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    verdict(8, same_manifests and not differing and len(manifests) == 8,
            f"{len(a)} outputs byte-identical across two runs ({len(manifests)} manifests)"
            if not differing else f"differing outputs: {differing}")


# independent high-precision reimplementation of the constant chain ---------

def _mp_constants(inst: Instance):
    mp.mp.dps = 80
    vals = [mp.mpf(v) for v in inst.demand.values]
    probs = [mp.mpf(p) for p in inst.demand.probs]
    # stored probabilities sum to 1 only to double precision; 1 - gamma is far smaller
    total = mp.fsum(probs)
    probs = [p / total for p in probs]
    b, h = mp.mpf(inst.b), mp.mpf(inst.h)
    c = mp.mpf(inst.c_E) - mp.mpf(inst.c_R)
    L0 = inst.L0
    m = mp.fsum(p * v for p, v in zip(probs, vals))

    p0 = mp.fsum(p for p, v in zip(probs, vals) if v < m - mp.mpf(10) ** -30)
    p_hat0 = mp.sqrt(p0 * (1 - p0) / 2)
    cdf = mp.mpf(0)
    Q0 = None
    for p, v in zip(probs, vals):
        cdf += p
        if cdf >= p0 / 2:
            Q0 = max(v, mp.mpf(0))
            break
    eta0 = min(mp.fsum(p * abs(z - v) for p, v in zip(probs, vals)) for z in vals)
    lo, hi = min(b, h), max(b, h)
    c0 = lo * p_hat0 * eta0 / 240
    U0 = 64 * (L0 + 1) * hi**2 / lo * m

    # law of the demand over L0 + 1 periods
    lead = {mp.mpf(0): mp.mpf(1)}
    for _ in range(L0 + 1):
        nxt = {}
        for x, q in lead.items():
            for v, p in zip(vals, probs):
                nxt[x + v] = nxt.get(x + v, 0) + q * p
        lead = nxt

    def EG(x):
        return mp.fsum(q * (h * max(x - s, 0) + b * max(s - x, 0)) for s, q in lead.items())

    g = min(EG(x) for x in lead)  # piecewise linear: minimized at an atom
    U = c * m + EG(mp.mpf(0))
    terms = [
        m - Q0,
        (eta0 * p_hat0) ** 2 / 4,
        1 - mp.power(2, -(p_hat0**2) / 400),
        c0**2 * (U0 * 2**L0 + eta0 + U + 1) ** -2 / 625,
    ]
    eps0 = min(terms)

    def dlogphi(t):  # d/dtheta log phi, up to the positive factor E[exp(-theta D)]
        return mp.fsum(p * (m - eps0 - v) * mp.exp(-t * v) for p, v in zip(probs, vals))

    a, z = eps0 / 16, eps0
    while dlogphi(z) < 0:
        z *= 2
    theta = mp.findroot(dlogphi, (a, z), solver="anderson")
    phi = mp.exp(theta * (m - eps0)) * mp.fsum(p * mp.exp(-theta * v) for p, v in zip(probs, vals))
    K = U0 * 2**L0 + hi * phi / (theta * (1 - phi) ** 2)
    Y0 = 25 * K**2 / g**2 + L0 + 1
    return dict(p0=p0, p_hat0=p_hat0, Q0=Q0, eta0=eta0, c0=c0, U0=U0, g=g, U=U, eps0=eps0,
                one_minus_gamma0=1 - phi, vartheta0=theta, K=K, Y0=Y0)


def test_9_certificate_integrity(reference):
    rng = np.random.default_rng(9)
    insts = [reference] + [_random_instance_wide(rng) for _ in range(9)]
    worst = 0.0
    worst_key = ""
    gap_ok = True
    for inst in insts:
        ours = certificate(inst)
        ref = _mp_constants(inst)
        for key, want in ref.items():
            got = getattr(ours, key)
            err = abs(mp.mpf(got) - want) / max(abs(want), mp.mpf(10) ** -300)
            if want == 0:
                err = abs(mp.mpf(got))
            if err > worst:
                worst, worst_key = float(err), key
        for eps in (0.5, 0.1, 0.01):
            x = 1 / ref["eps0"] ** 2 + ref["Y0"] / mp.mpf(eps) ** 2
            want_L = mp.floor(x) + 1
            got_L = ours.min_L_for(eps)
            err = abs(mp.mpf(got_L) - want_L) / want_L
            if err > worst:
                worst, worst_key = float(err), f"min_L_for({eps})"
            want_gap = 5 * mp.log(want_L) / want_L * ref["K"]
            err = abs(mp.mpf(ours.additive_gap(got_L)) - want_gap) / want_gap
            if err > worst:
                worst, worst_key = float(err), f"additive_gap({eps})"
            gap_ok &= ours.gap_applicable(got_L) and ours.additive_gap(got_L) / ours.g <= eps
            gap_ok &= want_gap / ref["g"] <= eps
    verdict(9, worst <= 1e-9 and gap_ok,
            f"max relative disagreement {worst:.2e} ({worst_key}) over 10 instances; "
            f"gap(min_L)/g <= eps: {gap_ok}")

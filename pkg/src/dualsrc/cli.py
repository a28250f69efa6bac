"""``dualsrc`` command-line interface.

Every subcommand prints one canonical JSON document on stdout.  With
``--out-dir`` the same document and any tables are also written to files,
alongside a ``manifest.json`` describing the run.  Exit status is 0 on
success, 1 on a domain error (error JSON on stderr) and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .bounds import certificate
from .cost import Instance
from .demand import QUANTILE_TOL
from .dp import DEFAULT_MAX_SWEEPS, DEFAULT_RVI_TOL, TruncationSpec, lower_bound, solve_opt_exact
from .errors import DualSourcingError
from .io import canonical_json, csv_text, make_manifest, sha256_file, write_json
from .lindley import DEFAULT_TOL, WalkSpec, stationary_overshoot_result
from .sim import INIT_MODES, PolicySpec, SimConfig, simulate
from .sweep import COLUMNS, DEFAULT_BUDGET, parse_L_range, sweep_leadtime
from .tbs import best_tbs


class InputError(DualSourcingError):
    code = "InputError"


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}", path=path) from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e.msg} (line {e.lineno})", path=path) from None


def _load_instance(args) -> Instance:
    obj = _load_json(args.instance)
    if not isinstance(obj, dict):
        raise InputError("instance file must hold a JSON object")
    try:
        return Instance.from_json(obj)
    except (KeyError, TypeError) as e:
        raise InputError(f"malformed instance: {e}") from None


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


class Run:
    """Collects outputs of one subcommand and persists them with a manifest."""

    def __init__(self, args, argv, inst: Instance | None, tolerances: dict, seeds=()):
        self.args = args
        self.argv = argv
        self.inst = inst
        self.tolerances = tolerances
        self.seeds = list(seeds)
        self.out_dir = Path(args.out_dir) if getattr(args, "out_dir", None) else None
        self.files: dict[str, str] = {}
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, header, rows) -> str | None:
        text = csv_text(header, rows)
        if self.out_dir is None:
            return None
        path = self.out_dir / name
        path.write_text(text, encoding="utf-8", newline="\n")
        self.files[name] = sha256_file(path)
        return name

    def finish(self, result: dict) -> int:
        result = dict(result)
        result["tolerances"] = self.tolerances
        if self.inst is not None:
            result["instance_sha256"] = self.inst.digest()
        text = canonical_json(result)
        sys.stdout.write(text + "\n")
        if self.out_dir is not None:
            name = f"{self.args.command}.json"
            write_json(self.out_dir / name, result)
            self.files[name] = sha256_file(self.out_dir / name)
            manifest = make_manifest(
                self.argv, self.inst.digest() if self.inst else None, self.tolerances, self.seeds, self.files
            )
            write_json(self.out_dir / "manifest.json", manifest)
        return 0


def cmd_validate(args, argv) -> int:
    inst = _load_instance(args)
    sys.stdout.write(canonical_json(inst.to_json()) + "\n")
    return 0


def cmd_optimize_tbs(args, argv) -> int:
    inst = _load_instance(args)
    run = Run(args, argv, inst, {"lindley_tol": args.tol, "quantile_tol": QUANTILE_TOL})
    res = best_tbs(inst, grid_refine=args.grid_refine, tol=args.tol)
    prof = res.profile_rows()
    csv_name = run.table("f_profile.csv", ["r", "F"], prof)
    return run.finish({
        "r_star": res.policy.r,
        "S_star": res.policy.S,
        "cost": res.policy.cost,
        "grid_step": res.step,
        "F_profile": prof,
        "profile_file": csv_name,
    })


def cmd_solve_dp(args, argv) -> int:
    inst = _load_instance(args)
    caps = TruncationSpec.from_json(_load_json(args.caps), inst) if args.caps else TruncationSpec.default(inst)
    run = Run(args, argv, inst, {"rvi_span_tol": args.tol, "max_sweeps": args.max_sweeps})
    sol = solve_opt_exact(inst, caps, tol=args.tol, max_sweeps=args.max_sweeps)
    policy_file = run.table("policy.csv", sol.policy_header(), sol.policy_rows())
    return run.finish({
        "opt_cost": sol.opt_cost,
        "gain_bounds": list(sol.gain_bounds),
        "sweeps": sol.sweeps,
        "clamped_mass": sol.clamped_mass,
        "clamped_mass_flagged": sol.clamp_flagged,
        "cap_hit_fraction": sol.cap_hit_fraction,
        "caps": caps.to_json(),
        "lattice_step": sol.step,
        "policy_file": policy_file,
    })


def cmd_lower_bound(args, argv) -> int:
    inst = _load_instance(args)
    L = args.L if args.L is not None else inst.L
    alphas = _float_list(args.alphas) if args.alphas else None
    r_grid = None
    if args.r_step:
        n = int(math.floor(inst.mean_demand / args.r_step + 1e-9))
        r_grid = [k * args.r_step for k in range(n + 1)]
    run = Run(args, argv, inst, {"grid": "auto-widened until interior minimizers"})
    lb = lower_bound(inst.with_lead_time(L) if L != inst.L else inst, L, alphas, r_grid)
    table = run.table("lower_bound_table.csv", ["alpha", "r", "objective"], lb.rows())
    return run.finish({
        "L": L,
        "lower_bound": lb.value,
        "alpha": lb.alpha,
        "r": lb.r,
        "table": lb.rows(),
        "table_file": table,
    })


def cmd_simulate(args, argv) -> int:
    inst = _load_instance(args)
    policy = PolicySpec.from_json(_load_json(args.policy), inst, Path(args.policy).parent)
    cfg = SimConfig(args.horizon, args.warmup, args.reps, args.seed, args.init)
    run = Run(args, argv, inst, {"ci_level": 0.99}, seeds=[args.seed])
    res = simulate(inst, policy, cfg)
    lo, hi = res.ci99
    reps = [float(x) for x in res.per_rep]
    table = run.table("replications.csv", ["rep", "mean_cost"], [[i, v] for i, v in enumerate(reps)])
    return run.finish({
        "mean": res.mean,
        "ci99": [lo, hi],
        "half_width": res.half_width,
        "reps": reps,
        "policy": policy.to_json(),
        "horizon": cfg.horizon,
        "warmup": cfg.resolved_warmup(inst),
        "seed": cfg.seed,
        "init": cfg.init,
        "replications_file": table,
    })


def cmd_gap_bound(args, argv) -> int:
    inst = _load_instance(args)
    run = Run(args, argv, inst, {"tilt_root_rtol": 1e-14, "quantile_tol": QUANTILE_TOL})
    cert = certificate(inst)
    out = {"certificate": cert.to_json(), "eps": args.eps, "min_L_for_eps": cert.min_L_for(args.eps)}
    if args.L is not None:
        out["gap"] = cert.gap_report(args.L)
    if args.L_range:
        Ls = parse_L_range(args.L_range)
        rows = [[L, cert.gap_applicable(L), cert.additive_gap(L), cert.ratio_bound(L)] for L in Ls]
        out["gap_table_file"] = run.table("gap_table.csv", ["L", "applicable", "additive_gap", "ratio_bound"], rows)
    return run.finish(out)


def cmd_lindley(args, argv) -> int:
    inst = _load_instance(args)
    run = Run(args, argv, inst, {"lindley_tol": args.tol})
    w = WalkSpec(inst.demand, args.r)
    res = stationary_overshoot_result(w, args.tol)
    atoms = [[v, p] for v, p in res.dist.atoms() if p > 0]
    csv_name = run.table("stationary.csv", ["value", "probability"], atoms)
    return run.finish({
        "r": args.r,
        "mean": res.dist.mean(),
        "method": res.method,
        "states": res.states,
        "iterations": res.iterations,
        "discarded_mass": res.discarded_mass,
        "last_tv": res.last_tv,
        "distribution": atoms,
        "distribution_file": csv_name,
    })


def cmd_sweep(args, argv) -> int:
    inst = _load_instance(args)
    run = Run(args, argv, inst, {"rvi_span_tol": DEFAULT_RVI_TOL, "lindley_tol": DEFAULT_TOL})
    res = sweep_leadtime(inst, parse_L_range(args.L), budget=args.budget)
    out = res.to_json()
    out["sweep_file"] = run.table("sweep.csv", list(COLUMNS), [r.as_list() for r in res.rows])
    return run.finish(out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualsrc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dualsrc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--instance", required=True, help="instance JSON file")
        if name != "validate":
            sp.add_argument("--out-dir", help="also write outputs and manifest.json here")
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "check an instance and print its canonical form")

    sp = add("optimize-tbs", cmd_optimize_tbs, "best Tailored Base-Surge policy")
    sp.add_argument("--grid-refine", type=int, default=0, metavar="K", help="halve the r grid K times")
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)

    sp = add("solve-dp", cmd_solve_dp, "exact optimal average cost by relative value iteration")
    sp.add_argument("--caps", help="JSON with cap_R, cap_E, pos_min, pos_max (lattice units)")
    sp.add_argument("--tol", type=float, default=DEFAULT_RVI_TOL)
    sp.add_argument("--max-sweeps", type=int, default=DEFAULT_MAX_SWEEPS)

    sp = add("lower-bound", cmd_lower_bound, "lower bound on the optimal cost from discounted single-source DPs")
    sp.add_argument("--L", type=int, help="regular lead time (default: the instance's)")
    sp.add_argument("--alphas", help="comma-separated discount factors")
    sp.add_argument("--r-step", type=float, help="spacing of the r grid")

    sp = add("simulate", cmd_simulate, "Monte Carlo cost of a policy")
    sp.add_argument("--policy", required=True, help="policy JSON file")
    sp.add_argument("--horizon", type=int, default=1_000_000)
    sp.add_argument("--warmup", type=int, default=None)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init", choices=INIT_MODES, default="zero_state")

    sp = add("gap-bound", cmd_gap_bound, "explicit constants and optimality-gap certificate")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--L", type=int)
    sp.add_argument("--L-range", help="A:B or comma list; writes gap_table.csv")

    sp = add("lindley", cmd_lindley, "stationary law of the overshoot for a constant order r")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)

    sp = add("sweep", cmd_sweep, "lead-time sweep of TBS cost, OPT(L) and the lower bound")
    sp.add_argument("--L", required=True, help="A:B (inclusive) or comma list")
    sp.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="max DP state count")
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, ["dualsrc", *argv])
    except DualSourcingError as e:
        sys.stderr.write(canonical_json(e.to_dict()) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

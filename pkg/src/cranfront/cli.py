"""Command-line front end: region tables, optimization, verification campaigns, gap checks.

Exit codes: 0 success, 1 violations found, 2 invalid input, 3 enumeration cap
exceeded, 4 iteration budget exhausted (best iterate still written).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import itertools
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import _subsets as ss
from .equivalence import (
    CERT_TOL,
    CampaignReport,
    csum_grid,
    theorem1_certificate,
    theorem2_certificate,
)
from .gap import gsd_sumfronthaul_gap_certificate, jd_gap_certificate, sd_sum_gap_certificate
from .gaussinfo import joint_covariance
from .model import (
    InstanceError,
    InvalidQuantizer,
    NetworkInstance,
    background_quantizer,
    load_instance,
    load_quantizer,
    random_instance,
    random_quantizer,
)
from .optimize import OBJECTIVES, Objective, solve
from .regions import (
    ENUM_CAP,
    EnumerationCapExceeded,
    all_orders,
    check_caps,
    cutset_constraints,
    gsd_rates,
    jd_constraints,
    jd_sum_rate_fixed_b,
    k2_boundary,
    sd_constraints,
)
from .submodular import (
    SET_TOL,
    SetFunction,
    f_jd_sumfronthaul,
    g_fronthaul,
    greedy_extreme_point,
    is_submodular,
    is_supermodular,
    polyhedron_slacks,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_CAP, EXIT_BUDGET = 0, 1, 2, 3, 4
UNIT = "bits_per_complex_dim"
CHECKS = ("theorem1", "theorem2", "lemma3", "lemma4", "greedy", "gap")
ORDER_LIMIT = 7


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ output

def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def _clean(obj):
    """Replace non-finite floats (not valid JSON) by strings, recursively."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def write_metadata(out: Path, args, extra=None) -> None:
    meta = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": list(getattr(args, "argv", [])),
    }
    meta.update(extra or {})
    write_json(out / "metadata.json", meta)


# ------------------------------------------------------------------- input

def parse_random(text: str):
    parts = text.split(",")
    if len(parts) != 6:
        raise UsageError(f"--random needs K,L,M,N,snr_db,seed, got {text!r}")
    try:
        K, L, M, N = (int(p) for p in parts[:4])
        snr, seed = float(parts[4]), int(parts[5])
    except ValueError:
        raise UsageError(f"--random: cannot parse {text!r}") from None
    if min(K, L, M, N) < 1:
        raise UsageError("--random: dimensions must be >= 1")
    return K, L, M, N, snr, seed


def parse_floats(text: str, what: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r}") from None
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise UsageError(f"{what}: values must be finite and >= 0, got {text!r}")
    return vals


def load_source(args) -> NetworkInstance:
    if args.instance:
        try:
            return load_instance(args.instance)
        except OSError as e:
            raise UsageError(f"cannot read instance file {args.instance}: {e.strerror}") from None
    K, L, M, N, snr, seed = parse_random(args.random)
    return random_instance(seed, K, L, M, N, snr)


def load_b(args, instance: NetworkInstance):
    choice = args.quantizer
    if choice == "appendixD":
        return background_quantizer(instance)
    if choice.startswith("file:"):
        path = choice[5:]
        try:
            return load_quantizer(path, instance)
        except OSError as e:
            raise UsageError(f"cannot read quantizer file {path}: {e.strerror}") from None
    raise UsageError(f"--quantizer must be 'appendixD' or 'file:<path>', got {choice!r}")


# ------------------------------------------------------------- eval-region

def _constraint_rows(cons):
    rows = [["kind", "T", "S", f"rhs_{UNIT}", f"raw_rhs_{UNIT}", "clamped"]]
    for c in cons:
        rows.append([c.kind, ss.fmt(c.T), ss.fmt(c.S), f"{c.rhs:.12g}", f"{c.raw:.12g}", int(c.clamped)])
    return rows


def cmd_eval_region(args, out: Path) -> int:
    inst = load_source(args)
    check_caps(inst)
    b = load_b(args, inst)
    K, L = inst.K, inst.L
    jd = jd_constraints(inst, b)
    write_csv(out / "jd_constraints.csv", _constraint_rows(jd))
    sd = sd_constraints(inst, b)
    write_csv(out / "sd_rate_constraints.csv", _constraint_rows(sd.rates))
    write_csv(out / "sd_fronthaul.csv",
              [["S", f"usage_{UNIT}", f"capacity_{UNIT}", "ok"]]
              + [[ss.fmt(f.S), f"{f.usage:.12g}", f"{f.capacity:.12g}", int(f.ok)] for f in sd.fronthaul])
    cut = cutset_constraints(inst)
    write_csv(out / "cutset_constraints.csv", _constraint_rows(cut))
    summary = {
        "K": K, "L": L, "M": inst.M, "N": inst.N, "units": UNIT,
        "quantizer": args.quantizer,
        "jd_sum_rate": jd_sum_rate_fixed_b(inst, b),
        "sd_sum_rate": sd.rates[-1].rhs if sd.feasible else 0.0,
        "sd_feasible": sd.feasible,
        "cutset_sum_bound": min(c.rhs for c in cut if c.T == ss.full(K)),
    }
    if K + L <= ORDER_LIMIT:
        jc = joint_covariance(inst, b, include_y=True)
        rows = [["order"] + [f"R{k + 1}_{UNIT}" for k in range(K)] + [f"C{l + 1}_{UNIT}" for l in range(L)]]
        best = 0.0
        for order in all_orders(K, L, ORDER_LIMIT):
            t = gsd_rates(inst, b, order, jc)
            rows.append([str(order)] + [f"{r:.12g}" for r in t.R] + [f"{c:.12g}" for c in t.C])
            if np.all(t.C <= inst.C + 1e-9):
                best = max(best, float(np.sum(t.R)))
        write_csv(out / "gsd_orders.csv", rows)
        summary["gsd_best_single_order_sum_rate"] = best
    else:
        summary["gsd_best_single_order_sum_rate"] = None
    if K == 2:
        pts = k2_boundary(jd)
        write_csv(out / "boundary_k2.csv", [[f"R1_{UNIT}", f"R2_{UNIT}"]]
                  + [[f"{p[0]:.12g}", f"{p[1]:.12g}"] for p in pts])
    write_json(out / "summary.json", summary)
    return EXIT_OK


# ---------------------------------------------------------------- optimize

def cmd_optimize(args, out: Path) -> int:
    inst = load_source(args)
    check_caps(inst)
    weights = parse_floats(args.weights, "--weights") if args.weights else None
    if weights is not None and len(weights) != inst.K:
        raise UsageError(f"--weights needs {inst.K} values, got {len(weights)}")
    nu = parse_floats(args.nu, "--nu") if args.nu else None
    if nu is not None and len(nu) != inst.L:
        raise UsageError(f"--nu needs {inst.L} values, got {len(nu)}")
    kind = args.objective
    if kind == "sd-sum-sumfronthaul" and args.sum_fronthaul is None:
        raise UsageError("sd-sum-sumfronthaul needs --sum-fronthaul")
    obj = Objective(kind, weights=weights, Csum=args.sum_fronthaul, nu=nu, gamma=args.gamma)
    res = solve(inst, obj, max_iters=args.max_iters, tol=args.tol, trace=args.trace)
    write_json(out / "result.json", res.to_dict())
    if args.trace:
        write_csv(out / "trace.csv", [["iteration", f"objective_{UNIT}", "step", "min_constraint"]]
                  + [list(r) for r in res.trace])
    print(f"{kind}: value {res.value:.9f} bits per complex dimension, "
          f"converged={res.converged}, iterations={res.iterations}")
    return EXIT_OK if res.converged else EXIT_BUDGET


# ------------------------------------------------------------------ verify

def campaign_instance(seed: int, index: int, max_dim: int = 3, snrs=(0.0, 10.0, 20.0)):
    """Instance ``index`` of a seeded campaign and its two quantizers (1/2 Sigma^{-1}, random)."""
    rng = np.random.default_rng([seed, index])
    K, L = (int(x) for x in rng.integers(1, max_dim + 1, size=2))
    M, N = (int(x) for x in rng.integers(1, 3, size=2))
    snr = float(snrs[index % len(snrs)])
    C = rng.uniform(0.5, 1.5, size=L) * N * math.log2(1 + 10 ** (snr / 10)) + 0.1
    inst = random_instance([seed, index, 1], K, L, M, N, snr, fronthaul=C)
    return inst, [("appendixD", background_quantizer(inst)), ("random", random_quantizer(inst, rng))]


def _modularity(res) -> dict:
    return {"holds": res.holds, "violation": res.violation,
            "witness": None if res.witness is None else [ss.fmt(m) for m in res.witness]}


def verify_instance(seed: int, index: int, max_dim: int, checks, tol: float,
                    plant_fault: bool = False) -> dict:
    """All requested checks on one campaign instance; plain data, deterministic."""
    inst, qs = campaign_instance(seed, index, max_dim)
    check_caps(inst)
    out = {"index": index, "dims": [inst.K, inst.L, inst.M, inst.N], "pairs": []}
    for qname, b in qs:
        tag = f"instance={index} quantizer={qname}"
        rec = {"tag": tag, "theorem1": [], "theorem2": [], "lemma3": [], "lemma4": [], "greedy": []}
        jc = joint_covariance(inst, b, include_y=True) if {"theorem1", "theorem2"} & set(checks) else None
        grid = csum_grid(inst, b)
        if "theorem2" in checks:
            for perm in itertools.permutations(range(inst.L)):
                rec["theorem2"].append((f"{tag} ordering={[p + 1 for p in perm]}",
                                        theorem2_certificate(inst, b, perm, jc)))
        if "theorem1" in checks:
            for Csum in grid:
                for perm in itertools.permutations(range(inst.K)):
                    rec["theorem1"].append((f"{tag} Csum={Csum:.6f} ordering={[p + 1 for p in perm]}",
                                            theorem1_certificate(inst, b, Csum, perm, jc)))
        fs = []
        for Csum in grid:
            f = f_jd_sumfronthaul(inst, b, Csum)
            if plant_fault:
                f = SetFunction(f.n, lambda T, f=f: f(T) + ss.popcount(T) ** 2)
            fs.append((Csum, f))
        if "lemma3" in checks:
            for Csum, f in fs:
                rec["lemma3"].append((f"{tag} Csum={Csum:.6f}", _modularity(is_submodular(f, SET_TOL))))
        g = gp = None
        if "lemma4" in checks or "greedy" in checks:
            g, gp = g_fronthaul(inst, b, jd_sum_rate_fixed_b(inst, b))
        if "lemma4" in checks:
            rec["lemma4"].append((f"{tag} g", _modularity(is_supermodular(g, SET_TOL))))
            rec["lemma4"].append((f"{tag} g+", _modularity(is_supermodular(gp, SET_TOL))))
        if "greedy" in checks:
            for Csum, f in fs:
                if f.n <= 4:
                    for perm in itertools.permutations(range(f.n)):
                        rec["greedy"].append(_greedy_check(f"{tag} f Csum={Csum:.6f}", f, perm, True))
            if gp.n <= 4:
                for perm in itertools.permutations(range(gp.n)):
                    rec["greedy"].append(_greedy_check(f"{tag} g+", gp, perm, False))
        out["pairs"].append(rec)
    if "gap" in checks:
        rng = np.random.default_rng([seed, index, 2])
        Csum = float(rng.uniform(0.0, 2.0) * inst.N * inst.L * 2)
        out["gap"] = [(f"instance={index}", c) for c in (
            jd_gap_certificate(inst), sd_sum_gap_certificate(inst),
            gsd_sumfronthaul_gap_certificate(inst, Csum))]
    return out


def _greedy_check(tag, f, perm, upper) -> tuple:
    v = greedy_extreme_point(f, perm)
    chk = polyhedron_slacks(f, v, perm, upper=upper)
    ok = chk.min_slack >= -1e-9 and chk.tight == f.n
    return (f"{tag} ordering={[p + 1 for p in perm]}",
            {"ok": ok, "min_slack": chk.min_slack, "tight": chk.tight, "n": f.n})


class _SimpleTally:
    def __init__(self, name):
        self.name, self.checks, self.violations, self.worst, self.first = name, 0, 0, 0.0, None

    def add(self, tag, rec, ok, magnitude):
        self.checks += 1
        if not ok:
            self.violations += 1
            if magnitude >= self.worst:
                self.worst = magnitude
            if self.first is None:
                self.first = {"run": tag, **rec}

    def to_dict(self):
        return {"check": self.name, "runs": self.checks, "violations": self.violations,
                "worst_violation": self.worst, "first_violation": self.first}


def assemble_report(results, tol: float) -> dict:
    t1, t2 = CampaignReport("theorem1"), CampaignReport("theorem2")
    l3, l4, gr = _SimpleTally("lemma3"), _SimpleTally("lemma4"), _SimpleTally("greedy")
    gap = {"jd": _SimpleTally("gap-jd"), "sd-sum": _SimpleTally("gap-sd-sum"),
           "gsd-sumfronthaul": _SimpleTally("gap-gsd-sumfronthaul")}
    worst_ratio = {k: 0.0 for k in gap}
    for r in results:
        for p in r["pairs"]:
            for tag, cert in p["theorem1"]:
                t1.add(cert, tag, tol)
            for tag, cert in p["theorem2"]:
                t2.add(cert, tag, tol)
            for tag, rec in p["lemma3"]:
                l3.add(tag, rec, rec["holds"], rec["violation"])
            for tag, rec in p["lemma4"]:
                l4.add(tag, rec, rec["holds"], rec["violation"])
            for tag, rec in p["greedy"]:
                gr.add(tag, rec, rec["ok"], max(-rec["min_slack"], 0.0))
        for tag, cert in r.get("gap", []):
            gap[cert.kind].add(tag, cert.to_dict(), cert.passed, cert.worst)
            worst_ratio[cert.kind] = max(worst_ratio[cert.kind], cert.worst / cert.eta)
    gap_d = {k: {**v.to_dict(), "worst_gap_over_eta": worst_ratio[k]} for k, v in gap.items()}
    total = (t1.violations + t2.violations + l3.violations + l4.violations + gr.violations
             + sum(v.violations for v in gap.values()))
    return {
        "instances": len(results),
        "theorem1": t1.to_dict(),
        "theorem2": t2.to_dict(),
        "lemma3": l3.to_dict(),
        "lemma4": l4.to_dict(),
        "greedy": gr.to_dict(),
        "gap": gap_d,
        "total_violations": total,
    }


def run_campaign(count: int, seed: int, max_dim: int = 3, checks=CHECKS, tol: float = CERT_TOL,
                 workers: int = 1, plant_fault: bool = False) -> dict:
    if max_dim > ENUM_CAP:
        raise EnumerationCapExceeded(f"--max-dim {max_dim} exceeds the enumeration cap {ENUM_CAP}")

    def job(i):
        return verify_instance(seed, i, max_dim, checks, tol, plant_fault)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(job, range(count)))
    else:
        results = [job(i) for i in range(count)]
    rep = assemble_report(results, tol)
    rep["config"] = {"count": count, "seed": seed, "max_dim": max_dim, "checks": list(checks),
                     "tol": tol, "planted_fault": plant_fault, "units": UNIT}
    return rep


def cmd_verify(args, out: Path) -> int:
    checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise UsageError(f"unknown checks {bad}; choose from {list(CHECKS)}")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    rep = run_campaign(args.count, args.seed, args.max_dim, checks, args.tol, args.workers,
                       args.plant_fault)
    write_json(out / "report.json", rep)
    certs = out / "certificates"
    certs.mkdir(exist_ok=True)
    for name in ("theorem1", "theorem2"):
        write_json(certs / f"{name}_worst.json", rep[name]["worst"])
    for name in ("lemma3", "lemma4", "greedy"):
        write_json(certs / f"{name}_first_violation.json", rep[name]["first_violation"])
    for name, g in rep["gap"].items():
        write_json(certs / f"gap_{name}_first_violation.json", g["first_violation"])
    for name in ("theorem1", "theorem2", "lemma3", "lemma4", "greedy"):
        r = rep[name]
        print(f"{name}: {r['runs']} runs, {r['violations']} violations")
    for name, g in rep["gap"].items():
        print(f"gap {name}: {g['runs']} runs, {g['violations']} violations, "
              f"worst gap / eta {g['worst_gap_over_eta']:.4f}")
    return EXIT_OK if rep["total_violations"] == 0 else EXIT_VIOLATION


# --------------------------------------------------------------- gap-check

def cmd_gap_check(args, out: Path) -> int:
    inst = load_source(args)
    check_caps(inst)
    certs = [jd_gap_certificate(inst), sd_sum_gap_certificate(inst)]
    if args.sum_fronthaul is not None:
        certs.append(gsd_sumfronthaul_gap_certificate(inst, args.sum_fronthaul))
    write_json(out / "gap_certificates.json", {"units": UNIT, "certificates": [c.to_dict() for c in certs]})
    rows = [["certificate"] + certs[0].csv_rows()[0]]
    for c in certs:
        rows += [[c.kind] + r for r in c.csv_rows()[1:]]
    write_csv(out / "gap_cuts.csv", rows)
    for c in certs:
        print(f"{c.kind}: worst gap {c.worst:.6f} <= eta {c.eta:g}: {'pass' if c.passed else 'FAIL'}")
    return EXIT_OK if all(c.passed for c in certs) else EXIT_VIOLATION


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cranfront", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, source=True):
        if source:
            g = sp.add_mutually_exclusive_group(required=True)
            g.add_argument("--instance", help="instance JSON file")
            g.add_argument("--random", metavar="K,L,M,N,SNR_DB,SEED", help="random instance")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("eval-region", help="constraint tables of the JD/SD/GSD/cut-set regions")
    common(sp)
    sp.add_argument("--quantizer", default="appendixD", help="appendixD (B = 1/2 Sigma^-1) or file:<path>")

    sp = sub.add_parser("optimize", help="optimize the quantizers for one objective")
    common(sp)
    sp.add_argument("--objective", choices=OBJECTIVES, default="sd-sum")
    sp.add_argument("--weights", help="comma-separated user weights")
    sp.add_argument("--nu", help="comma-separated fronthaul prices (tradeoff objective)")
    sp.add_argument("--gamma", type=float, default=0.0)
    sp.add_argument("--sum-fronthaul", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=20000)
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("verify", help="randomized campaign over the equivalence and gap results")
    common(sp, source=False)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-dim", type=int, default=3, help="K and L drawn from 1..max-dim")
    sp.add_argument("--checks", default=",".join(CHECKS))
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--plant-fault", action="store_true", help=argparse.SUPPRESS)

    sp = sub.add_parser("gap-check", help="constant-gap certificates at B = 1/2 Sigma^-1")
    common(sp)
    sp.add_argument("--sum-fronthaul", type=float, default=None)
    return p


COMMANDS = {"eval-region": cmd_eval_region, "optimize": cmd_optimize,
            "verify": cmd_verify, "gap-check": cmd_gap_check}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    args.argv = argv
    default_tol = {"optimize": 1e-9, "verify": CERT_TOL}
    if args.tol is None:
        args.tol = default_tol.get(args.command, 1e-9)
    try:
        if not (args.tol > 0):
            raise UsageError("--tol must be > 0")
        if getattr(args, "max_iters", 1) < 1:
            raise UsageError("--max-iters must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args, out)
        write_metadata(out, args, {"exit_code": code})
        return code
    except EnumerationCapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, InstanceError, InvalidQuantizer, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

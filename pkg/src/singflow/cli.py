"""Command line interface.

Subcommands: build (partition artifacts), verify (named inequality
suites), entropy (measure + bound ledgers), list-fields.  Every command is
a pure function of the config file: identical inputs give byte-identical
outputs (floats printed with 17 significant digits).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import suites
from .config import Experiment, build_experiment, dump_json, fmt, load_config
from .entropy import EntropyReport, block_entropy_rate_mapped
from .errors import InsufficientData, SingflowError
from .section import fill_exit_times, sample_layer
from .singularity import profile_to_json

CSV_DOC = """CSV column conventions:
  layers.csv:   sigma_id, layer, coord_0..coord_{d-1}, t_minus, t_plus, speed
  series.csv:   name, index, value  (per-N and per-k report series)
Floats are written with 17 significant digits for bit-exact round trips."""


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _emit_layer_geometry(exp: Experiment, out_dir: str,
                         points_per_layer: int = 40):
    rows = []
    for sid, (prof, rp) in enumerate(zip(exp.profiles, exp.refined)):
        for n in sorted(rp.layers):
            s = sample_layer(prof, n, points_per_layer,
                             rng_seed=int(exp.config["rng_seed"]) + n)
            try:
                fill_exit_times(exp.spec, prof, s)
                tm, tp = s.exit_minus, s.exit_plus
            except SingflowError:
                tm = tp = np.full(len(s.points), np.nan)
            for i, x in enumerate(s.points):
                speed = float(np.linalg.norm(exp.spec.eval(x)))
                rows.append([sid, n, *x.tolist(), tm[i], tp[i], speed])
    d = exp.spec.dim
    header = (["sigma_id", "layer"] + [f"coord_{i}" for i in range(d)]
              + ["t_minus", "t_plus", "speed"])
    _write_csv(os.path.join(out_dir, "layers.csv"), header, rows)


def cmd_build(args) -> int:
    doc = load_config(args.config)
    out_dir = args.out or doc.get("out_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    exp = build_experiment(doc)
    for sid, prof in enumerate(exp.profiles):
        with open(os.path.join(out_dir, f"profile_{sid}.json"), "w") as fh:
            fh.write(profile_to_json(prof))
    dump_json(exp.gp.metadata(), os.path.join(out_dir, "partition.json"))
    _emit_layer_geometry(exp, out_dir)
    print(f"build: wrote profiles, partition.json, layers.csv to {out_dir}")
    return 0


_SUITES = {
    "speeds": lambda exp, th: suites.suite_speeds(exp),
    "exit-times": lambda exp, th: suites.suite_exit_times(exp),
    "crossings": lambda exp, th: suites.suite_crossings(
        exp, n_orbits=int(exp.config.get("measure", {})
                          .get("orbit_count", 16)) * 4),
    "tower-sums": lambda exp, th: suites.suite_tower_sums(exp, threads=th),
    "entropy-bounds": lambda exp, th: suites.suite_entropy_bounds(
        exp, threads=th),
    "tubes": lambda exp, th: suites.suite_tubes(
        exp, pair_count=200, control_count=60),
    "truncation-gap": lambda exp, th: suites.suite_truncation_gap(
        exp, measure=suites.default_measure(exp, th, k_max=4), threads=th),
    "mane": lambda exp, th: suites.suite_mane(),
    "shadowed": lambda exp, th: suites.suite_shadowed(),
}


def cmd_verify(args) -> int:
    doc = load_config(args.config)
    if args.suite not in _SUITES:
        print(f"verify: unknown suite {args.suite!r}; choose from "
              f"{', '.join(suites.SUITE_NAMES)}", file=sys.stderr)
        return 2
    out_dir = args.out or doc.get("out_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    needs_build = args.suite not in ("mane", "shadowed")
    exp = build_experiment(doc) if needs_build else None
    report = _SUITES[args.suite](exp, args.threads)
    path = os.path.join(out_dir, f"verify_{args.suite}.json")
    dump_json(report, path)
    status = "PASS" if report.get("pass") else "FAIL"
    print(f"verify {args.suite}: {status} ({path})")
    return 0 if report.get("pass") else 1


def cmd_entropy(args) -> int:
    doc = load_config(args.config)
    out_dir = args.out or doc.get("out_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    exp = build_experiment(doc)
    k_max = int(doc.get("measure", {}).get("k_max", 4))
    measure = suites.default_measure(exp, args.threads, k_max=max(2, k_max))

    rep = EntropyReport()
    rep.constants = {"rng_seed": doc["rng_seed"],
                     "orbits": measure.source.get("orbits"),
                     "horizon": measure.source.get("horizon")}
    bounds = {}
    tower = suites.suite_tower_sums(exp, measure=measure)
    bounds["tower_sums"] = tower
    eb = suites.suite_entropy_bounds(exp, measure=measure)
    bounds["entropy_bounds"] = eb
    if eb["empirical"]:
        rep.H_C = eb["empirical"][0]["H_C"]
        rep.H_A = eb["empirical"][0]["H_A"]
    tg = suites.suite_truncation_gap(exp, measure=measure)
    bounds["truncation_gap"] = tg
    try:
        rate = block_entropy_rate_mapped(measure.block_weights)
        rep.h_rate = rate["h"]
        bounds["block_rate"] = rate
    except InsufficientData as exc:
        bounds["block_rate"] = {"error": str(exc), "pass": True}
    rep.bounds = bounds

    dump_json({"H_C": rep.H_C, "H_A": rep.H_A, "h_rate": rep.h_rate,
               "bounds": rep.bounds, "constants": rep.constants,
               "pass": rep.passed()},
              os.path.join(out_dir, "entropy_report.json"))

    series_rows = []
    for i, sub in enumerate(tg.get("empirical", tg["synthetic"])):
        series_rows.append(["truncation_gap", sub["N"], sub["H_cond"]])
        series_rows.append(["truncation_bound", sub["N"], sub["bound"]])
    _write_csv(os.path.join(out_dir, "series.csv"),
               ["name", "index", "value"], series_rows)
    status = "PASS" if rep.passed() else "FAIL"
    print(f"entropy: {status} ({out_dir}/entropy_report.json)")
    return 0 if rep.passed() else 1


def cmd_list_fields(args) -> int:
    print("built-in vector fields:")
    print("  linear_saddle     params: lambda_u, lambda_s "
          "(per-axis rates, unstable axes first)")
    print("  lorenz            params: sigma, rho, b "
          "(singularities at the origin and C+-)")
    print("  perturbed_linear  params: matrix A, amp "
          "(X = A x + amp * quadratic, origin kept fixed)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="singflow",
        description="Cross sections, countable partitions and entropy "
                    "bounds for flows with hyperbolic singularities.",
        epilog=CSV_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_suite=False):
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel orbit workers")
        if needs_suite:
            p.add_argument("--suite", required=True,
                           help=f"one of: {', '.join(suites.SUITE_NAMES)}")

    add_common(sub.add_parser("build", help="write partition artifacts"))
    add_common(sub.add_parser("verify", help="run one inequality suite"),
               needs_suite=True)
    add_common(sub.add_parser("entropy", help="measures and bound ledgers"))
    sub.add_parser("list-fields", help="describe the built-in fields")

    args = parser.parse_args(argv)
    try:
        if args.command == "build":
            return cmd_build(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "entropy":
            return cmd_entropy(args)
        return cmd_list_fields(args)
    except SingflowError as exc:
        print(f"{args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line interface.

Subcommands: `gen` (plant + sample), `recover` (end-to-end recovery),
`oracle` (plug-the-oracle), `bench` (success-vs-m sweep, CSV), `decode`
(decode serialized occ / statistic tables), `betas` (moment-coefficient
dump).  All outputs are deterministic for a fixed seed; reports omit timing
for that reason.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import MixrecError
from .moment_mixtures import MomentFamily, beta_table
from .pipeline import RunConfig, exact_recovery, maximal_recovery, plug_the_oracle
from .regression_mixtures import GeneralUnionConfig, LearnConfig
from .supports import OccTable, SubsetStatTable, intersection_table_from_unions, \
    occ_table_from_intersections, recover_maximal, recover_supports
from .synth import PlantConfig, PlantedInstance, plant, sample_model


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("md", "mlr", "mlc"))
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--family", choices=("gaussian", "poisson", "uniform"))
    p.add_argument("--upper", type=float, help="upper bound for the uniform family")
    p.add_argument("--binary", action="store_true", default=None)
    p.add_argument("--sign-regime", choices=("nonneg", "nonpos"), dest="sign_regime")
    p.add_argument("--Delta", type=float, help="minimum norm gap")
    p.add_argument("--seed", type=int)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, help="sample count")
    p.add_argument("--gamma", type=float, help="failure budget")
    p.add_argument(
        "--alpha-schedule",
        dest="alpha_schedule",
        help="nonneg | gaussian | explicit:<v1,v2,...> (MLR maximal thresholds)",
    )
    p.add_argument("--a-override", dest="a_override", type=float,
                   help="override the MLC conditioning threshold")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _build_instance(cfg: dict, args) -> PlantedInstance:
    if args_file := cfg.get("instance_file"):
        return PlantedInstance.from_json(Path(args_file).read_text())
    spec = dict(cfg.get("instance", {}))
    for key in ("model", "n", "k", "ell", "delta", "R", "sigma", "family", "upper",
                "binary", "sign_regime", "Delta", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            spec[key] = value
    if "norms" in spec and spec["norms"] is not None:
        spec["norms"] = tuple(spec["norms"])
    required = {"n", "k", "ell"}
    missing = required - spec.keys()
    if missing:
        raise MixrecError(f"instance underspecified: missing {sorted(missing)}")
    return plant(PlantConfig(**spec))


def _build_run_config(cfg: dict, args) -> RunConfig:
    run = dict(cfg.get("run", {}))
    if getattr(args, "m", None) is not None:
        run["m"] = args.m
    if getattr(args, "gamma", None) is not None:
        run["gamma"] = args.gamma
    if getattr(args, "seed", None) is not None:
        run["seed"] = args.seed
    if getattr(args, "a_override", None) is not None:
        run["a_override"] = args.a_override
    schedule = getattr(args, "alpha_schedule", None)
    if schedule:
        if schedule.startswith("explicit:"):
            run["alpha_kind"] = "explicit"
            run["alpha_values"] = tuple(float(v) for v in schedule.split(":", 1)[1].split(","))
        else:
            run["alpha_kind"] = schedule
    if "general" in run and isinstance(run["general"], dict):
        general = dict(run["general"])
        learn = general.pop("learn", None)
        if isinstance(learn, dict):
            general["learn"] = LearnConfig(**learn)
        run["general"] = GeneralUnionConfig(**general)
    if "alpha_values" in run and run["alpha_values"] is not None:
        run["alpha_values"] = tuple(run["alpha_values"])
    return RunConfig(**run)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n")


def cmd_gen(args) -> int:
    instance = _build_instance(_load_config(args.config), args)
    if args.out_instance:
        _write(args.out_instance, instance.to_json())
    if args.out_samples:
        m = args.m or 10_000
        batch = sample_model(instance, m, args.seed if args.seed is not None else instance.seed)
        if args.format == "npz":
            arrays = {"x": batch.x, "components": batch.components}
            if hasattr(batch, "y"):
                arrays["y"] = batch.y
            np.savez_compressed(args.out_samples, **arrays)
        else:
            with open(args.out_samples, "w", newline="") as fh:
                writer = csv.writer(fh)
                header = [f"x{i}" for i in range(1, instance.n + 1)]
                if hasattr(batch, "y"):
                    header.append("y")
                header.append("component")
                writer.writerow(header)
                for row_index in range(batch.x.shape[0]):
                    row = [repr(float(v)) for v in batch.x[row_index]]
                    if hasattr(batch, "y"):
                        row.append(repr(float(batch.y[row_index])))
                    row.append(int(batch.components[row_index]))
                    writer.writerow(row)
    return 0


def cmd_recover(args) -> int:
    cfg = _load_config(args.config)
    instance = _build_instance(cfg, args)
    run_cfg = _build_run_config(cfg, args)
    runner = exact_recovery if args.mode == "exact" else maximal_recovery
    report = runner(instance, run_cfg)
    _write(args.out, report.to_json())
    status = {True: "exact_match", False: "MISMATCH", None: "no-truth"}[report.exact_match]
    print(f"recover {args.mode} {instance.model}: {status}", file=sys.stderr)
    return 0 if report.exact_match else 1


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    instance = _build_instance(cfg, args)
    report = plug_the_oracle(instance, mode=args.mode, stat_kind=args.stat_kind)
    _write(args.out, report.to_json())
    return 0 if report.exact_match else 1


def cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    instance = _build_instance(cfg, args)
    run_cfg = _build_run_config(cfg, args)
    m_grid = [int(float(v)) for v in args.m_grid.split(",")]
    runner = exact_recovery if args.mode == "exact" else maximal_recovery
    rows = []
    for m in m_grid:
        successes = 0
        for s in range(args.seeds):
            trial_cfg = replace(run_cfg, m=m, seed=run_cfg.seed + s)
            report = runner(instance, trial_cfg)
            successes += bool(report.exact_match)
        rows.append((m, args.seeds, successes, successes / args.seeds))
    lines = ["m,seeds,successes,success_rate"]
    lines += [f"{m},{s},{ok},{rate:.4f}" for m, s, ok, rate in rows]
    _write(args.out, "\n".join(lines))
    return 0


def cmd_decode(args) -> int:
    ell = args.ell
    if not args.occ and not args.table:
        raise MixrecError("decode needs --occ or --table")
    if args.occ:
        occ = OccTable.from_json(Path(args.occ).read_text())
        supports = recover_supports(occ, ell if ell else occ.ell)
        _write(args.out, supports.to_json())
        return 0
    table = SubsetStatTable.from_json(Path(args.table).read_text())
    ell = ell if ell else table.ell
    if table.kind == "membership-indicator":
        sets = recover_maximal(table, ell)
        _write(args.out, json.dumps({"maximal": sorted(sorted(s) for s in sets)}))
        return 0
    if table.kind == "union-count":
        table = intersection_table_from_unions(table)
    universe = table.universe()
    import math

    p = int(math.floor(math.log2(ell))) if ell >= 1 else 0
    cap = min(p + 1, len(universe))
    occ = occ_table_from_intersections(table, universe, range(0, cap + 1), ell)
    supports = recover_supports(occ, ell, p=p)
    _write(args.out, supports.to_json())
    return 0


def cmd_betas(args) -> int:
    family = MomentFamily(
        name=args.family,
        sigma=args.sigma if args.sigma is not None else 1.0,
        upper=args.upper if args.upper is not None else 1.0,
    )
    _write(args.out, json.dumps(beta_table(family, args.t_max)))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mixrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="plant an instance and stream samples")
    _add_instance_flags(g)
    g.add_argument("--config", help="JSON config with an 'instance' section")
    g.add_argument("--m", type=int, help="samples to draw")
    g.add_argument("--out-instance", help="instance JSON path")
    g.add_argument("--out-samples", help="sample batch path")
    g.add_argument("--format", choices=("npz", "csv"), default="npz")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("recover", help="run end-to-end support recovery")
    _add_instance_flags(r)
    _add_run_flags(r)
    r.add_argument("--mode", choices=("exact", "maximal"), default="exact")
    r.add_argument("--config", help="JSON config with 'instance' and 'run' sections")
    r.add_argument("--out", default="-", help="report JSON path ('-' = stdout)")
    r.set_defaults(func=cmd_recover)

    o = sub.add_parser("oracle", help="plug-the-oracle run (combinatorics only)")
    _add_instance_flags(o)
    o.add_argument("--mode", choices=("exact", "maximal"), default="exact")
    o.add_argument("--stat-kind", choices=("intersection", "union"), default="intersection")
    o.add_argument("--config")
    o.add_argument("--out", default="-")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="success-vs-m sweep, CSV output")
    _add_instance_flags(b)
    _add_run_flags(b)
    b.add_argument("--mode", choices=("exact", "maximal"), default="exact")
    b.add_argument("--config")
    b.add_argument("--m-grid", required=True, help="comma-separated sample counts")
    b.add_argument("--seeds", type=int, default=20)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("decode", help="decode serialized occ / statistic tables")
    d.add_argument("--occ", help="OccTable JSON")
    d.add_argument("--table", help="SubsetStatTable JSON")
    d.add_argument("--ell", type=int, help="number of hidden vectors (default: table's)")
    d.add_argument("--out", default="-")
    d.set_defaults(func=cmd_decode)

    t = sub.add_parser("betas", help="dump moment-polynomial coefficients as JSON")
    t.add_argument("--family", choices=("gaussian", "poisson", "uniform"), required=True)
    t.add_argument("--sigma", type=float)
    t.add_argument("--upper", type=float)
    t.add_argument("--t-max", type=int, default=8)
    t.add_argument("--out", default="-")
    t.set_defaults(func=cmd_betas)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MixrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: run, sweep, xi-dataset, serve-env, compare.

Every run is reproducible byte-for-byte from (config, seed, mode); floats
are written with shortest round-trip repr.
"""

import argparse
import csv
import json
import socket
import sys
from pathlib import Path

import numpy as np

from . import env_bridge, orchestrator, overhead, precoder, scenario
from .errors import CfmimoError, ConfigError, InvariantViolationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

SWEEP_TAIL_FRACTION = 0.5


def _fmt(x) -> str:
    return repr(float(x))


def metrics_header(K: int, L: int) -> list:
    cols = ["t", "n"]
    cols += [f"rate_{k}" for k in range(K)]
    cols += ["aggregate", "min_rate"]
    cols += [f"mu_{k}" for k in range(K)]
    cols += [f"power_{l}" for l in range(L)]
    cols += ["e2_up", "e2_down", "d2", "ofh"]
    return cols


def write_metrics_csv(path, sim: orchestrator.Simulation) -> None:
    sc = sim.sc
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(metrics_header(sc.K, sc.L))
        for row in sim.rows:
            out = [str(row.t), str(row.n)]
            out += [_fmt(r) for r in row.rates]
            out += [_fmt(row.aggregate), _fmt(row.min_rate)]
            out += [_fmt(m) for m in row.mu]
            out += [_fmt(p) for p in row.power]
            out += [_fmt(row.e2_up), _fmt(row.e2_down), _fmt(row.d2), _fmt(row.ofh)]
            writer.writerow(out)


def write_experience(path, sim: orchestrator.Simulation) -> None:
    with open(path, "w") as fh:
        for tr in sim.transitions:
            fh.write(
                json.dumps(
                    {
                        "n": tr.n,
                        "k": tr.k,
                        "obs": tr.obs,
                        "act": tr.act,
                        "reward": tr.reward,
                        "next_obs": tr.next_obs,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def _load_schedule(path):
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ConfigError("rmin schedule must be a JSON list")
    out = []
    for entry in doc:
        try:
            out.append({"t": int(entry["t"]), "k": int(entry["k"]), "r_min": float(entry["r_min"])})
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad schedule entry {entry!r}: {exc}") from exc
    return out


def run_simulation(sc, args) -> orchestrator.Simulation:
    schedule = _load_schedule(args.rmin_schedule) if args.rmin_schedule else None
    sim = orchestrator.Simulation(
        sc,
        mode=args.mode,
        v_update=args.v_update,
        xi_model_file=args.xi_model,
        rmin_schedule=schedule,
        parallel_odu=args.parallel_odu,
    )
    if args.episodes is not None:
        for _ in range(args.episodes):
            sim.run_episode()
    else:
        sim.run(args.rt_loops)
    return sim


def cmd_run(args) -> int:
    sc = scenario.load(args.config)
    if args.seed is not None:
        sc = sc.with_updates(seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    sim = run_simulation(sc, args)
    write_metrics_csv(outdir / "metrics.csv", sim)
    rt_loops = len(sim.rows)
    report = overhead.overhead_report(sim.ledger, args.mode, sim.counts, rt_loops, sc.N_RT)
    (outdir / "overhead.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    scenario.save_normalized(sc, outdir / "scenario.normalized.json")
    if args.experience:
        write_experience(outdir / args.experience, sim)
    return EXIT_OK


def _sweep_variant(base_doc: dict, param: str, value):
    doc = dict(base_doc)
    if param == "K":
        for name in ("R_min", "v", "delta"):
            doc[name] = doc[name][0]
        doc["K"] = int(value)
        doc["I_card"] = min(doc["I_card"], int(value))
    elif param in ("L", "Nt", "I_card"):
        doc[param] = int(value)
        if param == "Nt":
            doc["Ns"] = min(int(value), int(doc["Nr"]))
        if param == "L":
            doc["L_ue"] = min(doc["L_ue"], int(value))
    elif param == "rho2":
        doc["rho2"] = float(value)
    else:
        raise ConfigError(f"unsupported sweep parameter {param!r}")
    return scenario.from_dict(doc)


def tail_mean_aggregate(sim: orchestrator.Simulation) -> float:
    rows = sim.rows
    start = int(len(rows) * (1.0 - SWEEP_TAIL_FRACTION))
    return float(np.mean([r.aggregate for r in rows[start:]]))


def cmd_sweep(args) -> int:
    base = scenario.load(args.config)
    if args.seed is not None:
        base = base.with_updates(seed=args.seed)
    values = [v for v in args.values.split(",") if v != ""]
    if not values:
        raise ConfigError("sweep needs a non-empty values list")
    modes = [m for m in args.modes.split(",") if m != ""]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    base_doc = scenario.to_normalized_dict(base)
    rows = []
    for raw in values:
        value = float(raw) if args.param == "rho2" else int(raw)
        sc = _sweep_variant(base_doc, args.param, value)
        for mode in modes:
            sim = orchestrator.Simulation(sc, mode=mode, v_update=args.v_update)
            sim.run(args.rt_loops)
            report = overhead.overhead_report(
                sim.ledger, mode, sim.counts, len(sim.rows), sc.N_RT
            )
            rows.append(
                {
                    "param": args.param,
                    "value": raw,
                    "mode": mode,
                    "mean_tail_aggregate": tail_mean_aggregate(sim),
                    "e2_total": sim.ledger.e2_up + sim.ledger.e2_down,
                    "reduction_vs_crzf_pct": report["reduction_vs_crzf_pct"],
                }
            )
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["param", "value", "mode", "mean_tail_aggregate", "e2_total", "reduction_vs_crzf_pct"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["param"],
                    r["value"],
                    r["mode"],
                    _fmt(r["mean_tail_aggregate"]),
                    _fmt(r["e2_total"]),
                    _fmt(r["reduction_vs_crzf_pct"]),
                ]
            )
    meta = {
        "tail_fraction": SWEEP_TAIL_FRACTION,
        "rt_loops": args.rt_loops,
        "base_config": str(args.config),
        "seed": base.seed,
    }
    (outdir / "sweep.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_xi_dataset(args) -> int:
    rows = precoder.xi_dataset_gen(args.count, args.nt, args.seed)
    precoder.write_xi_dataset(args.out, rows, args.nt)
    return EXIT_OK


def cmd_serve_env(args) -> int:
    sc = scenario.load(args.config)
    if args.stdio:
        env_bridge.serve(sc, sys.stdin, sys.stdout, experience_path=args.experience)
        return EXIT_OK
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind(("127.0.0.1", args.port))
    srv.listen(1)
    conn, _ = srv.accept()
    with conn:
        rfile = conn.makefile("r", encoding="utf-8")
        wfile = conn.makefile("w", encoding="utf-8")
        env_bridge.serve(sc, rfile, wfile, experience_path=args.experience)
    srv.close()
    return EXIT_OK


def cmd_compare(args) -> int:
    def read(path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            return header, list(reader)

    header_a, rows_a = read(args.a)
    header_b, rows_b = read(args.b)
    shared = [c for c in header_a if c in header_b and c != "t"]
    idx_a = {c: header_a.index(c) for c in shared}
    idx_b = {c: header_b.index(c) for c in shared}
    ta = header_a.index("t")
    tb = header_b.index("t")
    n = min(len(rows_a), len(rows_b))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"delta_{c}" for c in shared])
        for i in range(n):
            if rows_a[i][ta] != rows_b[i][tb]:
                raise ConfigError(f"t mismatch at row {i}: {rows_a[i][ta]} vs {rows_b[i][tb]}")
            out = [rows_a[i][ta]]
            for c in shared:
                out.append(_fmt(float(rows_b[i][idx_b[c]]) - float(rows_a[i][idx_a[c]])))
            writer.writerow(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfmimo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and emit metrics")
    p_run.add_argument("--config", required=True)
    p_run.add_argument(
        "--mode", required=True, choices=["expert", "agent", "crzf", "drzf", "drl-wmmse"]
    )
    group = p_run.add_mutually_exclusive_group(required=True)
    group.add_argument("--rt-loops", type=int)
    group.add_argument("--episodes", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--v-update", dest="v_update", choices=["full", "scalable"], default="scalable")
    p_run.add_argument("--xi-model", dest="xi_model")
    p_run.add_argument("--rmin-schedule", dest="rmin_schedule")
    p_run.add_argument("--experience")
    p_run.add_argument("--parallel-odu", dest="parallel_odu", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--param", required=True, choices=["K", "L", "Nt", "rho2", "I_card"])
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--modes", default="expert")
    p_sweep.add_argument("--rt-loops", type=int, default=200)
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--v-update", dest="v_update", choices=["full", "scalable"], default="scalable")
    p_sweep.set_defaults(func=cmd_sweep)

    p_xi = sub.add_parser("xi-dataset", help="generate the xi training table")
    p_xi.add_argument("--count", type=int, required=True)
    p_xi.add_argument("--nt", type=int, required=True)
    p_xi.add_argument("--seed", type=int, default=0)
    p_xi.add_argument("--out", required=True)
    p_xi.set_defaults(func=cmd_xi_dataset)

    p_srv = sub.add_parser("serve-env", help="serve the environment bridge")
    p_srv.add_argument("--config", required=True)
    group = p_srv.add_mutually_exclusive_group(required=True)
    group.add_argument("--stdio", action="store_true")
    group.add_argument("--port", type=int)
    p_srv.add_argument("--experience")
    p_srv.set_defaults(func=cmd_serve_env)

    p_cmp = sub.add_parser("compare", help="join two metrics.csv files and emit deltas")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--out", required=True)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolationError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except CfmimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

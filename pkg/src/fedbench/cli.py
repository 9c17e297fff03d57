"""Command line entry point: ``fedbench {baseline,run,sweep,serve,client}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .config import ExperimentConfig, load_config
from .report import emit_report, fmt


def _load(args) -> tuple[ExperimentConfig, dict]:
    if args.config:
        cfg, axes = load_config(args.config)
    else:
        cfg, axes = ExperimentConfig(), {}
    if args.set:
        cfg = cfg.with_overrides(args.set)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg, axes


def cmd_baseline(args) -> int:
    cfg, _ = _load(args)
    rep = harness.run_baseline(cfg)
    print(f"{cfg.cv_folds}-fold centralized AUC {fmt(rep.auc)}  accuracy {fmt(rep.accuracy)}")
    return 0


def cmd_run(args) -> int:
    cfg, _ = _load(args)
    records = harness.run_experiment(cfg)
    paths = emit_report(records, args.out)
    print(paths["summary"].read_text(), end="")
    return 0 if all(r.row_type in ("run", "summary") for r in records) else 1


def cmd_sweep(args) -> int:
    cfg, axes = _load(args)
    if args.standard_grid:
        axes = {**harness.STANDARD_AXES, **axes}
    if not axes:
        print("no sweep axes: add a [sweep] section or --standard-grid", file=sys.stderr)
        return 2
    if args.parallel:
        print("note: cells run in parallel; wall-time columns are not comparable",
              file=sys.stderr)
    res = harness.run_sweep(cfg, axes, parallel=args.parallel)
    paths = emit_report(res.records, args.out, res.marginals)
    if args.parallel:
        with paths["summary"].open("a", encoding="utf-8") as fh:
            fh.write("\nnote: cells ran in parallel; wall times are not comparable\n")
    print(paths["summary"].read_text(), end="")
    return 0 if res.all_succeeded else 1


def cmd_serve(args) -> int:
    cfg, _ = _load(args)
    _, records = harness.serve(cfg, args.host, args.port, args.repeat,
                               ready=lambda p: print(f"listening on {args.host}:{p}", flush=True))
    for r in records:
        print(f"round {r.round}: auc {fmt(r.auc)}")
    return 0


def cmd_client(args) -> int:
    cfg, _ = _load(args)
    n = harness.join(cfg, args.client_id, args.host, args.port, args.repeat)
    print(f"client {args.client_id}: served {n} rounds")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="INI config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--seed", type=int)
        return p

    common(sub.add_parser("baseline", help="centralized k-fold baseline")).set_defaults(
        func=cmd_baseline)
    p = common(sub.add_parser("run", help="repeated federated runs of one config"))
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_run)
    p = common(sub.add_parser("sweep", help="grid sweep over [sweep] axes"))
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--standard-grid", action="store_true",
                   help="clients 3,5,10,50 x rounds 1,2,5,10 unless the file overrides")
    p.add_argument("--parallel", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_sweep)
    for name, func, hlp in (("serve", cmd_serve, "aggregator endpoint for a TCP run"),
                            ("client", cmd_client, "join a TCP run as one client")):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--host", default="127.0.0.1")
        p.add_argument("--port", type=int, default=7077)
        p.add_argument("--repeat", type=int, default=0)
        if name == "client":
            p.add_argument("--client-id", type=int, required=True)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

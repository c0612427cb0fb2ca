"""Command line entry point: ``bench``, ``simulate`` and ``cover``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .cbn import load_model, parse_intervention, sample_many, true_mean
from .covering import construct_cover, verify_cover
from .errors import CausalCoveringError
from .harness import (
    ExperimentConfig,
    aggregate,
    check_regret_curve,
    desk_config,
    full_config,
    run_experiment,
)


def _cmd_bench(args) -> int:
    if args.config:
        config = ExperimentConfig.load(args.config)
    elif args.preset == "full":
        config = full_config()
    else:
        config = desk_config()
    if args.out:
        config.output = args.out
    if args.timing:
        config.record_timing = True
    report = run_experiment(config, threads=args.threads, trace=args.trace)
    if not config.output:
        sys.stdout.write(report.to_csv())
    summary = aggregate(report)
    for agent, s in summary.items():
        print(f"# {agent}: trend={s['trend']} final_T={s['final_T']} "
              f"final_regret={s['final_regret']:.6f}", file=sys.stderr)
    if report.failures:
        print(f"# {len(report.failures)} runs failed", file=sys.stderr)
    if args.check:
        ok = True
        for c in check_regret_curve(report):
            ok &= c.passed
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}", file=sys.stderr)
        return 0 if ok else 1
    return 0


def _cmd_simulate(args) -> int:
    model = load_model(args.model)
    arm = parse_intervention(args.arm)
    if arm.size != model.n:
        raise SystemExit(f"arm has length {arm.size}, model has {model.n} vertices")
    rng = np.random.Generator(np.random.PCG64(args.seed))
    z = sample_many(model, arm, args.draws, rng)
    r = model.graph.reward_vertex
    out = {"draws": args.draws, "reward_mean": float(z[:, r].mean()),
           "vertex_means": [float(x) for x in z.mean(axis=0)]}
    try:
        out["true_mean"] = true_mean(model, arm)
    except CausalCoveringError:
        out["true_mean"] = None
    print(json.dumps(out))
    return 0


def _cmd_cover(args) -> int:
    model = load_model(args.model)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    smbn = True if args.smbn else None
    cover = construct_cover(model.graph, args.horizon, rng, smbn=smbn)
    cert = verify_cover(model.graph, cover)
    doc = {"kind": cover.kind, "k_target": cover.k_target, "attempts": cover.attempts,
           "interventions": cover.as_strings(),
           "certificate": {"covered": cert.covered, "missing": len(cert.missing)}}
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"# {len(cover)} interventions, covered={cert.covered}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causal-covering", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a seeded regret sweep and write CSV")
    b.add_argument("--config", help="experiment config JSON")
    b.add_argument("--preset", choices=["desk", "full"], default="desk",
                   help="built-in config when --config is absent (full = h=7, 1000 runs)")
    b.add_argument("--check", action="store_true", help="exit nonzero if regret criteria fail")
    b.add_argument("--out", help="CSV output path (default: stdout)")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--trace", help="per-run JSON-lines trace path")
    b.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("simulate", help="draw samples under one intervention")
    s.add_argument("--model", required=True)
    s.add_argument("--arm", required=True, help="string over {0,1,*}")
    s.add_argument("--draws", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("cover", help="construct and certify a covering intervention set")
    c.add_argument("--model", required=True)
    c.add_argument("--horizon", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--smbn", action="store_true", help="cover c-component subsets")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_cover)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

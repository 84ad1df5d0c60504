"""Command line driver: ``simulate``, ``scenario`` and ``verify``.

Exit codes: 0 pass, 1 verdict failure, 2 config error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def _common(p):
    p.add_argument("--output-dir", default=None, help="directory for outputs")
    p.add_argument("--seed", type=int, default=None, help="override the integrator seed")
    p.add_argument("--threads", type=int, default=None, help="worker threads for the collision kernel")
    p.add_argument("--quiet", action="store_true", help="no progress lines")


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    _common(common)
    ap = argparse.ArgumentParser(prog="enskog", parents=[common],
                                 description="Enskog slab solver with free-energy diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="run a TOML config")
    sim.add_argument("config")
    sim.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    from .scenarios import SCENARIOS
    sc = sub.add_parser("scenario", parents=[common], help="run a named preset")
    sc.add_argument("name", choices=SCENARIOS)
    sc.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    from .verify import SUITES
    ve = sub.add_parser("verify", parents=[common], help="run a property suite")
    ve.add_argument("suite", choices=SUITES)
    ve.add_argument("--resolution", type=int, default=1)
    return ap


def _threads(n):
    if n is None:
        return
    import numba
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _overrides(args):
    extra = list(getattr(args, "override", []) or [])
    if args.seed is not None:
        extra.append(f"integrator.seed={args.seed}")
    return extra


def _run(cfg, out, scenario, quiet):
    from .runner import run
    res = run(cfg, out_dir=out, progress=not quiet, scenario=scenario)
    for name, verdict in res.verdicts.items():
        print(f"{verdict:4s} {name}")
    print(f"outputs in {out}")
    return EXIT_OK if res.passed else EXIT_VERDICT


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    from .config import ConfigError
    from .dynamics import NumericalAbort
    _threads(args.threads)
    try:
        if args.command == "simulate":
            from .config import parse_config
            cfg = parse_config(args.config, _overrides(args))
            out = Path(args.output_dir or Path(cfg.output.directory) / Path(args.config).stem)
            return _run(cfg, out, None, args.quiet)
        if args.command == "scenario":
            from .scenarios import preset
            cfg = preset(args.name, _overrides(args))
            out = Path(args.output_dir or Path(cfg.output.directory) / args.name)
            return _run(cfg, out, args.name, args.quiet)
        if args.command == "verify":
            from .verify import run_suite
            if args.resolution < 1:
                raise ConfigError(["--resolution: must be >= 1"])
            rep = run_suite(args.suite, args.resolution, args.seed or 0)
            out = Path(args.output_dir or "runs")
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"verify_{args.suite}.json"
            path.write_text(json.dumps(rep.to_dict(), indent=2))
            for c in rep.checks:
                tag = "PASS" if c.passed else ("INFO" if c.informational else "FAIL")
                print(f"{tag:4s} {c.name}: {c.value:.4g} (tol {c.tolerance:.3g})")
            print(f"report in {path}")
            return EXIT_OK if rep.passed else EXIT_VERDICT
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

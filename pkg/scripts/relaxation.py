"""Run a named scenario and print F(t), T_mean(t) and the verdicts."""
import argparse

from enskog.runner import run
from enskog.scenarios import SCENARIOS, preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("name", nargs="?", default="relax-boltzmann", choices=SCENARIOS)
    ap.add_argument("--steps", type=int, default=None)
    ap.add_argument("--out", default=None, help="also write the usual output files here")
    args = ap.parse_args()
    over = [f"integrator.steps={args.steps}"] if args.steps is not None else []
    res = run(preset(args.name, over), out_dir=args.out, progress=False, scenario=args.name)
    col = "Fprime" if "self_force" in res.verdicts else "F"
    print(f"{'t':>9} {col:>16} {'T_mean':>10}")
    for row in res.series:
        print(f"{row['t']:9.3f} {row[col]:16.10f} {row['T_mean']:10.6f}")
    for k, v in res.verdicts.items():
        print(f"{v:4s} {k}")
    print(f"wall clock {res.wall_clock:.1f} s")


if __name__ == "__main__":
    main()

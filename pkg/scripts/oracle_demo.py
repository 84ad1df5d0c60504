"""Small-N configurational oracle: Y, phi and g2 as JSON records.

For N = 2 and a uniform weight the excluded volume gives the exact values,
which are printed next to the estimates.
"""
import argparse
import json
import math

import numpy as np

from enskog.correlation import Box, WeightField, config_phi, config_Y, exact_g2, invert_density_to_w


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=0.8)
    ap.add_argument("--samples", type=int, default=50000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    box = Box((4.0, 4.0, 4.0))
    w = WeightField.uniform(box)
    center = [2.0, 2.0, 2.0]
    vex = 4 * math.pi / 3 * args.sigma ** 3
    y = config_Y(w, 2, args.sigma, center, args.samples, args.seed)
    phi = config_phi(w, 2, args.sigma, args.samples, args.seed + 1)
    print(y.to_json(), "exact", 1 - vex / box.volume)
    print(phi.to_json(), "exact", 1 - (vex - math.pi * args.sigma ** 4 / 8) / box.volume)
    for n in (2, 3, 5):
        rec = exact_g2(w, n, 0.0, 1.0, 3.0, samples=1000, seed=args.seed)
        print(rec.to_json(), "ideal limit", (n - 1) / n)
    # invert a ramp density for N = 3 and report the self-consistency
    rho = 3 * np.array([0.1, 0.2, 0.3, 0.4]) / 16
    st = invert_density_to_w(rho, box, 3, args.sigma, 1.0, samples=4000, seed=args.seed)
    print(json.dumps({"iterations": st.iterations, "residual": st.residual,
                      "w": st.weights.values().tolist(), "H_c": st.h_collisional()}))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Relay chain vs cascaded independent links over a long haul.

For each station count the chain uses equally spaced stations and the
cascade uses n_mars + 1 independently compensated stages.
"""
import argparse
from pathlib import Path

from marsrf import io
from marsrf.sweep import chain_vs_cascade

TAUS = [0.1, 1.0, 10.0, 100.0, 1e3, 1e4]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--total-km", type=float, default=3000.0)
    ap.add_argument("--n-mars", default="1,4,9,14,29,59")
    ap.add_argument("--out", type=Path, default=Path("out/long_haul.csv"))
    args = ap.parse_args()

    rows = []
    print(f"{'stations':>8} {'chain@1s':>11} {'cascade@1s':>11} {'ratio':>7}")
    for n in (int(x) for x in args.n_mars.split(",")):
        cmp = chain_vs_cascade(args.total_km, n, n + 1, TAUS)
        for t in cmp.chain.taus:
            rows.append({"n_mars": n, "tau_s": t, "adev_chain": cmp.chain.at(t),
                         "adev_cascade": cmp.cascade.at(t)})
        a, b = cmp.chain.at(1.0), cmp.cascade.at(1.0)
        print(f"{n:>8d} {a:>11.3e} {b:>11.3e} {a / b:>7.3f}")
    print("wrote", io.write_rows_csv(args.out, rows,
                                     comments=[f"total_km: {args.total_km:g}"]))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Relay-station position vs total length grid.

Prints ADEV(1 s) as a text table (rows: total length, columns: front-span
fraction) and writes the full grid to CSV.
"""
import argparse
import logging
from pathlib import Path

import numpy as np

from marsrf import ChainTopology, PllParams
from marsrf import io
from marsrf.sweep import SweepSpec, metric_name, ratio_length_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--totals", default="50:300:50", help="START:STOP:STEP in km (inclusive)")
    ap.add_argument("--ratios", default="0.5:0.9:0.1", help="START:STOP:STEP (inclusive)")
    ap.add_argument("--taus", default="1,1e4")
    ap.add_argument("--injection", default="distributed", choices=("distributed", "lumped"))
    ap.add_argument("--gain-scale", type=float, default=1.0)
    ap.add_argument("--out", type=Path, default=Path("out/position_sweep.csv"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    def axis(s):
        a, b, step = map(float, s.split(":"))
        return tuple(np.round(np.arange(a, b + step / 2, step), 10))

    taus = tuple(float(t) for t in args.taus.split(","))
    tpl = ChainTopology((100.0, 100.0), pll=PllParams().scaled(args.gain_scale))
    spec = SweepSpec(tpl, axis(args.totals), axis(args.ratios), taus, injection=args.injection)
    rows = ratio_length_grid(spec)

    key = metric_name(min(taus))
    print(f"{key:>10}" + "".join(f"{r:>11.2f}" for r in spec.ratios))
    for total in spec.total_lengths:
        vals = [r[key] for r in rows if r["total_km"] == total]
        print(f"{total:>8g}km" + "".join(f"{v:>11.3e}" for v in vals))

    cols = ["total_km", "ratio"] + [metric_name(t) for t in sorted(taus)] + ["error"]
    print("wrote", io.write_rows_csv(args.out, rows, cols))


if __name__ == "__main__":
    main()

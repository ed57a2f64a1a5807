#!/usr/bin/env python3
"""Monte Carlo check of the time-domain simulator against the analytic ADEV.

The analytic prediction uses lumped detector noise and is band-limited at
the simulation's Nyquist frequency. Default gains are unstable for 100 km
spans, so the default here is a reduced gain scale.
"""
import argparse
import math
import time

from marsrf import ChainTopology, PllParams, psd_to_adev, residual_psd_chain
from marsrf.oracle import LoopDivergenceError, SimConfig, monte_carlo_adev
from marsrf.stability import InsufficientDataError, delivered_freq


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spans", default="100,100", help="span lengths in km")
    ap.add_argument("--gain-scale", type=float, default=0.25)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--duration", type=float, default=100.0)
    ap.add_argument("--sample-rate", type=float, default=1e4)
    ap.add_argument("--taus", default="0.01,0.1,1,10")
    args = ap.parse_args()

    chain = ChainTopology(tuple(float(x) for x in args.spans.split(",")),
                          pll=PllParams().scaled(args.gain_scale))
    cfg = SimConfig(chain, sample_rate=args.sample_rate, duration=args.duration)
    taus = [float(t) for t in args.taus.split(",")]
    nu0 = delivered_freq(chain.carrier_freq)
    t0 = time.time()
    try:
        taus, sig = monte_carlo_adev(cfg, range(args.seeds), taus)
    except LoopDivergenceError as exc:
        raise SystemExit(f"unstable loop: {exc}")
    except InsufficientDataError as exc:
        raise SystemExit(f"{exc}; raise --duration or drop the longest tau")
    fh = cfg.effective_sample_rate / 2
    pred = psd_to_adev(residual_psd_chain(chain, injection="lumped"), nu0, taus, fh).sigmas
    print(f"fs={cfg.effective_sample_rate:g} Hz, {args.seeds} seeds x {args.duration:g} s "
          f"({time.time() - t0:.1f} s)")
    print(f"{'tau':>8} {'sim':>11} {'se':>9} {'analytic':>11} {'z':>6}")
    for j, t in enumerate(taus):
        m = sig[:, j].mean()
        se = sig[:, j].std(ddof=1) / math.sqrt(sig.shape[0]) if sig.shape[0] > 1 else float("nan")
        print(f"{t:>8g} {m:>11.4e} {se:>9.2e} {pred[j]:>11.4e} {(m - pred[j]) / se:>6.2f}")


if __name__ == "__main__":
    main()

"""Command-line front end: ``marsrf {psd,adev,oracle,sweep,verify}``.

Exit codes: 0 ok, 1 verification or computation failure, 2 usage/config
error. Failures also print one JSON line on stderr
(``{"error": ..., "kind": ..., "exit": ...}``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .config import ConfigError, RunConfig, preset_names
from .fixtures import format_report, regenerate_fixtures
from .freqdomain import (SingularSystemError, cascaded_psd, free_running_psd,
                         residual_psd_chain, residual_psd_single_mars, transfer_set)
from .oracle import LoopDivergenceError, simulate
from .phase_algebra import RS, lock_errors, recovered_output_phase, solve_static_locks
from .stability import GridCoverageError, InsufficientDataError, psd_to_adev
from .sweep import chain_vs_cascade, metric_name, n_mars_family, ratio_length_grid
from .topology import ChainTopology

log = logging.getLogger("marsrf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _grid_arg(text: str):
    try:
        fmin, fmax, ppd = text.split(":")
        return float(fmin), float(fmax), int(ppd)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FMIN:FMAX:PPD, got {text!r}") from None


def _taus_arg(text: str):
    try:
        taus = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated taus, got {text!r}") from None
    if not taus:
        raise argparse.ArgumentTypeError("empty tau list")
    return taus


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marsrf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="TOML run configuration")
    src.add_argument("--preset", help=f"bundled preset ({', '.join(preset_names())})")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid", type=_grid_arg, metavar="FMIN:FMAX:PPD")
    common.add_argument("--taus", type=_taus_arg, metavar="LIST")

    sp = sub.add_parser("psd", parents=[common], help="residual, free-running, cascaded PSDs")
    sp.add_argument("--dbc", action="store_true", help="also write dBc/Hz files")
    sp = sub.add_parser("adev", parents=[common], help="ADEV from a config or a PSD file")
    sp.add_argument("--psd", type=Path, help="read this PSD CSV instead of solving")
    sp = sub.add_parser("oracle", parents=[common], help="time-domain simulation")
    sp.add_argument("--seeds", type=int, help="number of consecutive seeds")
    sp.add_argument("--duration", type=float)
    sp.add_argument("--series", choices=("npy", "csv", "none"), default="npy")
    sub.add_parser("sweep", parents=[common], help="parameter sweeps")
    sp = sub.add_parser("verify", parents=[common], help="identity checks and fixtures")
    sp.add_argument("--fixtures", type=Path, help="fixture directory (default: bundled)")
    sp.add_argument("--update-fixtures", action="store_true")
    sp.add_argument("--cases", type=int, default=500, help="random static-lock cases")
    return p


def load_config(args) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.load(args.config)
    elif args.preset is not None:
        cfg = RunConfig.preset(args.preset)
    else:
        cfg = RunConfig()
    kv = {}
    if args.grid is not None:
        kv.update({"grid.fmin": args.grid[0], "grid.fmax": args.grid[1],
                   "grid.ppd": args.grid[2]})
    if args.taus is not None:
        kv["adev.taus"] = args.taus
        kv["oracle.taus"] = args.taus
    if args.seed is not None:
        kv["oracle.seed"] = args.seed
    return cfg.with_overrides(**kv)


def _emit(path: Path):
    print(f"wrote {path}")


def cmd_psd(cfg: RunConfig, args) -> int:
    out = cfg.out_dir(args.out)
    chain = cfg.chain()
    grid = cfg.grid()
    inj = cfg.get("model.injection")
    com = cfg.header_comments([f"sublinks_km: {list(chain.sublink_lengths)}"])
    variants = {"chain": residual_psd_chain(chain, grid, inj),
                "free_running": free_running_psd(chain, grid)}
    stages = cfg.get("model.cascade_stages")
    if stages is not None:
        variants["cascaded"] = cascaded_psd(chain.total_length, int(stages), grid,
                                            template=chain, injection=inj)
    for name, psd in variants.items():
        _emit(io.write_psd_csv(out / f"psd_{name}.csv", psd, com + [f"variant: {name}"]))
        if args.dbc:
            _emit(io.write_psd_csv(out / f"psd_{name}_dbc.csv", psd,
                                   com + [f"variant: {name}"], dbc=True))
    return EXIT_OK


def cmd_adev(cfg: RunConfig, args) -> int:
    out = cfg.out_dir(args.out)
    if args.psd is not None:
        if not args.psd.is_file():
            raise FileNotFoundError(f"PSD file not found: {args.psd}")
        psd = io.read_psd_csv(args.psd)
        nu0 = cfg.nu0()
        com = cfg.header_comments([f"psd: {args.psd.name}"])
    else:
        chain = cfg.chain()
        psd = residual_psd_chain(chain, cfg.grid(), cfg.get("model.injection"))
        nu0 = cfg.nu0(chain)
        com = cfg.header_comments([f"sublinks_km: {list(chain.sublink_lengths)}"])
    curve = psd_to_adev(psd, nu0, cfg.taus(), float(cfg.get("adev.f_high")))
    path = io.write_adev_csv(out / "adev.csv", curve, com + [f"nu0_hz: {nu0:.17e}"])
    for t, s in zip(curve.taus, curve.sigmas):
        print(f"tau={t:g} s  adev={s:.6e}")
    _emit(path)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, args) -> int:
    from dataclasses import replace

    out = cfg.out_dir(args.out)
    base = cfg.sim_config()
    if args.duration is not None:
        base = replace(base, duration=args.duration)
    n_seeds = args.seeds if args.seeds is not None else int(cfg.get("oracle.seeds"))
    taus = cfg.oracle_taus()
    rows = []
    for i in range(n_seeds):
        sim = replace(base, seed=base.seed + i)
        res = simulate(sim)
        curve = res.adev(taus)
        rows.append({"seed": sim.seed,
                     **{metric_name(t): s for t, s in zip(curve.taus, curve.sigmas)}})
        print(f"seed {sim.seed}: " + "  ".join(f"{metric_name(t)}={s:.4e}"
                                                 for t, s in zip(curve.taus, curve.sigmas)))
        if i == 0 and args.series != "none":
            com = cfg.header_comments([f"seed: {sim.seed}", f"fs_hz: {res.sample_rate:.17e}"])
            _emit(io.write_series(out / f"oracle_rs_seed{sim.seed}.{args.series}",
                                  res.times, res.rs_residual, com))
    com = cfg.header_comments([f"fs_hz: {base.effective_sample_rate:.17e}",
                               f"duration_s: {base.duration:g}"])
    cols = ["seed"] + [metric_name(t) for t in taus]
    _emit(io.write_rows_csv(out / "oracle_adev.csv", rows, cols, com))
    sig = np.array([[r[metric_name(t)] for t in taus] for r in rows])
    n_count = [sig.shape[0]] * len(taus)
    from .stability import AdevCurve
    _emit(io.write_adev_csv(out / "oracle_adev_mean.csv",
                            AdevCurve(taus, sig.mean(axis=0), n_count), com))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = cfg.out_dir(args.out)
    kind = cfg.get("sweep.kind")
    com = cfg.header_comments([f"sweep: {kind}"])
    taus = cfg.taus()
    if kind == "ratio_length":
        spec = cfg.sweep_spec()
        rows = ratio_length_grid(spec)
        cols = ["total_km", "ratio"] + [metric_name(t) for t in sorted(spec.taus)] + ["error"]
        _emit(io.write_rows_csv(out / "sweep_ratio_length.csv", rows, cols, com))
        long = [{"total_km": r["total_km"], "ratio": r["ratio"], "tau_s": t,
                 "adev": r[metric_name(t)]} for r in rows for t in sorted(spec.taus)]
        _emit(io.write_rows_csv(out / "sweep_ratio_length_long.csv", long,
                                ["total_km", "ratio", "tau_s", "adev"], com))
        failed = [r for r in rows if r["error"]]
        if failed:
            log.warning("%d of %d cells failed", len(failed), len(rows))
        return EXIT_OK
    chain = cfg.chain()
    totals = cfg.get("sweep.total_km") or [chain.total_length]
    if kind == "cascade":
        n_list = cfg.get("sweep.n_mars") or [chain.n_mars]
        stages = int(cfg.get("sweep.n_stages") or n_list[0] + 1)
        rows = []
        for total in totals:
            for n in n_list:
                cmp = chain_vs_cascade(float(total), int(n), stages, taus, template=chain,
                                       grid=cfg.grid(), f_high=float(cfg.get("adev.f_high")))
                for t in cmp.chain.taus:
                    rows.append({"total_km": float(total), "n_mars": int(n), "n_stages": stages,
                                 "tau_s": t, "adev_chain": cmp.chain.at(t),
                                 "adev_cascade": cmp.cascade.at(t)})
                print(f"{total:g} km, {n} stations vs {stages} stages: chain "
                      f"{'<=' if cmp.chain_better else '>'} cascade at 1 s "
                      f"({cmp.chain.at(1.0):.3e} vs {cmp.cascade.at(1.0):.3e})")
        _emit(io.write_rows_csv(out / "sweep_cascade.csv", rows,
                                ["total_km", "n_mars", "n_stages", "tau_s", "adev_chain",
                                 "adev_cascade"], com))
        return EXIT_OK
    # n_mars
    n_list = cfg.get("sweep.n_mars")
    if not n_list:
        raise ConfigError("n_mars sweep needs sweep.n_mars list")
    rows = []
    for total in totals:
        rows += n_mars_family(float(total), [int(n) for n in n_list], taus, template=chain,
                              grid=cfg.grid(), f_high=float(cfg.get("adev.f_high")))
    _emit(io.write_rows_csv(out / "sweep_n_mars.csv", rows,
                            ["total_km", "n_mars"] + [metric_name(t) for t in taus], com))
    return EXIT_OK


# verification suite

def check_static_locks(cases: int, seed: int = 0, tol: float = 1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 33))
        r = float(rng.uniform(-np.pi, np.pi))
        st = solve_static_locks(r, rng.uniform(-50, 50, n + 1))
        worst = max(worst, float(np.abs(lock_errors(st)).max()))
        for where in [RS, *range(1, n + 1)]:
            worst = max(worst, abs(recovered_output_phase(st, where) - r))
    return worst <= tol, f"{cases} random chains, worst error {worst:.2e} rad"


def check_single_station(cfg: RunConfig, tol: float = 1e-10):
    chain = cfg.chain()
    if chain.n_mars != 1:
        chain = chain.replace(sublink_lengths=(100.0, 100.0), pll=chain.station_pll(1))
    grid = cfg.grid()
    inj = cfg.get("model.injection")
    a = residual_psd_single_mars(chain, grid, inj).values
    b = residual_psd_chain(chain, grid, inj).values
    rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
    return rel <= tol, f"closed form vs tridiagonal, max relative deviation {rel:.2e}"


def check_cascade_law(cfg: RunConfig, tol: float = 1e-9):
    chain = cfg.chain()
    grid = cfg.grid()
    span = chain.total_length / max(chain.n_mars + 1, 1)
    one = psd_to_adev(cascaded_psd(span, 1, grid, template=chain), cfg.nu0(chain), cfg.taus(),
                      float(cfg.get("adev.f_high")))
    worst = 0.0
    for m in (2, 5, 30):
        many = psd_to_adev(cascaded_psd(m * span, m, grid, template=chain), cfg.nu0(chain),
                           cfg.taus(), float(cfg.get("adev.f_high")))
        dev = np.abs(many.sigmas - np.sqrt(m) * one.sigmas) / (np.sqrt(m) * one.sigmas)
        worst = max(worst, float(np.nanmax(np.where(one.sigmas > 0, dev, 0.0))))
    return worst <= tol, f"M in (2, 5, 30), max relative deviation {worst:.2e}"


def check_solver(cfg: RunConfig):
    chain = cfg.chain()
    if chain.n_mars < 1:
        return True, "no relay stations, nothing to solve"
    ts = transfer_set(chain, cfg.grid(), cfg.get("model.injection"))
    return ts.max_residual <= 1e-10, f"max relative residual {ts.max_residual:.2e}"


def cmd_verify(cfg: RunConfig, args) -> int:
    checks = [("static lock identity", lambda: check_static_locks(args.cases)),
              ("single-station consistency", lambda: check_single_station(cfg)),
              ("cascade sqrt(M) law", lambda: check_cascade_law(cfg)),
              ("tridiagonal residual", lambda: check_solver(cfg))]
    failed = []
    for name, fn in checks:
        ok, detail = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    results = regenerate_fixtures(args.fixtures, update=args.update_fixtures)
    print(format_report(results))
    failed += [f"fixture {r.name}" for r in results if not r.ok]
    if failed:
        print(json.dumps({"failed": failed}), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {"psd": cmd_psd, "adev": cmd_adev, "oracle": cmd_oracle, "sweep": cmd_sweep,
            "verify": cmd_verify}


def _error(kind: str, msg: str, code: int) -> int:
    print(json.dumps({"error": msg, "kind": kind, "exit": code}), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
        if code != EXIT_OK:
            _error("usage", "invalid command line", EXIT_USAGE)
        return code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        return _error("missing-file", str(exc), EXIT_USAGE)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_USAGE)
    except (SingularSystemError, GridCoverageError, InsufficientDataError,
            LoopDivergenceError) as exc:
        return _error(type(exc).__name__, str(exc), EXIT_FAIL)
    except ValueError as exc:
        return _error("config", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())

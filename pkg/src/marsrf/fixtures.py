"""Golden output files regenerated from the presets.

Each fixture carries a tolerance class:

``exact``      byte-identical file (sha256 match)
``rel:<x>``    every numeric cell within relative tolerance x
``paper-band`` the stored file holds published reference values; the
               regenerated values must lie within +-50% of them
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import io
from .config import ConfigError, RunConfig
from .freqdomain import cascaded_psd, default_grid, residual_psd_chain
from .phase_algebra import solve_static_locks
from .stability import psd_to_adev
from .sweep import adev_of

MANIFEST = "manifest.json"
REFERENCE_BAND = 0.5
FIXTURE_GRID = dict(fmin=1e-5, fmax=1e5, ppd=40)

# published reference points: preset -> {tau: value}
REFERENCE_ADEV = {
    "fig6b_100_100": {1.0: 2.7e-14},
    "fig6b_120_80": {1.0: 2.9e-14},
    "fig7_3000km": {1.0: 1.5e-13, 1e4: 1.9e-17},
}


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    preset: str
    tolerance: str
    build: Callable[[RunConfig, List[str]], str]  # returns file text

    @property
    def file(self) -> str:
        return f"{self.name}.csv"


@dataclass(frozen=True)
class FixtureResult:
    name: str
    status: str  # match | drift | created | updated | missing-preset | missing-file
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("match", "created", "updated")


def _grid():
    return default_grid(**FIXTURE_GRID)


def _psd_text(cfg, comments):
    chain = cfg.chain()
    psd = residual_psd_chain(chain, _grid(), cfg.get("model.injection"))
    return io._table(io.PSD_HEADER, zip(psd.freqs, psd.values), comments)


def _adev_text(cfg, comments):
    chain = cfg.chain()
    psd = residual_psd_chain(chain, _grid(), cfg.get("model.injection"))
    curve = adev_of(psd, chain, cfg.taus(), cfg.get("adev.f_high"), cfg.get("adev.nu0"))
    return io._table(io.ADEV_HEADER, ((t, s, "") for t, s in zip(curve.taus, curve.sigmas)),
                     comments)


def _cascade_text(cfg, comments):
    chain = cfg.chain()
    stages = int(cfg.get("model.cascade_stages"))
    psd = cascaded_psd(chain.total_length, stages, _grid(), template=chain,
                       injection=cfg.get("model.injection"))
    curve = psd_to_adev(psd, cfg.nu0(chain), cfg.taus(), cfg.get("adev.f_high"))
    return io._table(io.ADEV_HEADER, ((t, s, "") for t, s in zip(curve.taus, curve.sigmas)),
                     comments)


def _reference_text(preset):
    def build(cfg, comments):
        ref = REFERENCE_ADEV[preset]
        return io._table(io.ADEV_HEADER, ((t, ref[t], "") for t in sorted(ref)), comments)
    return build


def _static_text(cfg, comments):
    # dyadic inputs keep every intermediate exactly representable
    n = cfg.chain().n_mars
    phi_p = [0.25 * ((3 * k) % 8) for k in range(n + 1)]
    st = solve_static_locks(0.5, phi_p)
    return io._table(("station", "phi_c"), ((k + 1, c) for k, c in enumerate(st.phi_c)),
                     comments)


FIXTURES = [
    FixtureSpec("fig6b_100_100_psd", "fig6b_100_100", "rel:1e-10", _psd_text),
    FixtureSpec("fig6b_100_100_adev", "fig6b_100_100", "rel:1e-10", _adev_text),
    FixtureSpec("fig6b_120_80_adev", "fig6b_120_80", "rel:1e-10", _adev_text),
    FixtureSpec("exp_260_280_psd", "exp_260_280", "rel:1e-10", _psd_text),
    FixtureSpec("fig7_3000km_adev", "fig7_3000km", "rel:1e-10", _adev_text),
    FixtureSpec("fig7_3000km_cascade_adev", "fig7_3000km", "rel:1e-10", _cascade_text),
    FixtureSpec("fig6b_100_100_reference", "fig6b_100_100", "paper-band",
                _reference_text("fig6b_100_100")),
    FixtureSpec("fig6b_120_80_reference", "fig6b_120_80", "paper-band",
                _reference_text("fig6b_120_80")),
    FixtureSpec("fig7_3000km_reference", "fig7_3000km", "paper-band",
                _reference_text("fig7_3000km")),
    FixtureSpec("fig7_3000km_static_locks", "fig7_3000km", "exact", _static_text),
]


def default_fixture_dir() -> Path:
    return Path(str(resources.files("marsrf") / "fixtures"))


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _numeric(text: str) -> np.ndarray:
    vals = []
    rows = [l for l in text.splitlines() if l and not l.startswith("#")]
    for line in rows[1:]:
        for cell in line.split(","):
            try:
                vals.append(float(cell))
            except ValueError:
                pass
    return np.array(vals)


def _body(text: str) -> str:
    """Drop comment lines (the config fingerprint lives there)."""
    return "\n".join(l for l in text.splitlines() if not l.startswith("#")) + "\n"


def _compare(spec: FixtureSpec, stored: str, fresh: str, cfg: RunConfig) -> Optional[str]:
    """None when within tolerance, else a short description of the drift."""
    tol = spec.tolerance
    if tol == "exact":
        return None if _sha(stored) == _sha(fresh) else "checksum differs"
    if tol.startswith("rel:"):
        rtol = float(tol[4:])
        a, b = _numeric(_body(stored)), _numeric(_body(fresh))
        if a.shape != b.shape:
            return f"row count {a.size} vs {b.size}"
        scale = np.maximum(np.abs(a), np.abs(b))
        rel = np.where(scale > 0, np.abs(a - b) / np.where(scale > 0, scale, 1), 0.0)
        worst = float(rel.max()) if rel.size else 0.0
        return None if worst <= rtol else f"max relative deviation {worst:.3g} > {rtol:g}"
    if tol == "paper-band":
        ref = io.read_adev_csv_text(stored)
        computed = io.read_adev_csv_text(_adev_text(cfg, []))
        bad = []
        for t, target in zip(ref.taus, ref.sigmas):
            try:
                got = computed.at(t)
            except KeyError:
                bad.append(f"tau={t:g} not computed")
                continue
            if abs(got - target) > REFERENCE_BAND * target:
                bad.append(f"tau={t:g}: {got:.3g} vs {target:.3g}")
        return "; ".join(bad) or None
    raise ValueError(f"unknown tolerance class {tol!r}")


def _load_preset(name: str, preset_dir: Optional[Path]) -> RunConfig:
    if preset_dir is None:
        return RunConfig.preset(name)
    path = Path(preset_dir) / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"preset {name!r} not found in {preset_dir}")
    return RunConfig.load(path)


def regenerate_fixtures(fixture_dir=None, preset_dir=None, update: bool = False,
                        fixtures=FIXTURES) -> List[FixtureResult]:
    """Rebuild every fixture and compare with the stored copy.

    Missing files are written (so an empty directory gets populated).
    Existing files are only overwritten when ``update`` is set; otherwise
    drift is reported and the stored copy is left alone.
    """
    fixture_dir = Path(fixture_dir) if fixture_dir is not None else default_fixture_dir()
    fixture_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = fixture_dir / MANIFEST
    manifest: Dict[str, dict] = {}
    if manifest_path.is_file():
        manifest = {e["name"]: e for e in json.loads(manifest_path.read_text())["fixtures"]}

    results = []
    changed = False
    for spec in fixtures:
        try:
            cfg = _load_preset(spec.preset, preset_dir)
        except (ConfigError, FileNotFoundError) as exc:
            results.append(FixtureResult(spec.name, "missing-preset", str(exc)))
            continue
        fresh = spec.build(cfg, [f"fixture: {spec.name}", f"preset: {spec.preset}",
                                 f"tolerance: {spec.tolerance}"])
        path = fixture_dir / spec.file
        entry = {"name": spec.name, "preset": spec.preset, "file": spec.file,
                 "sha256": _sha(fresh), "tolerance": spec.tolerance}
        if not path.is_file():
            io.write_atomic(path, fresh)
            manifest[spec.name] = entry
            changed = True
            results.append(FixtureResult(spec.name, "created"))
            continue
        stored = path.read_text()
        drift = _compare(spec, stored, fresh, cfg)
        if drift is None:
            if spec.name not in manifest:
                manifest[spec.name] = {**entry, "sha256": _sha(stored)}
                changed = True
            results.append(FixtureResult(spec.name, "match"))
        elif update and spec.tolerance != "paper-band":
            io.write_atomic(path, fresh)
            manifest[spec.name] = entry
            changed = True
            results.append(FixtureResult(spec.name, "updated", drift))
        else:
            results.append(FixtureResult(spec.name, "drift", drift))
    if changed or not manifest_path.is_file():
        doc = {"fixtures": [manifest[k] for k in sorted(manifest)]}
        io.write_atomic(manifest_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return results


def format_report(results: List[FixtureResult]) -> str:
    lines = []
    for r in results:
        tag = "PASS" if r.ok else "FAIL"
        lines.append(f"{tag} fixture {r.name}: {r.status}" + (f" ({r.detail})" if r.detail else ""))
    return "\n".join(lines)

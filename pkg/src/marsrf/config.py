"""Run configuration: flat dotted keys read from TOML.

Nested TOML tables are flattened, so ``[pll] kp = 800`` and
``"pll.kp" = 800`` mean the same thing. Per-station PLL overrides use
``pll.<k>.<name>`` with a 1-based station index.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .freqdomain import DEFAULT_FMAX, DEFAULT_FMIN, DEFAULT_PPD, INJECTIONS, default_grid
from .noise import DEFAULT_ASE_DBC, NoiseFloorSpec, PowerLawCoeffs, RfSourceSpec
from .oracle import SimConfig
from .pll import PllParams
from .stability import DEFAULT_F_HIGH, DEFAULT_TAUS, delivered_freq
from .sweep import SweepSpec
from .topology import DEFAULT_CARRIER_HZ, ChainTopology, validate

OUT_ENV = "MARSRF_OUT"
DEFAULT_SUBLINKS_KM = (100.0, 100.0)

_PLL_FIELDS = {"kp": "k_p", "ki": "k_i", "kpfd": "k_pfd", "kvco": "k_vco"}
_H_FIELDS = ("h_m3", "h_m2", "h_m1", "h_0")
SWEEP_KINDS = ("ratio_length", "cascade", "n_mars")

# key -> default (None means "unset")
KNOWN_KEYS: Dict[str, Any] = {
    "name": "",
    "chain.sublinks_km": None,
    "chain.total_km": None,
    "chain.n_mars": None,
    "chain.carrier_hz": DEFAULT_CARRIER_HZ,
    "pll.kp": PllParams.k_p,
    "pll.ki": PllParams.k_i,
    "pll.kpfd": PllParams.k_pfd,
    "pll.kvco": PllParams.k_vco,
    "pll.scale": 1.0,
    **{f"noise.{h}": getattr(PowerLawCoeffs, h) for h in _H_FIELDS},
    "floor.white_dbc": -np.inf,
    "floor.ase_dbc": DEFAULT_ASE_DBC,
    **{f"floor.{h}": 0.0 for h in _H_FIELDS},
    **{f"rf.{h}": 0.0 for h in _H_FIELDS},
    "grid.fmin": DEFAULT_FMIN,
    "grid.fmax": DEFAULT_FMAX,
    "grid.ppd": DEFAULT_PPD,
    "adev.taus": list(DEFAULT_TAUS),
    "adev.f_high": DEFAULT_F_HIGH,
    "adev.nu0": None,
    "model.injection": "distributed",
    "model.cascade_stages": None,
    "oracle.sample_rate": 1e4,
    "oracle.duration": 100.0,
    "oracle.settle_time": 1.0,
    "oracle.seed": 0,
    "oracle.seeds": 1,
    "oracle.static_phi_r": 1.0,
    "oracle.taus": None,
    "sweep.kind": "ratio_length",
    "sweep.total_km": None,
    "sweep.ratios": None,
    "sweep.n_mars": None,
    "sweep.n_stages": None,
    "output.dir": "out",
}


class ConfigError(ValueError):
    pass


def flatten(d: dict, prefix: str = "") -> Dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _station_key(key: str):
    parts = key.split(".")
    if len(parts) == 3 and parts[0] == "pll" and parts[1].isdigit() and parts[2] in _PLL_FIELDS:
        return int(parts[1]), parts[2]
    return None


def preset_names() -> List[str]:
    root = resources.files("marsrf") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str):
    p = resources.files("marsrf") / "presets" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return p


@dataclass
class RunConfig:
    values: Dict[str, Any] = field(default_factory=dict)
    source: str = "<defaults>"

    def __post_init__(self):
        for key in self.values:
            if key not in KNOWN_KEYS and _station_key(key) is None:
                raise ConfigError(f"unknown config key {key!r}")
        kind = self.get("sweep.kind")
        if kind not in SWEEP_KINDS:
            raise ConfigError(f"sweep.kind must be one of {SWEEP_KINDS}, got {kind!r}")
        if self.get("model.injection") not in INJECTIONS:
            raise ConfigError(f"model.injection must be one of {INJECTIONS}")

    # construction

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "RunConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cls(flatten(raw), source)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        return cls.from_text(path.read_text(), str(path))

    @classmethod
    def preset(cls, name: str) -> "RunConfig":
        cfg = cls.from_text(preset_path(name).read_text(), f"preset:{name}")
        return cfg

    def with_overrides(self, **kv) -> "RunConfig":
        vals = dict(self.values)
        vals.update({k: v for k, v in kv.items() if v is not None})
        return RunConfig(vals, self.source)

    # access

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        return KNOWN_KEYS[key]

    def fingerprint(self) -> str:
        blob = json.dumps({k: self.values[k] for k in sorted(self.values)},
                          sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header_comments(self, extra: Sequence[str] = ()) -> List[str]:
        name = self.get("name") or self.source
        return [f"config: {name}", f"fingerprint: {self.fingerprint()}", *extra]

    def out_dir(self, override=None) -> Path:
        if override:
            return Path(override)
        if "output.dir" in self.values:
            return Path(self.values["output.dir"])
        return Path(os.environ.get(OUT_ENV, KNOWN_KEYS["output.dir"]))

    # model objects

    def _coeffs(self, prefix: str) -> PowerLawCoeffs:
        return PowerLawCoeffs(*(float(self.get(f"{prefix}.{h}")) for h in _H_FIELDS))

    def lengths(self) -> tuple:
        sub = self.get("chain.sublinks_km")
        total, n = self.get("chain.total_km"), self.get("chain.n_mars")
        if sub is not None:
            if total is not None or n is not None:
                raise ConfigError("give either chain.sublinks_km or chain.total_km + "
                                  "chain.n_mars, not both")
            return tuple(float(x) for x in sub)
        if total is None and n is None:
            return DEFAULT_SUBLINKS_KM
        if total is None or n is None:
            raise ConfigError("chain.total_km and chain.n_mars must be given together")
        n = int(n)
        if n < 0:
            raise ConfigError("chain.n_mars must be >= 0")
        return tuple([float(total) / (n + 1)] * (n + 1))

    def base_pll(self) -> PllParams:
        p = PllParams(*(float(self.get(f"pll.{k}")) for k in _PLL_FIELDS))
        return p.scaled(float(self.get("pll.scale")))

    def pll(self, n_mars: int):
        base = self.base_pll()
        overrides: Dict[int, dict] = {}
        for key, v in self.values.items():
            sk = _station_key(key)
            if sk:
                overrides.setdefault(sk[0], {})[_PLL_FIELDS[sk[1]]] = float(v)
        if not overrides:
            return base
        bad = [k for k in overrides if not 1 <= k <= max(n_mars, 1)]
        if bad:
            raise ConfigError(f"PLL override for station(s) {sorted(bad)} but chain has "
                              f"{n_mars} station(s)")
        from dataclasses import replace
        return tuple(replace(base, **overrides.get(k, {}))
                     for k in range(1, max(n_mars, 1) + 1))

    def template_parts(self) -> dict:
        return dict(
            carrier_freq=float(self.get("chain.carrier_hz")),
            fiber_noise=self._coeffs("noise"),
            floor=NoiseFloorSpec(float(self.get("floor.white_dbc")),
                                 float(self.get("floor.ase_dbc")),
                                 None if self._coeffs("floor").is_zero()
                                 else self._coeffs("floor")),
            rf=RfSourceSpec(None if self._coeffs("rf").is_zero() else self._coeffs("rf")),
        )

    def chain(self) -> ChainTopology:
        lengths = self.lengths()
        chain = ChainTopology(lengths, pll=self.pll(len(lengths) - 1), **self.template_parts())
        err = validate(chain)
        if err:
            raise ConfigError(err)
        return chain

    def grid(self) -> np.ndarray:
        return default_grid(float(self.get("grid.fmin")), float(self.get("grid.fmax")),
                            int(self.get("grid.ppd")))

    def taus(self) -> List[float]:
        return sorted(float(t) for t in self.get("adev.taus"))

    def nu0(self, chain: Optional[ChainTopology] = None) -> float:
        v = self.get("adev.nu0")
        if v is not None:
            return float(v)
        carrier = chain.carrier_freq if chain else float(self.get("chain.carrier_hz"))
        return delivered_freq(carrier)

    def sim_config(self, seed: Optional[int] = None) -> SimConfig:
        return SimConfig(self.chain(),
                         sample_rate=float(self.get("oracle.sample_rate")),
                         duration=float(self.get("oracle.duration")),
                         seed=int(self.get("oracle.seed") if seed is None else seed),
                         settle_time=float(self.get("oracle.settle_time")),
                         static_phi_r=float(self.get("oracle.static_phi_r")))

    def oracle_taus(self) -> List[float]:
        t = self.get("oracle.taus")
        return sorted(float(x) for x in t) if t is not None else self.taus()

    def sweep_spec(self) -> SweepSpec:
        totals = self.get("sweep.total_km")
        ratios = self.get("sweep.ratios")
        if totals is None or ratios is None:
            raise ConfigError("ratio_length sweep needs sweep.total_km and sweep.ratios lists")
        template = ChainTopology(self.lengths(), pll=self.base_pll(), **self.template_parts())
        return SweepSpec(template, tuple(float(t) for t in totals),
                         tuple(float(r) for r in ratios), tuple(self.taus()),
                         self.grid(), float(self.get("adev.f_high")),
                         self.get("adev.nu0"), self.get("model.injection"))

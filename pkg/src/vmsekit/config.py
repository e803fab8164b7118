"""Experiment configuration: presets, TOML/manifest parsing, overrides.

A config file is TOML with one section per module plus a handful of
top-level keys; a run manifest (JSON, as written next to each CSV set) is
accepted in place of a TOML file so a run can be reproduced exactly from
its own record. Named presets fill a complete parameter set first, the
file's values override the preset, and ``--set key=value`` pairs override
both. Unknown sections or keys are errors, never silently ignored.

Top-level keys: experiment, L, T, eps, eps_list, rule, output_times, label.
Sections: [mass], [packet], [field], [schrodinger], [liouville], [rte],
[ensemble], [output]. See the README for the full key reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, asdict
from pathlib import Path

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - fallback for 3.10
    import tomli as _toml

from .errors import ConfigError
from .klfield import CorrelationSpec
from .mass import MassModel
from .schrodinger import PacketSpec

EXPERIMENTS = (
    "DeterministicExample1",
    "DiodeExample",
    "RandomRTEComparison",
    "ScalingStudy",
    "ConvergenceStudy",
    "Custom",
)


@dataclass(frozen=True)
class SchrodingerOptions:
    """Wave-solver overrides; M/dt default to the eps-tied resolution rule."""

    M: int | None = None
    dt: float | None = None
    cn_tol: float = 1e-12
    maxit: int = 200


@dataclass(frozen=True)
class LiouvilleOptions:
    mode: str = "delta"  # delta | packet | regularized
    ny: int | None = None
    nk: int = 513
    tol: float = 1e-8
    k_min: float | None = None
    k_max: float | None = None
    delta_width_cells: float = 2.0
    sigma_k: float | None = None

    def __post_init__(self):
        if self.mode not in ("delta", "packet", "regularized"):
            raise ConfigError(f"unknown liouville mode {self.mode!r}")


@dataclass(frozen=True)
class RteOptions:
    M: int | None = None
    nk: int | None = None
    k_min: float | None = None
    k_max: float | None = None
    dt: float | None = None
    delta_width_cells: float = 2.0
    sigma_k: float | None = None
    save_phase: bool = False


@dataclass(frozen=True)
class EnsembleOptions:
    n_samples: int = 100
    master_seed: int = 20260819
    distribution: str = "gaussian"
    kl_threshold: float = 2.0**-9
    reference: str = "delta"  # deterministic-study reference: delta | packet
    gammas: tuple = ()
    max_failure_fraction: float = 0.01
    smoke: bool = False
    save_cov: bool = False

    def __post_init__(self):
        if self.n_samples < 2:
            raise ConfigError(
                f"ensemble n_samples must satisfy N >= 2, got {self.n_samples}"
            )
        if self.distribution not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.reference not in ("delta", "packet"):
            raise ConfigError(
                f"unknown convergence reference {self.reference!r}"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "Custom"
    L: float = 1.0
    T: float = 0.5
    eps: float | None = None
    eps_list: tuple = ()
    rule: str = "packet"
    output_times: tuple = ()
    label: str = ""
    model: MassModel = dc_field(default_factory=MassModel)
    packet: PacketSpec = dc_field(default_factory=PacketSpec)
    corr: CorrelationSpec | None = None
    schrodinger: SchrodingerOptions = dc_field(default_factory=SchrodingerOptions)
    liouville: LiouvilleOptions = dc_field(default_factory=LiouvilleOptions)
    rte: RteOptions = dc_field(default_factory=RteOptions)
    ensemble: EnsembleOptions = dc_field(default_factory=EnsembleOptions)
    out_dir: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.rule not in ("packet", "barrier"):
            raise ConfigError(f"unknown resolution rule {self.rule!r}")
        if self.L <= 0 or self.T <= 0:
            raise ConfigError(f"domain sizes must be positive: L={self.L}, T={self.T}")
        if self.eps is not None and not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        for e in self.eps_list:
            if not 0 < e < 1:
                raise ConfigError(f"eps_list entries must lie in (0, 1), got {e}")

    def single_eps(self) -> float:
        """The eps for single-scale commands (eps, or a 1-entry eps_list)."""
        if self.eps is not None:
            return self.eps
        if len(self.eps_list) == 1:
            return float(self.eps_list[0])
        raise ConfigError(
            "this command needs a single eps (set top-level key 'eps')"
        )


# ---------------------------------------------------------------------------
# schema and presets

_TOP_KEYS = {
    "experiment": str,
    "L": float,
    "T": float,
    "eps": float,
    "eps_list": list,
    "rule": str,
    "output_times": list,
    "label": str,
}

_SECTION_KEYS = {
    "mass": {
        "kind": str, "potential_kind": str, "gamma": float,
        "amp_x": float, "amp_t": float, "period_x": float, "period_t": float,
        "windows": list, "depth": float, "barrier_height": float,
        "sharpness": float, "value": float,
    },
    "packet": {"A": float, "x0": float, "p0": float},
    "field": {"D": float, "a": float, "b": float},
    "schrodinger": {"M": int, "dt": float, "cn_tol": float, "maxit": int},
    "liouville": {
        "mode": str, "ny": int, "nk": int, "tol": float,
        "k_min": float, "k_max": float, "delta_width_cells": float,
        "sigma_k": float,
    },
    "rte": {
        "M": int, "nk": int, "k_min": float, "k_max": float, "dt": float,
        "delta_width_cells": float, "sigma_k": float, "save_phase": bool,
    },
    "ensemble": {
        "n_samples": int, "master_seed": int, "distribution": str,
        "kl_threshold": float, "reference": str, "gammas": list,
        "max_failure_fraction": float, "smoke": bool, "save_cov": bool,
    },
    "output": {"dir": str},
}

_EX1 = {
    "L": 1.25, "T": 0.5, "rule": "packet",
    "mass": {"kind": "oscillatory_product", "potential_kind": "zero",
             "amp_x": 0.2, "amp_t": 0.2, "period_x": 1.0, "period_t": 1.0},
    "packet": {"A": 2.0**7, "x0": 0.25, "p0": 1.0},
}

_RANDOM = {
    "L": 1.625, "T": 0.4, "rule": "packet",
    "mass": {"kind": "constant", "value": 1.0, "gamma": 0.5},
    "packet": {"A": 2.0**8, "x0": 0.3, "p0": 1.5},
    "field": {"D": 1.5, "a": 100.0, "b": 100.0},
}

PRESETS = {
    "DeterministicExample1": {**_EX1, "eps": 2.0**-6},
    "DiodeExample": {
        "L": 2.0, "T": 0.5, "rule": "barrier", "eps": 2.0**-6,
        "mass": {"kind": "diode_bumps", "potential_kind": "diode_bumps",
                 "windows": [[0.5, 0.75], [1.0, 1.25]], "depth": 0.5,
                 "barrier_height": 1.0, "sharpness": 2.0**-6},
        "packet": {"A": 2.0**7, "x0": 0.25, "p0": 1.0},
    },
    "ConvergenceStudy": {
        **_EX1,
        "eps_list": [2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7],
    },
    "RandomRTEComparison": {
        **_RANDOM,
        "eps_list": [2.0**-5, 2.0**-6, 2.0**-7],
        "ensemble": {"n_samples": 500, "distribution": "gaussian"},
    },
    "ScalingStudy": {
        **_RANDOM,
        "eps": 2.0**-5,
        "ensemble": {"n_samples": 300, "gammas": [1.0, 0.5, 0.4]},
    },
    "Custom": {},
}


def _deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _validate_keys(raw: dict):
    for key, val in raw.items():
        if key in _TOP_KEYS:
            continue
        if key in _SECTION_KEYS:
            if not isinstance(val, dict):
                raise ConfigError(f"config section [{key}] must be a table")
            for sub in val:
                if sub not in _SECTION_KEYS[key]:
                    raise ConfigError(f"unknown config key '{key}.{sub}'")
            continue
        raise ConfigError(f"unknown config key '{key}'")


def _coerce(key_path: str, want, val):
    if want is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"config key '{key_path}' must be a number")
        return float(val)
    if want is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"config key '{key_path}' must be an integer")
        return int(val)
    if want is bool:
        if not isinstance(val, bool):
            raise ConfigError(f"config key '{key_path}' must be a boolean")
        return val
    if want is str:
        if not isinstance(val, str):
            raise ConfigError(f"config key '{key_path}' must be a string")
        return val
    if want is list:
        if not isinstance(val, (list, tuple)):
            raise ConfigError(f"config key '{key_path}' must be a list")
        return list(val)
    raise ConfigError(f"unsupported schema type for '{key_path}'")  # pragma: no cover


def _typed(raw: dict) -> dict:
    out = {}
    for key, val in raw.items():
        if key in _TOP_KEYS:
            out[key] = _coerce(key, _TOP_KEYS[key], val)
        else:
            section = {}
            for sub, sval in val.items():
                section[sub] = _coerce(f"{key}.{sub}", _SECTION_KEYS[key][sub], sval)
            out[key] = section
    return out


def _parse_set_value(text: str):
    try:
        return _toml.loads(f"v = {text}")["v"]
    except _toml.TOMLDecodeError:
        return text  # bare string, e.g. --set mass.kind=constant


def _apply_sets(raw: dict, sets) -> dict:
    out = json.loads(json.dumps(raw))  # deep copy of plain data
    for item in sets or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, text = item.partition("=")
        key = key.strip()
        val = _parse_set_value(text.strip())
        parts = key.split(".")
        if len(parts) == 1:
            out[parts[0]] = val
        elif len(parts) == 2:
            out.setdefault(parts[0], {})
            if not isinstance(out[parts[0]], dict):
                raise ConfigError(f"config key '{parts[0]}' is not a section")
            out[parts[0]][parts[1]] = val
        else:
            raise ConfigError(f"--set key {key!r} nests too deeply")
    return out


def _load_raw(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    if path.suffix == ".json" or text.lstrip()[:1] == b"{":
        payload = json.loads(text.decode("utf-8"))
        if "config" in payload and isinstance(payload["config"], dict):
            return payload["config"]  # a run manifest
        return payload
    try:
        return _toml.loads(text.decode("utf-8"))
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc


def _build(merged: dict) -> ExperimentConfig:
    mass_args = dict(merged.get("mass", {}))
    if "windows" in mass_args:
        mass_args["windows"] = tuple(
            tuple(float(v) for v in pair) for pair in mass_args["windows"]
        )
    model = MassModel(**mass_args)
    packet = PacketSpec(**merged.get("packet", {}))
    corr = None
    if "field" in merged:
        corr = CorrelationSpec(**merged["field"])
    ens = EnsembleOptions(**{
        k: (tuple(v) if k == "gammas" else v)
        for k, v in merged.get("ensemble", {}).items()
    })
    eps_list = tuple(float(e) for e in merged.get("eps_list", ()))
    if ens.smoke:
        # CI smoke: fewer samples and only the two cheapest (largest) scales.
        ens_args = {k: getattr(ens, k) for k in (
            "master_seed", "distribution", "kl_threshold", "reference",
            "gammas", "max_failure_fraction", "smoke", "save_cov")}
        ens = EnsembleOptions(n_samples=min(32, ens.n_samples), **ens_args)
        if len(eps_list) > 2:
            eps_list = tuple(sorted(eps_list, reverse=True)[:2])
    out_section = merged.get("output", {})
    return ExperimentConfig(
        experiment=merged.get("experiment", "Custom"),
        L=merged.get("L", 1.0),
        T=merged.get("T", 0.5),
        eps=merged.get("eps"),
        eps_list=eps_list,
        rule=merged.get("rule", "packet"),
        output_times=tuple(float(t) for t in merged.get("output_times", ())),
        label=merged.get("label", ""),
        model=model,
        packet=packet,
        corr=corr,
        schrodinger=SchrodingerOptions(**merged.get("schrodinger", {})),
        liouville=LiouvilleOptions(**merged.get("liouville", {})),
        rte=RteOptions(**merged.get("rte", {})),
        ensemble=ens,
        out_dir=out_section.get("dir"),
    )


def parse_config(path=None, sets=()) -> ExperimentConfig:
    """Resolve a config from an optional file plus key=value overrides."""
    raw = _load_raw(path) if path else {}
    raw = _apply_sets(raw, sets)
    _validate_keys(raw)
    raw = _typed(raw)
    experiment = raw.get("experiment", "Custom")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    merged = _deep_merge(PRESETS[experiment], raw)
    merged["experiment"] = experiment
    try:
        return _build(merged)
    except TypeError as exc:  # unexpected dataclass kwarg ≈ schema bug
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Fully-resolved plain-data form; feeding it back through parse_config
    (as a manifest's "config" entry) rebuilds an identical configuration."""
    out = {
        "experiment": cfg.experiment,
        "L": cfg.L,
        "T": cfg.T,
        "eps_list": list(cfg.eps_list),
        "rule": cfg.rule,
        "output_times": list(cfg.output_times),
        "label": cfg.label,
        "mass": {
            k: (list(list(p) for p in v) if k == "windows" else v)
            for k, v in asdict(cfg.model).items()
            if k in _SECTION_KEYS["mass"]  # internal fields stay internal
        },
        "packet": asdict(cfg.packet),
        "schrodinger": {k: v for k, v in asdict(cfg.schrodinger).items()
                        if v is not None},
        "liouville": {k: v for k, v in asdict(cfg.liouville).items()
                      if v is not None},
        "rte": {k: v for k, v in asdict(cfg.rte).items() if v is not None},
        "ensemble": {
            k: (list(v) if k == "gammas" else v)
            for k, v in asdict(cfg.ensemble).items()
        },
    }
    if cfg.eps is not None:
        out["eps"] = cfg.eps
    if cfg.corr is not None:
        out["field"] = asdict(cfg.corr)
    if cfg.out_dir is not None:
        out["output"] = {"dir": cfg.out_dir}
    # a smoke config has already been scaled down; don't scale again on re-parse
    if out["ensemble"].get("smoke"):
        out["ensemble"]["smoke"] = False
    return out

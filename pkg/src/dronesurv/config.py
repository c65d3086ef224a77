"""Scenario configuration documents (YAML).

Every key is optional; omitted keys take the defaults below. Unknown keys
are rejected with their dotted path.

.. code-block:: yaml

    environment:   # propagation constants (urban defaults)
      a0: 43.93
      b0: 0.1581
      a1: 1.0
      b1: 3.0
      sigma_los_a: 10.39
      sigma_los_b: 0.05
      sigma_nlos_a: 29.6
      sigma_nlos_b: 0.03
      k_rice_0: 0.0
      k_rice_90: 15.0
    budget:
      frequency: 2.4e9
      ref_loss_db: null        # null -> free space at 1 m (40.05 dB at 2.4 GHz)
      tx_gain_db: 0.0
      rx_gain_db: 0.0
      noise_dbm: -110.0
      snr_threshold_db: 0.0
      margin_sigmas: 0.0
    deployment:
      center: [0.0, 0.0]
      side_l: 300.0
      altitude_h: 1000.0
    power:
      p_min_dbm: 0.0
      p_max_dbm: 20.0
      assumed_c_dbm: null      # null -> midpoint of [p_min_dbm, p_max_dbm]
      true_power_model: fixed  # fixed | uniform
      true_power_dbm: null     # null -> assumed_c_dbm
    zone:
      radius: 1000.0
      adr_height: 2.0
    simulation:
      fading_enabled: false
      detectable_only: false
      rho_max: 10000.0
    sweep:
      h: {start: 200.0, stop: 3000.0, step: 100.0}
      l: {start: 20.0, stop: 3000.0, step: 20.0}
      detection_h: {start: 10.0, stop: 3000.0, step: 10.0}
      theta_step: 1.0
      p_tx_min_dbm: -10.0
      adr_xy: [137.0, -52.0]
    trials: 10000
    seed: 2018
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from .channel import EnvironmentParams, LinkBudget
from .detection import TxPowerRange
from .montecarlo import Scenario

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class ConfigValueError(ConfigError):
    pass


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be > 0, got {self.step}")
        if self.stop < self.start:
            raise ValueError(f"grid stop {self.stop} is below start {self.start}")

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(v) for v in self.start + self.step * np.arange(n)]


@dataclass(frozen=True)
class SweepSettings:
    h: GridSpec = GridSpec(200.0, 3000.0, 100.0)
    l: GridSpec = GridSpec(20.0, 3000.0, 20.0)
    detection_h: GridSpec = GridSpec(10.0, 3000.0, 10.0)
    theta_step: float = 1.0
    p_tx_min_dbm: float = -10.0
    adr_xy: tuple[float, float] = (137.0, -52.0)

    def __post_init__(self):
        if not 0 < self.theta_step <= 90:
            raise ValueError(f"theta_step must be in (0, 90], got {self.theta_step}")


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    sweep: SweepSettings = field(default_factory=SweepSettings)


# section -> {key: kind}; kinds drive type checking
_NUM, _INT, _BOOL, _OPT_NUM, _PAIR, _STR, _GRID = "num", "int", "bool", "opt", "pair", "str", "grid"
SCHEMA: dict[str, Any] = {
    "environment": {k: _NUM for k in EnvironmentParams.__dataclass_fields__},
    "budget": {
        "frequency": _NUM,
        "ref_loss_db": _OPT_NUM,
        "tx_gain_db": _NUM,
        "rx_gain_db": _NUM,
        "noise_dbm": _NUM,
        "snr_threshold_db": _NUM,
        "margin_sigmas": _NUM,
    },
    "deployment": {"center": _PAIR, "side_l": _NUM, "altitude_h": _NUM},
    "power": {
        "p_min_dbm": _NUM,
        "p_max_dbm": _NUM,
        "assumed_c_dbm": _OPT_NUM,
        "true_power_model": _STR,
        "true_power_dbm": _OPT_NUM,
    },
    "zone": {"radius": _NUM, "adr_height": _NUM},
    "simulation": {"fading_enabled": _BOOL, "detectable_only": _BOOL, "rho_max": _NUM},
    "sweep": {
        "h": _GRID,
        "l": _GRID,
        "detection_h": _GRID,
        "theta_step": _NUM,
        "p_tx_min_dbm": _NUM,
        "adr_xy": _PAIR,
    },
    "trials": _INT,
    "seed": _INT,
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _coerce(path: str, kind: str, v):
    if kind == _NUM:
        if not _is_num(v):
            raise ConfigValueError(f"{path}: expected a number, got {v!r}")
        return float(v)
    if kind == _OPT_NUM:
        return None if v is None else _coerce(path, _NUM, v)
    if kind == _INT:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigValueError(f"{path}: expected an integer, got {v!r}")
        return v
    if kind == _BOOL:
        if not isinstance(v, bool):
            raise ConfigValueError(f"{path}: expected true/false, got {v!r}")
        return v
    if kind == _STR:
        if not isinstance(v, str):
            raise ConfigValueError(f"{path}: expected a string, got {v!r}")
        return v
    if kind == _PAIR:
        if not isinstance(v, (list, tuple)) or len(v) != 2 or not all(_is_num(x) for x in v):
            raise ConfigValueError(f"{path}: expected a pair of numbers, got {v!r}")
        return (float(v[0]), float(v[1]))
    if kind == _GRID:
        if not isinstance(v, dict):
            raise ConfigValueError(f"{path}: expected a mapping with start/stop/step, got {v!r}")
        extra = set(v) - {"start", "stop", "step"}
        if extra:
            raise UnknownKeyError(f"unknown key {path}.{sorted(extra)[0]}")
        missing = {"start", "stop", "step"} - set(v)
        if missing:
            raise ConfigValueError(f"{path}: missing {sorted(missing)[0]}")
        try:
            return GridSpec(*(_coerce(f"{path}.{k}", _NUM, v[k]) for k in ("start", "stop", "step")))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigValueError(f"{path}: {exc}") from None
    raise AssertionError(kind)


def _validate(doc: dict) -> dict:
    """Type-check ``doc`` against SCHEMA and return a normalized copy."""
    out: dict[str, Any] = {}
    for key, value in doc.items():
        if key not in SCHEMA:
            raise UnknownKeyError(f"unknown key {key}")
        spec = SCHEMA[key]
        if isinstance(spec, dict):
            if value is None:
                value = {}
            if not isinstance(value, dict):
                raise ConfigValueError(f"{key}: expected a mapping, got {value!r}")
            sec = {}
            for k, v in value.items():
                if k not in spec:
                    raise UnknownKeyError(f"unknown key {key}.{k}")
                sec[k] = _coerce(f"{key}.{k}", spec[k], v)
            out[key] = sec
        else:
            out[key] = _coerce(key, spec, value)
    return out


def _build(section: str, factory, kwargs):
    try:
        return factory(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        if not msg.startswith(section):
            msg = f"{section}: {msg}"
        raise ConfigValueError(msg) from None


def from_dict(doc: dict | None) -> RunConfig:
    d = _validate(doc or {})
    env = _build("environment", EnvironmentParams, d.get("environment", {}))
    budget = _build("budget", LinkBudget, d.get("budget", {}))
    p = dict(d.get("power", {}))
    model = p.pop("true_power_model", "fixed")
    true_p = p.pop("true_power_dbm", None)
    power = _build("power", TxPowerRange, p)
    dep = d.get("deployment", {})
    zone = d.get("zone", {})
    sim = d.get("simulation", {})
    kwargs = dict(
        power_range=power,
        env=env,
        budget=budget,
        true_power_model=model,
        true_power_dbm=true_p,
    )
    for src, dst in (("center", "center"), ("side_l", "side_l"), ("altitude_h", "altitude_h")):
        if src in dep:
            kwargs[dst] = dep[src]
    if "radius" in zone:
        kwargs["zone_radius"] = zone["radius"]
    if "adr_height" in zone:
        kwargs["adr_height"] = zone["adr_height"]
    kwargs.update(sim)
    for k in ("trials", "seed"):
        if k in d:
            kwargs[k] = d[k]
    section = "scenario"
    if "true_power_model" in d.get("power", {}) or "true_power_dbm" in d.get("power", {}):
        section = "power"
    scenario = _build(section, Scenario, kwargs)
    sweep = _build("sweep", SweepSettings, d.get("sweep", {}))
    return RunConfig(scenario, sweep)


def parse_config(document: str) -> RunConfig:
    """Parse and validate a YAML scenario document; empty text gives all defaults."""
    try:
        doc = yaml.safe_load(document) if document.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(f"malformed config document: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigSyntaxError("config document must be a mapping at the top level")
    return from_dict(doc)


def to_dict(cfg: RunConfig) -> dict:
    """Fully resolved config as plain data (no nulls left for derived values)."""
    s = cfg.scenario
    sw = cfg.sweep
    return {
        "environment": asdict(s.env),
        "budget": asdict(s.budget),
        "deployment": {"center": list(s.center), "side_l": s.side_l, "altitude_h": s.altitude_h},
        "power": {
            "p_min_dbm": s.power_range.p_min_dbm,
            "p_max_dbm": s.power_range.p_max_dbm,
            "assumed_c_dbm": s.power_range.assumed_c_dbm,
            "true_power_model": s.true_power_model,
            "true_power_dbm": s.true_power_dbm,
        },
        "zone": {"radius": s.zone_radius, "adr_height": s.adr_height},
        "simulation": {
            "fading_enabled": s.fading_enabled,
            "detectable_only": s.detectable_only,
            "rho_max": s.rho_max,
        },
        "sweep": {
            "h": asdict(sw.h),
            "l": asdict(sw.l),
            "detection_h": asdict(sw.detection_h),
            "theta_step": sw.theta_step,
            "p_tx_min_dbm": sw.p_tx_min_dbm,
            "adr_xy": list(sw.adr_xy),
        },
        "trials": s.trials,
        "seed": s.seed,
    }


def serialize(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def apply_overrides(doc: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted-path keys (``"power.p_min_dbm"``) in a copy of ``doc``."""
    out = copy.deepcopy(doc)
    for path, value in overrides.items():
        parts = path.split(".")
        node = out
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return out


def with_scenario(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, scenario=replace(cfg.scenario, **changes))

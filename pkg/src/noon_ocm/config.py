"""YAML experiment configuration.

Length and angle keys carry their unit in the name (``wavelength_nm``,
``pitch_um``, ``angle_mrad``); everything is converted to SI once, here.
Unknown keys are rejected with the full key path.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .fringe import ArrayGeometry, FringeConfig, GaussianEnvelope, SourceKind, SourceModel
from .sim import DetectorModel

PRESET_DIR = Path(__file__).with_name("presets")
PRESETS = ("figure1b", "figure3", "figure4")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


_SCHEMA = {
    "fringe": {
        "wavelength_nm": float,
        "angle_mrad": float,
        "period_um": float,
        "phase0_rad": float,
        "singles_visibility": float,
        "envelope": {"center_um": float, "sigma_um": float},
    },
    "geometry": {"pixel_count": int, "pitch_um": float, "core_width_um": float, "origin_um": float},
    "source": {
        "kind": str,
        "photon_number": int,
        "background_fraction": float,
        "background_singles_rate": float,
        "background_split": float,
    },
    "detector": {"efficiency": float, "number_resolving": bool, "dark_rate": float},
    "simulation": {
        "n_events": int,
        "n_pulses": int,
        "rng_seed": int,
        "n_streams": int,
        "emission_probability": float,
        "emit_partial": bool,
    },
    "analysis": {
        "accidental_subtraction": bool,
        "calibration_photons": int,
        "k_constraint": str,
        "k_value_per_mm": float,
        "joint_maps": bool,
    },
    "output": {"directory": str, "write_events": bool, "plots": bool},
    "runs": list,
}

_RUN_KEYS = {"name", "source", "detector", "simulation", "fringe"}

_DEFAULTS = {
    "fringe": {"wavelength_nm": 808.0, "phase0_rad": 0.0, "singles_visibility": 1.0, "envelope": None},
    "geometry": {"pixel_count": 11, "pitch_um": 250.0, "core_width_um": 0.0, "origin_um": 0.0},
    "source": {
        "kind": "classical",
        "photon_number": 1,
        "background_fraction": 0.0,
        "background_singles_rate": 0.01,
        "background_split": 0.5,
    },
    "detector": {"efficiency": 1.0, "number_resolving": True, "dark_rate": 0.0},
    "simulation": {"rng_seed": 0, "n_streams": 1, "emission_probability": 1.0, "emit_partial": False},
    "analysis": {
        "accidental_subtraction": False,
        "calibration_photons": 10_000_000,
        "k_constraint": "from-singles-fit",
        "joint_maps": False,
    },
    "output": {"directory": "noon_ocm_output", "write_events": True, "plots": True},
}


def _check(node, schema, path):
    if not isinstance(node, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(node).__name__}")
    for key, value in node.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(where, "unknown key")
        kind = schema[key]
        if value is None:
            continue
        if isinstance(kind, dict):
            _check(value, kind, where)
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(where, f"expected a number, got {value!r}")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                if isinstance(value, float) and value.is_integer():
                    node[key] = int(value)
                else:
                    raise ConfigError(where, f"expected an integer, got {value!r}")
        elif not isinstance(value, kind):
            raise ConfigError(where, f"expected {kind.__name__}, got {value!r}")


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunSpec:
    name: str
    source: SourceModel
    fringe: FringeConfig
    detector: DetectorModel
    simulation: dict


@dataclass
class ExperimentConfig:
    geometry: ArrayGeometry
    runs: list
    analysis: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def output_dir(self) -> Path:
        return Path(self.output["directory"])


# constructor argument -> config key, for naming the offending key in errors
_KEY_NAMES = {
    "pitch": "pitch_um",
    "core_width": "core_width_um",
    "pixel_count": "pixel_count",
    "singles_visibility": "singles_visibility",
    "angle": "angle_mrad",
    "efficiency": "efficiency",
    "dark_rate": "dark_rate",
    "photon_number": "photon_number",
    "background_fraction": "background_fraction",
    "background_singles_rate": "background_singles_rate",
    "background_split": "background_split",
}


def _build(section, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        field_name = msg.split(" ", 1)[0]
        if field_name in _KEY_NAMES and not section.endswith(_KEY_NAMES[field_name]):
            section = f"{section}.{_KEY_NAMES[field_name]}"
        raise ConfigError(section, msg) from None


def _fringe(d, where):
    um = 1e-6
    if d.get("angle_mrad") is not None and d.get("period_um") is not None:
        raise ConfigError(where, "give angle_mrad or period_um, not both")
    env = None
    if d.get("envelope"):
        e = d["envelope"]
        for k in ("center_um", "sigma_um"):
            if e.get(k) is None:
                raise ConfigError(f"{where}.envelope.{k}", "required")
        env = _build(f"{where}.envelope.sigma_um", GaussianEnvelope, center=e["center_um"] * um, sigma=e["sigma_um"] * um)
    wavelength = d["wavelength_nm"] * 1e-9
    common = dict(phase0=d["phase0_rad"], singles_visibility=d["singles_visibility"], envelope=env)
    if wavelength <= 0:
        raise ConfigError(f"{where}.wavelength_nm", f"must be positive, got {d['wavelength_nm']}")
    if d.get("period_um") is not None:
        if d["period_um"] * um < wavelength / 2:
            raise ConfigError(f"{where}.period_um", "shorter than half a wavelength")
        return _build(where, FringeConfig.from_period, period=d["period_um"] * um, wavelength=wavelength, **common)
    if d.get("angle_mrad") is None:
        raise ConfigError(f"{where}.angle_mrad", "required (or period_um)")
    return _build(where, FringeConfig, wavelength=wavelength, angle=d["angle_mrad"] * 1e-3, **common)


def parse_config(raw: dict, *, output_dir: Optional[str] = None) -> ExperimentConfig:
    raw = copy.deepcopy(raw or {})
    _check(raw, _SCHEMA, "")
    merged = _merge(_DEFAULTS, {k: v for k, v in raw.items() if k != "runs"})
    if output_dir:
        merged["output"]["directory"] = str(output_dir)
    g = merged["geometry"]
    um = 1e-6
    geometry = _build(
        "geometry",
        ArrayGeometry,
        pixel_count=g["pixel_count"],
        pitch=g["pitch_um"] * um,
        core_width=g["core_width_um"] * um,
        origin=g["origin_um"] * um,
    )
    run_entries = raw.get("runs") or [{}]
    runs = []
    for i, entry in enumerate(run_entries):
        where = f"runs[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(where, "expected a mapping")
        for key in entry:
            if key not in _RUN_KEYS:
                raise ConfigError(f"{where}.{key}", "unknown key")
        for key in ("source", "detector", "simulation", "fringe"):
            if key in entry:
                _check(entry[key], _SCHEMA[key], f"{where}.{key}")
        sec = {k: _merge(merged[k], entry.get(k)) for k in ("source", "detector", "simulation", "fringe")}
        s = sec["source"]
        try:
            kind = SourceKind(s["kind"])
        except ValueError:
            raise ConfigError(f"{where}.source.kind", f"must be one of classical, noon, mixed; got {s['kind']!r}") from None
        source = _build(
            f"{where}.source",
            SourceModel,
            kind=kind,
            photon_number=s["photon_number"],
            background_fraction=s["background_fraction"],
            background_singles_rate=s["background_singles_rate"],
            background_split=s["background_split"],
        )
        detector = _build(f"{where}.detector", DetectorModel, **sec["detector"])
        sim = sec["simulation"]
        if (sim.get("n_events") is None) == (sim.get("n_pulses") is None):
            raise ConfigError(f"{where}.simulation", "set exactly one of n_events / n_pulses")
        name = entry.get("name") or f"{kind.value}_n{source.photon_number}"
        runs.append(RunSpec(name, source, _fringe(sec["fringe"], f"{where}.fringe"), detector, sim))
    names = [r.name for r in runs]
    if len(set(names)) != len(names):
        raise ConfigError("runs", f"run names must be unique, got {names}")
    a = merged["analysis"]
    if a["k_constraint"] not in ("from-singles-fit", "explicit", "none"):
        raise ConfigError("analysis.k_constraint", "must be from-singles-fit, explicit or none")
    if a["k_constraint"] == "explicit" and a.get("k_value_per_mm") is None:
        raise ConfigError("analysis.k_value_per_mm", "required when k_constraint is explicit")
    return ExperimentConfig(geometry, runs, a, merged["output"], raw)


def load_config(path, *, output_dir=None) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from None
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    return parse_config(raw, output_dir=output_dir)


def load_preset(name, *, output_dir=None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return load_config(PRESET_DIR / f"{name}.yaml", output_dir=output_dir)

"""Scenario files: YAML documents describing one figure-style computation."""

from __future__ import annotations

import copy
import itertools
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..fullsim import LONG_RUNNING, PRESETS

SCHEMA_VERSION = 1
MODELS = ("TC", "Dicke", "FullSim", "CatCompare")
SCAN_AXES = ("N", "r", "F_c", "g", "q_tilde", "delta_q_tilde")
SERIES = ("qfi", "unconditional_qfi", "qfi_large_n", "qfi_xfa", "prob_density",
          "weighted_qfi", "fidelity", "norm_drift", "excitation_drift", "top_fock")
FIDELITY_TARGETS = ("dicke_x0", "z_cat")
TIME_UNITS = ("1/omega", "1/(g*sqrt(N))")
PRESET_DIR_ENV = "BSVHERALD_PRESET_DIR"


class ScenarioError(ValueError):
    """Schema violation; ``path`` points at the offending entry."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "description": "",
    "params": {"omega": 1.0},
    "herald": {"phi": 0.0, "q_tilde": 0.0, "delta_q_tilde": 0.0, "n_q": None, "q": None},
    "time": {"start": 0.0, "stop": 40.0, "num": 401, "values": None, "units": "1/omega"},
    "scan": {},
    "outputs": {"series": ["qfi"], "fidelity_target": None, "wigner_snapshots": None,
                "fits": []},
    "numerics": {"method": "auto", "n_points": None, "cutoff_sigmas": 8.0, "preset": None,
                 "dt": None, "n_max": None, "frame": "lab",
                 "dt_classical": 0.01, "leakage_tol": 1e-8, "sim_model": "TC"},
    "budget_seconds": None,
}


def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults and path not in ("params", "scan") and not (
                path == "" and key in ("name", "model")):
            raise ScenarioError(f"{path}.{key}" if path else key, "unknown key")
        if isinstance(defaults.get(key), dict) and key in ("params", "herald", "time", "scan",
                                                           "outputs", "numerics"):
            if not isinstance(val, dict):
                raise ScenarioError(f"{path}.{key}" if path else key, "expected a mapping")
            out[key] = _merge(defaults[key], val, key)
        else:
            out[key] = val
    return out


def _number(value, path: str, positive: bool = False, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if integer and int(value) != value:
        raise ScenarioError(path, "must be an integer")
    if positive and value <= 0:
        raise ScenarioError(path, "must be positive")
    return int(value) if integer else float(value)


@dataclass
class Scenario:
    name: str
    model: str
    params: dict
    herald: dict
    time: dict
    scan: dict
    outputs: dict
    numerics: dict
    budget_seconds: float | None = None
    description: str = ""
    schema_version: int = SCHEMA_VERSION
    source: str | None = field(default=None, compare=False)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> Scenario:
        if not isinstance(data, dict):
            raise ScenarioError("<root>", "scenario must be a mapping")
        for req in ("name", "model", "params"):
            if req not in data:
                raise ScenarioError(req, "required key missing")
        cfg = _merge(_DEFAULTS, data, "")
        sc = cls(source=source, **cfg)
        sc.validate()
        return sc

    @classmethod
    def load(cls, path) -> Scenario:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ScenarioError(str(path), f"not valid YAML: {exc}") from exc
        return cls.from_dict(data, source=str(path))

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "name": self.name,
                "description": self.description, "model": self.model,
                "params": self.params, "herald": self.herald, "time": self.time,
                "scan": self.scan, "outputs": self.outputs, "numerics": self.numerics,
                "budget_seconds": self.budget_seconds}

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ScenarioError("schema_version", f"unsupported version {self.schema_version}")
        if self.model not in MODELS:
            raise ScenarioError("model", f"must be one of {MODELS}, got {self.model!r}")
        p = self.params
        for key in p:
            if key not in ("N", "g", "r", "F_c", "omega", "alpha0"):
                raise ScenarioError(f"params.{key}", "unknown parameter")
        for key in ("N", "g"):
            if key not in p and key not in self.scan:
                raise ScenarioError(f"params.{key}", "required (or give it as a scan axis)")
        if "N" in p:
            n = _number(p["N"], "params.N", positive=True, integer=True)
            if n % 2:
                raise ScenarioError("params.N", "N must be even")
        if "g" in p:
            _number(p["g"], "params.g", positive=True)
        _number(p["omega"], "params.omega", positive=True)
        has_r = "r" in p or "r" in self.scan
        has_fc = "F_c" in p or "F_c" in self.scan
        if self.model == "CatCompare":
            if "alpha0" not in p:
                raise ScenarioError("params.alpha0", "required for CatCompare")
        elif has_r == has_fc:
            raise ScenarioError("params", "give exactly one of r or F_c")
        for key, vals in self.scan.items():
            path = f"scan.{key}"
            if key not in SCAN_AXES:
                raise ScenarioError(path, f"unknown scan axis; known: {SCAN_AXES}")
            if not isinstance(vals, list):
                raise ScenarioError(path, "expected a list")
            for i, v in enumerate(vals):
                _number(v, f"{path}[{i}]", integer=(key == "N"))
            if key in p:
                raise ScenarioError(path, f"{key} is both a parameter and a scan axis")
        h = self.herald
        for key in ("phi", "q_tilde", "delta_q_tilde"):
            _number(h[key], f"herald.{key}")
        if h["delta_q_tilde"] < 0:
            raise ScenarioError("herald.delta_q_tilde", "must be >= 0")
        t = self.time
        if t["units"] not in TIME_UNITS:
            raise ScenarioError("time.units", f"must be one of {TIME_UNITS}")
        if t["values"] is not None:
            if not isinstance(t["values"], list) or not t["values"]:
                raise ScenarioError("time.values", "expected a non-empty list")
            for i, v in enumerate(t["values"]):
                _number(v, f"time.values[{i}]")
        else:
            _number(t["start"], "time.start")
            _number(t["stop"], "time.stop")
            _number(t["num"], "time.num", positive=True, integer=True)
            if t["stop"] < t["start"]:
                raise ScenarioError("time.stop", "must be >= time.start")
        o = self.outputs
        if not isinstance(o["series"], list):
            raise ScenarioError("outputs.series", "expected a list")
        for i, s in enumerate(o["series"]):
            if s not in SERIES:
                raise ScenarioError(f"outputs.series[{i}]", f"unknown series {s!r}")
        if "fidelity" in o["series"] and o["fidelity_target"] not in FIDELITY_TARGETS:
            raise ScenarioError("outputs.fidelity_target", f"must be one of {FIDELITY_TARGETS}")
        w = o["wigner_snapshots"]
        if w is not None:
            if not isinstance(w, dict) or "times" not in w:
                raise ScenarioError("outputs.wigner_snapshots", "expected a mapping with 'times'")
        for i, fit in enumerate(o["fits"]):
            path = f"outputs.fits[{i}]"
            if not isinstance(fit, dict) or "name" not in fit or "kind" not in fit:
                raise ScenarioError(path, "expected a mapping with 'name' and 'kind'")
            if fit["kind"] not in ("power_law", "appendix_a"):
                raise ScenarioError(f"{path}.kind", "must be power_law or appendix_a")
            if fit.get("series") not in SERIES:
                raise ScenarioError(f"{path}.series", "unknown series")
            if fit["kind"] == "power_law" and fit.get("axis") not in SCAN_AXES:
                raise ScenarioError(f"{path}.axis", "unknown scan axis")
        n = self.numerics
        if n["method"] not in ("auto", "closed_form", "engine", "floquet"):
            raise ScenarioError("numerics.method", "must be auto, closed_form, engine or floquet")
        if n["sim_model"] not in ("TC", "Dicke"):
            raise ScenarioError("numerics.sim_model", "must be TC or Dicke")
        if n["frame"] not in ("lab", "rotating"):
            raise ScenarioError("numerics.frame", "must be lab or rotating")
        if self.model == "FullSim":
            preset = n["preset"]
            if preset is None and (n["dt"] is None or n["n_max"] is None):
                raise ScenarioError("numerics", "FullSim needs a preset or both dt and n_max")
            if preset is not None:
                resolve_preset(preset, self.params.get("g"), path="numerics.preset")
        if self.budget_seconds is not None:
            _number(self.budget_seconds, "budget_seconds", positive=True)

    # -- derived quantities ----------------------------------------------

    def scan_points(self) -> list[dict]:
        """Cartesian product of the scan axes, in file order (one empty point if none)."""
        keys = list(self.scan)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.scan[k] for k in keys))]

    def point_params(self, point: dict) -> dict:
        """Resolved physical parameters at one scan point; F_c = g e^r fixes the other."""
        p = {**self.params, **{k: v for k, v in point.items() if k in ("N", "r", "F_c", "g")}}
        p["N"] = int(p["N"])
        if self.model != "CatCompare":
            if "F_c" in p and "r" not in p:
                p["r"] = math.log(p["F_c"] / p["g"])
            else:
                p["F_c"] = p["g"] * math.exp(p["r"])
        h = dict(self.herald)
        for k in ("q_tilde", "delta_q_tilde"):
            if k in point:
                h[k] = point[k]
        p["herald"] = h
        return p

    def times(self, params: dict) -> np.ndarray:
        t = self.time
        if t["values"] is not None:
            ts = np.array(t["values"], float)
        else:
            ts = np.linspace(t["start"], t["stop"], int(t["num"]))
        if t["units"] == "1/(g*sqrt(N))":
            ts = ts / (params["g"] * math.sqrt(params["N"]))
        return ts


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def available_presets() -> dict[str, dict]:
    """Built-in presets, overridden or extended by YAML files in $BSVHERALD_PRESET_DIR."""
    out = {k: {**v, "long_running": k in LONG_RUNNING} for k, v in PRESETS.items()}
    d = os.environ.get(PRESET_DIR_ENV)
    if d:
        for f in sorted(Path(d).glob("*.yaml")):
            data = yaml.safe_load(f.read_text()) or {}
            for name, entry in data.items():
                if not isinstance(entry, dict) or "dt" not in entry or "n_max" not in entry:
                    raise ScenarioError(f"{f}:{name}", "preset needs dt and n_max")
                out[name] = {"dt": float(entry["dt"]), "n_max": int(entry["n_max"]),
                             "long_running": bool(entry.get("long_running", False))}
    return out


def resolve_preset(name: str, g: float | None = None, path: str = "preset") -> tuple[str, dict]:
    """Map 'paper' to the coupling-specific preset; return (resolved name, settings)."""
    presets = available_presets()
    if name == "paper":
        if g is None:
            raise ScenarioError(path, "the paper preset needs a fixed coupling g")
        name = f"paper-g{g:g}"
    if name not in presets:
        raise ScenarioError(path, f"unknown preset {name!r}; known: {sorted(presets)}")
    return name, presets[name]


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------


def bundled_dir() -> Path:
    return Path(str(resources.files("bsvherald") / "scenarios"))


def find_scenario(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    cand = bundled_dir() / f"{name_or_path}.scenario"
    if cand.exists():
        return cand
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")

"""Check a results bundle against an expectations file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .bundle import FITS, read_series
from .scenario import bundled_dir

KINDS = ("value_at", "fit", "fidelity", "monotonic", "bound")


class VerifyError(ValueError):
    pass


@dataclass
class CheckResult:
    name: str
    kind: str
    passed: bool
    measured: object
    expected: object
    detail: str = ""


@dataclass
class Report:
    bundle: str
    expectations: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"bundle": self.bundle, "expectations": self.expectations,
                "passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured={c.measured} "
                f"expected={c.expected}{' (' + c.detail + ')' if c.detail else ''}"
                for c in self.checks]


def find_expectations(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    cand = bundled_dir() / f"{name_or_path}.expect.yaml"
    if cand.exists():
        return cand
    raise FileNotFoundError(f"no expectations file named {name_or_path!r}")


class _Bundle:
    def __init__(self, path: Path):
        self.path = path
        self._series = {}
        self._fits = None

    def series(self, name: str, check: str):
        if name not in self._series:
            try:
                self._series[name] = read_series(self.path, name)
            except FileNotFoundError:
                raise VerifyError(f"check {check!r} references missing series {name!r}") from None
        return self._series[name]

    def fits(self, check: str) -> dict:
        if self._fits is None:
            f = self.path / FITS
            if not f.exists():
                raise VerifyError(f"check {check!r} references fits but the bundle has none")
            self._fits = json.loads(f.read_text())
        return self._fits

    def select(self, name: str, where: dict | None, check: str):
        data = self.series(name, check)
        where = where or {}
        hits = [(k, v) for k, v in data.items()
                if all(any(a == ax and abs(val - float(want)) <= 1e-9 * max(1, abs(val))
                           for ax, val in k) for a, want in where.items())]
        if not hits:
            raise VerifyError(f"check {check!r}: no scan point of {name!r} matches {where}")
        return hits


def _at(times, values, t):
    return float(values[int(np.argmin(np.abs(times - t)))])


def _field(obj, dotted: str, check: str):
    for part in dotted.split("."):
        if not isinstance(obj, dict) or part not in obj:
            raise VerifyError(f"check {check!r}: fit field {dotted!r} not found")
        obj = obj[part]
    return obj


def _metric(times, values, metric: dict, bundle: _Bundle, key, check: str):
    kind = metric.get("type", "value_at")
    if kind == "value_at":
        return _at(times, values, metric["t"])
    if kind == "max":
        return float(np.nanmax(values))
    if kind == "argmax_t":
        return float(times[int(np.nanargmax(values))])
    if kind == "crossing":
        if "relative_to" in metric:
            ref = dict(bundle.series(metric["relative_to"], check))
            other = ref.get(key)
            if other is None:
                raise VerifyError(f"check {check!r}: reference series lacks point {key}")
            thr = metric.get("factor", 1.0) * other[1]
        else:
            thr = np.full_like(values, float(metric["threshold"]))
        above = np.nonzero(values > thr)[0]
        return float(times[above[0]]) if above.size else float("inf")
    raise VerifyError(f"check {check!r}: unknown metric type {kind!r}")


def _check(c: dict, b: _Bundle) -> CheckResult:
    name, kind = c.get("name", "?"), c.get("kind")
    if kind not in KINDS:
        raise VerifyError(f"check {name!r}: unknown kind {kind!r}; known {KINDS}")
    if kind in ("value_at", "fidelity"):
        series = c.get("series", "fidelity" if kind == "fidelity" else None)
        (key, (ts, vs)), *rest = b.select(series, c.get("where"), name)
        if rest:
            raise VerifyError(f"check {name!r}: 'where' matches several scan points")
        val = _at(ts, vs, c["t"])
        if kind == "fidelity":
            return CheckResult(name, kind, bool(val > c["min"]), val, f"> {c['min']}")
        tol = c.get("tol", abs(c["expected"]) * c.get("rtol", 0.0))
        return CheckResult(name, kind, bool(abs(val - c["expected"]) <= tol), val,
                           f"{c['expected']} +- {tol}")
    if kind == "fit":
        val = float(_field(b.fits(name), f"{c['fit']}.{c.get('field', 'exponent')}", name))
        return CheckResult(name, kind, bool(abs(val - c["expected"]) <= c["tol"]), val,
                           f"{c['expected']} +- {c['tol']}")
    if kind == "bound":
        vals = []
        for _, (ts, vs) in b.select(c["series"], c.get("where"), name):
            if "t_max" in c:
                vs = vs[ts <= c["t_max"]]
            vals.append(np.nanmax(vs) if c.get("stat", "max") == "max" else np.nanmin(vs))
        stat = max(vals) if c.get("stat", "max") == "max" else min(vals)
        ok = ("upper" not in c or stat < c["upper"]) and ("lower" not in c or stat > c["lower"])
        return CheckResult(name, kind, bool(ok), float(stat),
                           {k: c[k] for k in ("lower", "upper") if k in c})
    # monotonic
    direction = c.get("direction", "increasing")
    strict = c.get("strict", True)
    if "fit" in c:
        seq = [float(v) for v in _field(b.fits(name), f"{c['fit']}.{c['field']}", name)]
        order = list(range(len(seq)))
    else:
        axis = c["axis"]
        hits = b.select(c["series"], c.get("where"), name)
        pairs = []
        for key, (ts, vs) in hits:
            x = dict(key)[axis]
            pairs.append((x, _metric(ts, vs, c.get("metric", {}), b, key, name)))
        pairs.sort()
        order = [p[0] for p in pairs]
        seq = [p[1] for p in pairs]
    d = np.diff(seq)
    if direction == "decreasing":
        d = -d
    ok = bool(np.all(d > 0) if strict else np.all(d >= 0))
    return CheckResult(name, kind, ok, seq, f"{'strictly ' if strict else ''}{direction}",
                       f"ordered by {order}")


def verify(bundle, expectations) -> Report:
    bundle = Path(bundle)
    exp_path = find_expectations(str(expectations))
    spec = yaml.safe_load(exp_path.read_text()) or {}
    checks = spec.get("checks")
    if not isinstance(checks, list) or not checks:
        raise VerifyError(f"{exp_path}: expected a non-empty 'checks' list")
    b = _Bundle(bundle)
    return Report(str(bundle), str(exp_path), [_check(c, b) for c in checks])

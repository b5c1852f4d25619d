"""Results bundles: manifest, one CSV per series, Wigner JSON dumps and fits."""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from .. import __version__
from ..fullsim import fit_power_law, scan_report
from .compute import PointResult, compute_point
from .scenario import Scenario, ScenarioError

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
FITS = "fits.json"


def fmt(x) -> str:
    """17 significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.16e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _map_points(scenario: Scenario, points, jobs: int, preset: str | None):
    fn = partial(compute_point, scenario.to_dict(), preset_override=preset)
    if jobs <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as ex:
        # map keeps input order, so the output is independent of the job count
        return list(ex.map(fn, points))


def _write_series(out: Path, scenario: Scenario, results: list[PointResult]) -> list[str]:
    axes = list(scenario.scan)
    files = []
    for name in scenario.outputs["series"]:
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(axes + ["t", "value"])
            for res in results:
                key = [fmt(res.point[a]) for a in axes]
                for t, v in zip(res.times, res.series[name]):
                    w.writerow(key + [fmt(t), fmt(v)])
        files.append(path.name)
    return files


def _write_wigner(out: Path, scenario: Scenario, results: list[PointResult]) -> list[str]:
    files = []
    if not scenario.outputs["wigner_snapshots"]:
        return files
    wdir = out / "wigner"
    wdir.mkdir(exist_ok=True)
    for k, res in enumerate(results):
        for t, grid in res.wigner:
            name = f"point{k:03d}_t{t:.6g}.json"
            _dump(wdir / name, {"point": res.point, "t": t, "theta": grid.thetas,
                                "phi": grid.phis, "values": grid.values,
                                # plots show the sphere with the z axis flipped
                                "z_inverted": True})
            files.append(f"wigner/{name}")
    return files


def _point_stat(times, values, fit: dict) -> float:
    if "t" in fit:
        return float(values[int(np.argmin(np.abs(times - fit["t"])))])
    if fit.get("stat", "final") == "max":
        return float(np.nanmax(values))
    return float(values[-1])


def compute_fits(scenario: Scenario, results: list[PointResult]) -> dict:
    fits = {}
    for spec in scenario.outputs["fits"]:
        name, series = spec["name"], spec["series"]
        if series not in scenario.outputs["series"]:
            raise ScenarioError(f"outputs.fits.{name}", f"series {series!r} is not computed")
        if spec["kind"] == "power_law":
            axis = spec["axis"]
            if axis not in scenario.scan:
                raise ScenarioError(f"outputs.fits.{name}.axis", f"{axis!r} is not a scan axis")
            x = [res.point[axis] for res in results]
            y = [_point_stat(res.times, res.series[series], spec) for res in results]
            pf = fit_power_law(x, y)
            fits[name] = {"kind": "power_law", "axis": axis, "x": x, "y": y,
                          "coefficient": pf.coefficient, "exponent": pf.exponent,
                          "residuals": pf.residuals}
        else:
            if set(scenario.scan) != {"N", "r"}:
                raise ScenarioError(f"outputs.fits.{name}", "appendix_a needs scan axes N and r")
            max_q, t_pk = {}, {}
            for res in results:
                v = res.series[series]
                i = int(np.nanargmax(v))
                max_q[(res.point["N"], res.point["r"])] = float(v[i])
                t_pk[(res.point["N"], res.point["r"])] = float(res.times[i])
            rep = scan_report(scenario.scan["N"], scenario.scan["r"], scenario.params["g"],
                              max_q, t_pk)
            body = rep.to_json()
            body["kind"] = "appendix_a"
            body["best_r_c"] = [rep.best[N][1] for N in rep.N_list]
            body["best_max_qfi_density"] = [rep.best[N][0] for N in rep.N_list]
            body["exponent"] = rep.power_law.exponent
            fits[name] = body
    return fits


def run(scenario, out_dir, jobs: int | None = None, preset: str | None = None) -> Path:
    """Run a scenario (path or Scenario) and write its bundle into ``out_dir``."""
    sc = scenario if isinstance(scenario, Scenario) else Scenario.load(scenario)
    jobs = jobs or os.cpu_count() or 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    points = sc.scan_points()
    results = _map_points(sc, points, jobs, preset)
    series_files = _write_series(out, sc, results)
    wigner_files = _write_wigner(out, sc, results)
    fits = compute_fits(sc, results)
    if fits:
        _dump(out / FITS, fits)
    wall = time.perf_counter() - t0
    within = None if sc.budget_seconds is None else wall <= sc.budget_seconds
    if within is False:
        log.warning("scenario %s took %.1f s, over its %.0f s budget", sc.name, wall,
                    sc.budget_seconds)
    manifest = {
        "schema_version": sc.schema_version,
        "engine": {"name": "bsvherald", "version": __version__, "python": platform.python_version(),
                   "numpy": np.__version__},
        "scenario": sc.to_dict(),
        "scenario_file": sc.source,
        "preset_override": preset,
        "points": [{"point": r.point, "info": r.info} for r in results],
        "series_files": series_files,
        "wigner_files": wigner_files,
        "fits_file": FITS if fits else None,
        "wall_time_s": wall,
        "budget_seconds": sc.budget_seconds,
        "within_budget": within,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _dump(out / MANIFEST, manifest)
    return out


def read_series(bundle, name: str) -> dict[tuple, tuple[np.ndarray, np.ndarray]]:
    """{scan point as tuple of (axis, value) pairs: (times, values)}."""
    path = Path(bundle) / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    header, rows = rows[0], rows[1:]
    axes = header[:-2]
    groups: dict[tuple, list] = {}
    for row in rows:
        key = tuple((a, float(v)) for a, v in zip(axes, row[:-2]))
        groups.setdefault(key, []).append((float(row[-2]), float(row[-1])))
    return {k: (np.array([a for a, _ in v]), np.array([b for _, b in v])) for k, v in groups.items()}

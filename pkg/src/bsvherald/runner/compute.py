"""Series computation for one scan point of a scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dicke import DickeModelParams, DickePropagator, FloquetMagnusPropagator, z_cat_reference
from ..fullsim import (SimConfig, build_hamiltonian_action, evolve, herald_quadrature_exact,
                       initial_state, partial_trace_matter, top_fock_occupation)
from ..observables import SphereGrid, qfi, spin_wigner
from ..photon import HeraldSpec
from ..spin import DickeKet, dicke_state, ground_state
from ..tc import TcParams, TcPropagator, tc_heralded_closed_form, tc_qfi_exact, tc_qfi_large_n
from ..xfa import (cat_heralded_vector, clean_density, heralded_density_finite_resolution,
                   heralded_weights, make_field_grid, suggest_n_points, unconditional_weights)
from .scenario import Scenario, ScenarioError, resolve_preset


class RunError(RuntimeError):
    pass


@dataclass
class PointResult:
    point: dict
    times: np.ndarray
    series: dict = field(default_factory=dict)
    wigner: list = field(default_factory=list)  # (t, SphereGrid)
    info: dict = field(default_factory=dict)


def _fidelity_target(name: str | None, N: int) -> DickeKet | None:
    if name == "dicke_x0":
        return dicke_state(N, 0, "x")
    if name == "z_cat":
        return z_cat_reference(N)
    return None


def _overlap(target: DickeKet, state) -> float:
    v = target.z_amps()
    if isinstance(state, DickeKet):
        return float(abs(np.vdot(v, state.normalized().z_amps())) ** 2)
    return float(np.vdot(v, state @ v).real)


def _qfi_value(state) -> float:
    return qfi(state)[0]


class _Collector:
    """Accumulates per-time values and Wigner snapshots for one point."""

    def __init__(self, sc: Scenario, params: dict, times: np.ndarray):
        self.wanted = set(sc.outputs["series"])
        self.N = params["N"]
        self.times = times
        self.values = {s: np.full(times.size, np.nan) for s in self.wanted}
        self.target = _fidelity_target(sc.outputs["fidelity_target"], self.N)
        w = sc.outputs["wigner_snapshots"]
        self.wigner_idx = {}
        self.wigner = []
        if w:
            self.sphere = SphereGrid.uniform(int(w.get("n_theta", 91)), int(w.get("n_phi", 181)))
            for tw in w["times"]:
                i = int(np.argmin(np.abs(times - tw)))
                self.wigner_idx[i] = float(tw)

    def put(self, name: str, i: int, value: float) -> None:
        if name in self.values:
            self.values[name][i] = value

    def state(self, i: int, state, prob: float | None = None) -> None:
        """Record the observables derived from the heralded state at index i."""
        if "qfi" in self.wanted or "weighted_qfi" in self.wanted:
            f = _qfi_value(state)
            self.put("qfi", i, f / self.N)
            if prob is not None:
                self.put("weighted_qfi", i, f * prob)
        if prob is not None:
            self.put("prob_density", i, prob)
        if self.target is not None:
            self.put("fidelity", i, _overlap(self.target, state))
        if i in self.wigner_idx:
            rho = state.normalized().density() if isinstance(state, DickeKet) else state
            self.wigner.append((float(self.times[i]), spin_wigner(rho, self.sphere)))


def _grid_for(sc: Scenario, params: dict, times: np.ndarray, extra_frequency: float = 0.0):
    h = params["herald"]
    n = sc.numerics["n_points"] or suggest_n_points(
        params["F_c"], float(times.max()), params["N"],
        q_tilde_max=abs(h["q_tilde"]) + h["delta_q_tilde"] / 2,
        cutoff_sigmas=sc.numerics["cutoff_sigmas"], extra_frequency=extra_frequency)
    return make_field_grid(params["F_c"], int(n), sc.numerics["cutoff_sigmas"])


def _tc_point(sc: Scenario, params: dict, times: np.ndarray, col: _Collector) -> dict:
    N, g = params["N"], params["g"]
    h = params["herald"]
    tcp = TcParams(N, g, params["r"], params["omega"])
    herald = HeraldSpec.from_scaled(h["q_tilde"], h["delta_q_tilde"], g=g, phi=h["phi"])
    psi0 = ground_state(N)
    method = sc.numerics["method"]
    if method == "auto":
        method = "closed_form" if herald.ideal else "engine"
    if method == "closed_form" and not herald.ideal:
        raise ScenarioError("numerics.method", "closed_form needs an ideal herald (delta_q_tilde = 0)")
    if method == "floquet":
        raise ScenarioError("numerics.method", "floquet applies to the Dicke model only")
    need_grid = method == "engine" or "unconditional_qfi" in col.wanted
    grid = _grid_for(sc, params, times) if need_grid else None
    prop = TcPropagator(tcp)
    for i, t in enumerate(times):
        if method == "closed_form":
            st = tc_heralded_closed_form(tcp, h["q_tilde"], t, psi0)
            col.state(i, st.ket, st.prob_density)
            col.put("qfi", i, tc_qfi_exact(tcp, h["q_tilde"], t) / N)
            col.put("weighted_qfi", i, tc_qfi_exact(tcp, h["q_tilde"], t) * st.prob_density)
            psi = prop.evolve_many(grid.F_values, t, psi0) if grid is not None else None
        else:
            psi = prop.evolve_many(grid.F_values, t, psi0)
            if herald.ideal:
                amps = heralded_weights(grid, h["q_tilde"])[0] @ psi
                ket = DickeKet(N, amps, "z")
                col.state(i, ket, ket.norm**2)
            else:
                hd = heralded_density_finite_resolution(prop, grid, psi0, herald, t, h["n_q"])
                col.state(i, hd.rho, hd.bin_prob)
        if psi is not None and "unconditional_qfi" in col.wanted:
            rho = clean_density((psi.T * unconditional_weights(grid)) @ psi.conj())
            col.put("unconditional_qfi", i, _qfi_value(rho) / N)
        col.put("qfi_large_n", i, tc_qfi_large_n(tcp, t) / N)
        col.put("qfi_xfa", i, tc_qfi_exact(tcp, h["q_tilde"], t) / N)
    return {"F_c": tcp.F_c, "n_points": grid.size if grid else None, "method": method}


def _dicke_point(sc: Scenario, params: dict, times: np.ndarray, col: _Collector) -> dict:
    N, g = params["N"], params["g"]
    h = params["herald"]
    dp = DickeModelParams(N, g, params["r"], params["omega"], sc.numerics["dt_classical"])
    herald = HeraldSpec.from_scaled(h["q_tilde"], h["delta_q_tilde"], g=g, phi=h["phi"])
    if herald.phi != 0:
        raise ScenarioError("herald.phi", "the Dicke XFA route uses the rotating-frame quadrature")
    method = sc.numerics["method"]
    prop = FloquetMagnusPropagator(dp) if method == "floquet" else DickePropagator(dp)
    grid = _grid_for(sc, params, times, extra_frequency=4 * N * params["omega"])
    psi0 = ground_state(N)
    w_unc = unconditional_weights(grid)
    if herald.ideal:
        w_her = heralded_weights(grid, h["q_tilde"])[0]
        # the exact propagator snaps times onto its integration grid
        key = (lambda t: round(float(t), 9)) if method == "floquet" else prop.snap
        index = {}
        for i, t in enumerate(times):
            index.setdefault(key(t), []).append(i)
        for t_out, psi in prop.evolve_series(grid.F_values, times, psi0):
            for i in index.pop(key(t_out), []):
                amps = w_her @ psi
                col.state(i, DickeKet(N, amps, "z"), float(np.vdot(amps, amps).real))
                if "unconditional_qfi" in col.wanted:
                    rho = clean_density((psi.T * w_unc) @ psi.conj())
                    col.put("unconditional_qfi", i, _qfi_value(rho) / N)
    else:
        for i, t in enumerate(times):
            hd = heralded_density_finite_resolution(prop, grid, psi0, herald, t, h["n_q"])
            col.state(i, hd.rho, hd.bin_prob)
    tcp = TcParams(N, g, params["r"], params["omega"])
    for i, t in enumerate(times):
        col.put("qfi_large_n", i, tc_qfi_large_n(tcp, t) / N)
        col.put("qfi_xfa", i, tc_qfi_exact(tcp, h["q_tilde"], t) / N)
    return {"F_c": dp.F_c, "n_points": grid.size, "method": method}


def sim_config(sc: Scenario, params: dict, times: np.ndarray, preset_override: str | None):
    num = sc.numerics
    preset = preset_override or num["preset"]
    settings, resolved = {}, None
    if preset is not None:
        resolved, settings = resolve_preset(preset, params["g"], path="numerics.preset")
    dt = num["dt"] if num["dt"] is not None and preset_override is None else settings.get("dt")
    n_max = num["n_max"] if num["n_max"] is not None and preset_override is None else settings.get("n_max")
    if dt is None or n_max is None:
        raise ScenarioError("numerics", "dt and n_max could not be resolved")
    # dt is an upper bound: it is shrunk so that the report times land on the step grid
    if abs(times[0]) > 1e-12:
        raise ScenarioError("time", "FullSim times must start at 0")
    if times.size > 1:
        spacing = np.diff(times)
        if np.ptp(spacing) > 1e-9 * spacing[0]:
            raise ScenarioError("time", "FullSim times must be uniformly spaced")
        stride = int(math.ceil(spacing[0] / dt - 1e-9))
        dt = spacing[0] / stride
    else:
        stride = 1
    cfg = SimConfig(dt=float(dt), n_max=int(n_max), t_end=float(times[-1]), model=num["sim_model"],
                    report_stride=stride, frame=num["frame"])
    return cfg, resolved


def _fullsim_point(sc: Scenario, params: dict, times: np.ndarray, col: _Collector,
                   preset_override: str | None) -> dict:
    N, g = params["N"], params["g"]
    h = params["herald"]
    if h["delta_q_tilde"] != 0:
        raise ScenarioError("herald.delta_q_tilde", "FullSim implements the ideal projector only")
    cfg, resolved = sim_config(sc, params, times, preset_override)
    herald = HeraldSpec.from_scaled(h["q_tilde"], 0.0, g=g, phi=h["phi"])
    init = initial_state(N, params["r"], cfg.n_max, sc.numerics["leakage_tol"])
    H = build_hamiltonian_action(cfg.model, N, cfg.n_max, g, params["omega"], cfg.frame)
    exc0 = H.excitation_number(init.amps)
    tcp = TcParams(N, g, params["r"], params["omega"])
    for i, snap in enumerate(evolve(init, cfg, g, params["omega"])):
        if i >= times.size:
            break
        ket, p = herald_quadrature_exact(snap, herald, params["omega"])
        # density per unit q~ so it matches the XFA normalization
        col.state(i, ket, p * g)
        if "unconditional_qfi" in col.wanted:
            col.put("unconditional_qfi", i, _qfi_value(partial_trace_matter(snap, params["omega"])) / N)
        col.put("norm_drift", i, abs(snap.norm**2 - 1))
        if cfg.model.upper() == "TC":
            col.put("excitation_drift", i, abs(H.excitation_number(snap.amps) - exc0))
        col.put("top_fock", i, top_fock_occupation(snap))
        col.put("qfi_xfa", i, tc_qfi_exact(tcp, h["q_tilde"], snap.t) / N)
    return {"F_c": tcp.F_c, "dt": cfg.dt, "n_max": cfg.n_max, "model": cfg.model,
            "frame": cfg.frame, "preset": resolved}


def _cat_point(sc: Scenario, params: dict, times: np.ndarray, col: _Collector) -> dict:
    N, g = params["N"], params["g"]
    alpha0 = float(params["alpha0"])
    q = sc.herald["q"] if sc.herald["q"] is not None else params["herald"]["q_tilde"] * g
    prop = TcPropagator(TcParams(N, g, 0.0, params["omega"]))
    psi0 = ground_state(N)
    for i, t in enumerate(times):
        st = cat_heralded_vector(prop, alpha0, psi0, q, t)
        col.state(i, st.ket, st.prob_density)
    return {"alpha0": alpha0, "q": q, "branch_angle_at_end": 2 * g * alpha0 * float(times[-1])}


def compute_point(scenario: dict, point: dict, preset_override: str | None = None) -> PointResult:
    """Pure function of (scenario, point); safe to run in worker processes."""
    sc = Scenario.from_dict(scenario)
    params = sc.point_params(point)
    times = sc.times(params)
    col = _Collector(sc, params, times)
    try:
        if sc.model == "TC":
            info = _tc_point(sc, params, times, col)
        elif sc.model == "Dicke":
            info = _dicke_point(sc, params, times, col)
        elif sc.model == "FullSim":
            info = _fullsim_point(sc, params, times, col, preset_override)
        else:
            info = _cat_point(sc, params, times, col)
    except ScenarioError:
        raise
    except Exception as exc:  # surface the parameter set with the engine error
        where = {k: params[k] for k in ("N", "g", "r", "F_c") if k in params}
        raise RunError(f"{type(exc).__name__}: {exc} [scenario {sc.name}, point {point}, "
                       f"params {where}]") from exc
    return PointResult(point, times, col.values, col.wigner, info)

"""Exact light-matter propagation on (Dicke sector) x (truncated Fock space).

States are stored as a (2J+1, n_max+1) array indexed by (m, n).  The
Hamiltonian is applied matrix-free; time stepping is the fourth-order Taylor
expansion of exp(-i H dt).
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .observables import qfi
from .photon import HeraldSpec, hermite_functions, squeezed_vacuum_fock
from .spin import DickeKet, _ladder_coefficients, ground_state, m_values

log = logging.getLogger(__name__)

NORM_STEP_LIMIT = 1e-9
TOP_FOCK_FRACTION = 0.05
TOP_FOCK_LIMIT = 1e-6
CHECKPOINT_VERSION = 1


class InstabilityError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass
class TotalKet:
    two_j: int
    n_max: int
    amps: np.ndarray = field(repr=False)
    t: float = 0.0
    frame: str = "lab"

    def __post_init__(self):
        self.amps = np.asarray(self.amps, complex).reshape(self.two_j + 1, self.n_max + 1)

    @classmethod
    def product(cls, matter: DickeKet, photon_amps, t: float = 0.0) -> TotalKet:
        photon_amps = np.asarray(photon_amps, complex)
        return cls(matter.two_j, photon_amps.size - 1,
                   np.outer(matter.z_amps(), photon_amps), t)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> TotalKet:
        return replace(self, amps=self.amps.copy())


def initial_state(N: int, r: float, n_max: int, leakage_tol: float = 1e-8) -> TotalKet:
    """|J,-J>^z x squeezed vacuum |r>."""
    sv = squeezed_vacuum_fock(r, n_max, leakage_tol)
    amps = sv.amps / np.linalg.norm(sv.amps)
    return TotalKet.product(ground_state(N), amps)


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


class HamiltonianAction:
    """Matrix-free H = omega n + Delta Jz + coupling for the TC or Dicke model.

    TC:    -i g (a J+ - a^dag J-)
    Dicke: -i g (a - a^dag)(J+ + J-)
    In the ``rotating`` frame (TC at resonance only) the free part is removed
    and the interaction is time independent.
    """

    def __init__(self, model: str, two_j: int, n_max: int, g: float, omega: float = 1.0,
                 delta: float | None = None, frame: str = "lab"):
        model = model.upper()
        if model not in ("TC", "DICKE"):
            raise ValueError(f"unknown model {model!r}")
        delta = omega if delta is None else delta
        if frame == "rotating" and (model != "TC" or delta != omega):
            raise ValueError("the rotating frame is only time independent for resonant TC")
        self.model, self.two_j, self.n_max, self.g = model, two_j, n_max, g
        self.omega, self.delta, self.frame = omega, delta, frame
        self.c_spin = _ladder_coefficients(two_j)[:, None]  # (2J, 1): link k <-> k+1
        self.c_photon = np.sqrt(np.arange(1, n_max + 1))[None, :]  # link n <-> n+1
        if frame == "lab":
            self.diag = omega * np.arange(n_max + 1)[None, :] + delta * m_values(two_j)[:, None]
        else:
            self.diag = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.two_j + 1, self.n_max + 1

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi) if self.diag is None else self.diag * psi
        cg = -1j * self.g * self.c_spin * self.c_photon
        # a J+ : (k+1, n) <- (k, n+1)
        out[1:, :-1] += cg * psi[:-1, 1:]
        # -a^dag J- : (k, n+1) <- (k+1, n)
        out[:-1, 1:] -= cg * psi[1:, :-1]
        if self.model == "DICKE":
            # a J- : (k, n) <- (k+1, n+1)
            out[:-1, :-1] += cg * psi[1:, 1:]
            # -a^dag J+ : (k+1, n+1) <- (k, n)
            out[1:, 1:] -= cg * psi[:-1, :-1]
        return out

    def dense(self) -> np.ndarray:
        d = (self.two_j + 1) * (self.n_max + 1)
        eye = np.eye(d, dtype=complex)
        return np.stack([self(eye[:, i].reshape(self.shape)).ravel() for i in range(d)], axis=1)

    def excitation_number(self, psi: np.ndarray) -> float:
        """<Jz + n> for an unnormalized (m, n) array."""
        p = np.abs(psi) ** 2
        val = m_values(self.two_j) @ p.sum(1) + np.arange(self.n_max + 1) @ p.sum(0)
        return float(val / p.sum())


def build_hamiltonian_action(model: str, two_j: int, n_max: int, g: float, omega: float = 1.0,
                             frame: str = "lab") -> HamiltonianAction:
    return HamiltonianAction(model, two_j, n_max, g, omega, frame=frame)


def taylor4_step(psi: np.ndarray, H, dt: float) -> np.ndarray:
    """sum_{k=0}^{4} (-i H dt)^k / k! psi, with exactly four applications of H."""
    out = psi.copy()
    term = psi
    for k in range(1, 5):
        term = (-1j * dt / k) * H(term)
        out += term
    return out


# ---------------------------------------------------------------------------
# configuration and evolution
# ---------------------------------------------------------------------------

PRESETS = {
    # desk-scale, CI friendly
    "fast": {"dt": 1e-3, "n_max": 600},
    # convergence settings of the published runs, keyed by coupling
    "paper-g0.02": {"dt": 1e-4, "n_max": 2000},
    "paper-g0.015": {"dt": 1e-4, "n_max": 2000},
    "paper-g0.01": {"dt": 1e-4, "n_max": 3000},
    "paper-g0.005": {"dt": 1.25e-5, "n_max": 5000},
}
LONG_RUNNING = {"paper-g0.02", "paper-g0.015", "paper-g0.01", "paper-g0.005"}


@dataclass(frozen=True)
class SimConfig:
    dt: float
    n_max: int
    t_end: float
    model: str = "TC"
    report_stride: int = 100
    frame: str = "lab"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.model.upper() not in ("TC", "DICKE"):
            raise ValueError(f"unknown model {self.model!r}")

    @classmethod
    def preset(cls, name: str, t_end: float, **overrides) -> SimConfig:
        if name not in PRESETS:
            raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        return cls(t_end=t_end, **{**PRESETS[name], **overrides})

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def top_fock_occupation(state: TotalKet, fraction: float = TOP_FOCK_FRACTION) -> float:
    p = (np.abs(state.amps) ** 2).sum(0)
    k = max(1, int(math.ceil(fraction * (state.n_max + 1))))
    return float(p[-k:].sum() / p.sum())


def evolve(initial: TotalKet, config: SimConfig, g: float, omega: float = 1.0):
    """Yield snapshots (copies) every ``report_stride`` steps, starting at t = 0.

    Raises InstabilityError when one step changes the squared norm by more
    than 1e-9 and warns when the top 5% of Fock levels hold more than 1e-6.
    """
    if initial.n_max != config.n_max:
        raise ValueError("initial state and config disagree on n_max")
    H = build_hamiltonian_action(config.model, initial.two_j, config.n_max, g, omega, config.frame)
    state = initial.copy()
    state.frame = config.frame
    psi = state.amps
    norm2 = float(np.vdot(psi, psi).real)
    warned = False
    yield replace(state, amps=psi.copy())
    for step in range(1, config.n_steps + 1):
        psi = taylor4_step(psi, H, config.dt)
        new_norm2 = float(np.vdot(psi, psi).real)
        if abs(new_norm2 - norm2) > NORM_STEP_LIMIT:
            raise InstabilityError(
                f"norm changed by {new_norm2 - norm2:.2e} in one step at t={step * config.dt:.4g}; "
                f"reduce dt below {config.dt:g}")
        norm2 = new_norm2
        if step % config.report_stride == 0 or step == config.n_steps:
            snap = TotalKet(state.two_j, state.n_max, psi.copy(), initial.t + step * config.dt,
                            config.frame)
            top = top_fock_occupation(snap)
            if top > TOP_FOCK_LIMIT and not warned:
                warned = True
                warnings.warn(f"top Fock levels hold {top:.2e} at t={snap.t:.4g}; "
                              f"increase n_max beyond {config.n_max}", TruncationWarning,
                              stacklevel=2)
            yield snap


def to_rotating_matter(amps: np.ndarray, two_j: int, t: float, frame: str,
                       omega: float = 1.0) -> np.ndarray:
    """Apply exp(i omega t Jz) along the first axis of a lab-frame array."""
    if frame == "rotating":
        return amps
    phase = np.exp(1j * omega * t * m_values(two_j))
    return phase.reshape((-1,) + (1,) * (amps.ndim - 1)) * amps


def herald_quadrature_exact(state: TotalKet, herald: HeraldSpec, omega: float = 1.0
                            ) -> tuple[DickeKet, float]:
    """Project the light on |q; phi> with lab angle phi_lab = -omega t + herald.phi.

    Returns the unnormalized matter ket in the rotating frame (z basis) and the
    probability density per unit q.
    """
    if not herald.ideal:
        raise ValueError("herald_quadrature_exact implements the ideal projector only")
    n = np.arange(state.n_max + 1)
    if state.frame == "lab":
        phi_lab = -omega * state.t + herald.phi
        ov = np.exp(-1j * n * phi_lab) * hermite_functions(herald.q, state.n_max)
        ket = to_rotating_matter(state.amps @ ov, state.two_j, state.t, "lab", omega)
    else:
        ov = np.exp(-1j * n * herald.phi) * hermite_functions(herald.q, state.n_max)
        ket = state.amps @ ov
    return DickeKet(state.two_j, ket, "z"), float(np.vdot(ket, ket).real)


def partial_trace_matter(state: TotalKet, omega: float = 1.0) -> np.ndarray:
    """Tr_photon |Psi><Psi| as a rotating-frame matter density (z basis)."""
    a = to_rotating_matter(state.amps, state.two_j, state.t, state.frame, omega)
    rho = a @ a.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def _digest(two_j: int, n_max: int, t: float, amps: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([CHECKPOINT_VERSION, two_j, n_max, repr(float(t))]).encode())
    h.update(np.ascontiguousarray(amps, dtype=np.complex128).tobytes())
    return h.hexdigest()


def save_checkpoint(state: TotalKet, path) -> None:
    meta = {"version": CHECKPOINT_VERSION, "two_j": state.two_j, "n_max": state.n_max,
            "t": state.t, "frame": state.frame,
            "sha256": _digest(state.two_j, state.n_max, state.t, state.amps)}
    buf = io.BytesIO()
    np.savez(buf, amps=state.amps, meta=np.array(json.dumps(meta)))
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> TotalKet:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        amps = data["amps"]
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    if _digest(meta["two_j"], meta["n_max"], meta["t"], amps) != meta["sha256"]:
        raise ValueError("checkpoint integrity hash mismatch")
    return TotalKet(meta["two_j"], meta["n_max"], amps, meta["t"], meta["frame"])


# ---------------------------------------------------------------------------
# unconditional backaction scans
# ---------------------------------------------------------------------------


@dataclass
class PowerLawFit:
    coefficient: float
    exponent: float
    residuals: np.ndarray


@dataclass
class LogFit:
    slope: float
    intercept: float
    residuals: np.ndarray


def fit_power_law(x, y) -> PowerLawFit:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.unique(x).size < 2:
        raise ValueError("a power-law fit needs at least two distinct abscissae")
    A = np.vstack([np.ones_like(x), np.log(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return PowerLawFit(float(np.exp(coef[0])), float(coef[1]), np.log(y) - A @ coef)


def fit_log(x, y) -> LogFit:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.unique(x).size < 2:
        raise ValueError("a logarithmic fit needs at least two distinct abscissae")
    A = np.vstack([np.log(x), np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LogFit(float(coef[0]), float(coef[1]), y - A @ coef)


def unconditional_qfi_trace(N: int, r: float, g: float, config: SimConfig,
                            leakage_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Times and QFI density of the reduced matter state."""
    init = initial_state(N, r, config.n_max, leakage_tol)
    ts, vals = [], []
    for snap in evolve(init, config, g):
        ts.append(snap.t)
        vals.append(qfi(partial_trace_matter(snap))[0] / N)
    return np.array(ts), np.array(vals)


@dataclass
class ScanReport:
    N_list: list[int]
    r_grid: list[float]
    max_qfi: dict  # (N, r) -> max_t QFI/N
    t_peak: dict  # (N, r) -> argmax_t
    best: dict  # N -> (max over r, r_c, t_peak at r_c)
    power_law: PowerLawFit
    r_c_fit: LogFit
    peak_time_scaled: dict  # N -> t_peak g sqrt(N)

    def to_json(self) -> dict:
        return {
            "N": self.N_list,
            "r_grid": self.r_grid,
            "max_qfi_density": {f"{N}": [self.max_qfi[(N, r)] for r in self.r_grid]
                                for N in self.N_list},
            "t_peak": {f"{N}": [self.t_peak[(N, r)] for r in self.r_grid] for N in self.N_list},
            "best": {f"{N}": {"max_qfi_density": v[0], "r_c": v[1], "t_peak": v[2]}
                     for N, v in self.best.items()},
            "power_law": {"coefficient": self.power_law.coefficient,
                          "exponent": self.power_law.exponent,
                          "residuals": self.power_law.residuals.tolist()},
            "r_c_fit": {"slope": self.r_c_fit.slope, "intercept": self.r_c_fit.intercept,
                        "residuals": self.r_c_fit.residuals.tolist()},
            "peak_time_g_sqrtN": {f"{N}": v for N, v in self.peak_time_scaled.items()},
        }


def appendix_a_scan(N_list, r_grid, g: float, config: SimConfig, n_max_for=None,
                    t_end_for=None, leakage_tol: float = 1e-8, runner=map) -> ScanReport:
    """Maximize the unconditional QFI density over time and squeezing for each N.

    ``n_max_for(r)`` may shrink the Fock cutoff for weakly squeezed runs and
    ``t_end_for(N)`` adapts the window to the collective coupling g sqrt(N);
    ``runner`` maps the per-(N, r) jobs (e.g. an executor's ``map``).
    """
    N_list = [int(n) for n in N_list]
    if len(set(N_list)) < 2:
        raise ValueError("appendix_a_scan needs at least two particle numbers to fit")
    r_grid = [float(r) for r in r_grid]
    jobs = []
    for N in N_list:
        for r in r_grid:
            cfg = config if n_max_for is None else replace(config, n_max=n_max_for(r))
            if t_end_for is not None:
                cfg = replace(cfg, t_end=t_end_for(N))
            jobs.append((N, r, g, cfg, leakage_tol))
    results = list(runner(_scan_job, jobs))
    max_qfi = {(N, r): res[0] for (N, r, *_), res in zip(jobs, results)}
    t_peak = {(N, r): res[1] for (N, r, *_), res in zip(jobs, results)}
    return scan_report(N_list, r_grid, g, max_qfi, t_peak)


def scan_report(N_list, r_grid, g: float, max_qfi: dict, t_peak: dict) -> ScanReport:
    """Per-N optimum over r, then the power-law, r_c and peak-time summaries."""
    N_list = [int(n) for n in N_list]
    if len(set(N_list)) < 2:
        raise ValueError("appendix_a_scan needs at least two particle numbers to fit")
    best = {}
    for N in N_list:
        r_best = max(r_grid, key=lambda r: max_qfi[(N, r)])
        best[N] = (max_qfi[(N, r_best)], r_best, t_peak[(N, r_best)])
    Ns = np.array(N_list, float)
    power = fit_power_law(Ns, [best[N][0] for N in N_list])
    rfit = fit_log(Ns, [best[N][1] for N in N_list])
    scaled = {N: best[N][2] * g * math.sqrt(N) for N in N_list}
    return ScanReport(N_list, list(r_grid), max_qfi, t_peak, best, power, rfit, scaled)


def _scan_job(job):
    N, r, g, config, leakage_tol = job
    ts, q = unconditional_qfi_trace(N, r, g, config, leakage_tol)
    i = int(np.argmax(q))
    return float(q[i]), float(ts[i])

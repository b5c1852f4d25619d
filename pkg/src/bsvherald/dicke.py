"""Dicke model beyond the rotating-wave approximation.

A classical field drives every qubit identically, so the matter state stays a
symmetric product state: one 2x2 trajectory per field value is enough.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .photon import HeraldSpec
from .spin import (DickeKet, DomainError, basis_matrix, log_binomial_row, m_values,
                   spin_matrices, unitary_from_hermitian)
from .xfa import ClassicalPropagator, FieldGrid, HeraldedState, heralded_vector, make_field_grid

UNITARITY_TOL = 1e-12


class StepRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class DickeModelParams:
    N: int
    g: float
    r: float
    omega: float = 1.0
    dt_classical: float = 0.01

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise DomainError("N must be a positive even integer")
        if self.dt_classical <= 0:
            raise DomainError("dt_classical must be positive")

    @classmethod
    def from_field(cls, N: int, F_c: float, g: float = 0.005, **kw) -> DickeModelParams:
        return cls(N, g, math.log(F_c / g), **kw)

    @property
    def F_c(self) -> float:
        return self.g * math.exp(self.r)


def product_state_to_dicke(up, down, two_j: int) -> np.ndarray:
    """Symmetric product of identical qubits (up, down) as z-Dicke amplitudes.

    c_m = sqrt(C(2J, J+m)) up^(J+m) down^(J-m); works row-wise on arrays.
    """
    up = np.asarray(up, complex)[..., None]
    down = np.asarray(down, complex)[..., None]
    k = np.arange(two_j + 1)
    return np.exp(0.5 * log_binomial_row(two_j)) * up**k * down ** (two_j - k)


def _qubit_steps(F, omega, dt, n_steps, record_every=None):
    """Integrate the driven qubit from spin-down with midpoint 2x2 exponentials.

    h(t) = (omega/2) sigma_z + 2 Re(F e^{-i omega t}) sigma_x.  Yields
    (step, up, down) in the lab frame every ``record_every`` steps.
    """
    F = np.asarray(F, complex)
    up = np.zeros(F.shape, complex)
    down = np.ones(F.shape, complex)
    bz = omega / 2
    if record_every:
        yield 0, up, down
    for s in range(n_steps):
        tm = (s + 0.5) * dt
        bx = 2 * np.real(F * np.exp(-1j * omega * tm))
        nb = np.sqrt(bx * bx + bz * bz)
        c = np.cos(nb * dt)
        sn = np.sin(nb * dt) / nb
        # exp(-i dt (bx sx + bz sz)) = c - i sn (bx sx + bz sz)
        u00 = c - 1j * sn * bz
        u11 = c + 1j * sn * bz
        u01 = -1j * sn * bx
        up, down = u00 * up + u01 * down, u01 * up + u11 * down
        if record_every and (s + 1) % record_every == 0:
            norm_defect = np.abs(np.abs(up) ** 2 + np.abs(down) ** 2 - 1).max()
            if norm_defect > UNITARITY_TOL * (s + 1):
                raise StepRejected(f"qubit norm drifted by {norm_defect:.2e}")
            yield s + 1, up, down
    if not record_every:
        yield n_steps, up, down


class DickePropagator(ClassicalPropagator):
    """Exact per-qubit propagation of H = omega Jz + 2(F e^{-i w t} + c.c.) Jx.

    Output is mapped into the omega-rotating frame with exp(i omega t Jz).
    Times are snapped to the nearest multiple of ``dt_classical``.
    """

    name = "dicke"

    def __init__(self, params: DickeModelParams):
        super().__init__(params.N, params.g)
        self.params = params

    def _check_psi0(self, psi0: DickeKet) -> None:
        z = psi0.in_axis("z").amps
        if abs(abs(z[0]) - 1) > 1e-12:
            raise DomainError("the Dicke propagator starts from the all-down state |J,-J>^z")

    def snap(self, t: float) -> int:
        return int(round(t / self.params.dt_classical))

    def _to_dicke(self, up, down, t, psi0):
        w = self.params.omega
        up = up * np.exp(0.5j * w * t)
        down = down * np.exp(-0.5j * w * t)
        # carry the global phase of psi0 along
        return product_state_to_dicke(up, down, self.two_j) * psi0.in_axis("z").amps[0]

    def evolve_many(self, F, t, psi0):
        self._check_psi0(psi0)
        n = self.snap(t)
        t_snap = n * self.params.dt_classical
        *_, (_, up, down) = _qubit_steps(np.atleast_1d(F), self.params.omega,
                                          self.params.dt_classical, n)
        return self._to_dicke(up, down, t_snap, psi0)

    def evolve_series(self, F, times, psi0):
        """Yield (t, rows) for each requested time, integrating only once."""
        self._check_psi0(psi0)
        dt = self.params.dt_classical
        targets = sorted({self.snap(t) for t in times})
        if not targets:
            return
        want = set(targets)
        for step, up, down in _qubit_steps(np.atleast_1d(F), self.params.omega, dt,
                                           targets[-1], record_every=1):
            if step in want:
                yield step * dt, self._to_dicke(up, down, step * dt, psi0)

    def qubit_state(self, F: float, t: float) -> tuple[complex, complex]:
        """Lab-frame (up, down) amplitudes of one qubit."""
        *_, (_, up, down) = _qubit_steps(np.array([F]), self.params.omega,
                                          self.params.dt_classical, self.snap(t))
        return complex(up[0]), complex(down[0])


def dicke_classical_propagator(params: DickeModelParams) -> DickePropagator:
    return DickePropagator(params)


def kick_operator(two_j: int, F: float, t: float, omega: float = 1.0) -> np.ndarray:
    """K(t) = (F/omega)[sin(2 omega t) Jx + (cos(2 omega t) - 1) Jy]."""
    mats = spin_matrices(two_j)
    return (F / omega) * (math.sin(2 * omega * t) * mats["Jx"]
                          + (math.cos(2 * omega * t) - 1) * mats["Jy"])


def floquet_magnus_unitary(two_j: int, F: float, t: float, omega: float = 1.0) -> np.ndarray:
    """exp(-i K(t)) exp(-2 i F t Jx), rotating frame, z basis."""
    if abs(F) / omega > 0.3:
        warnings.warn(f"Floquet-Magnus form used at F/omega = {abs(F) / omega:.2f}; "
                      "it is only reliable for F/omega << 1", stacklevel=2)
    mats = spin_matrices(two_j)
    return unitary_from_hermitian(kick_operator(two_j, F, t, omega)) @ unitary_from_hermitian(
        2 * F * t * mats["Jx"])


def floquet_magnus_propagator(F: float, t: float, psi0: DickeKet, omega: float = 1.0) -> DickeKet:
    return DickeKet(psi0.two_j, floquet_magnus_unitary(psi0.two_j, F, t, omega) @ psi0.z_amps(), "z")


class FloquetMagnusPropagator(ClassicalPropagator):
    name = "floquet-magnus"

    def __init__(self, params: DickeModelParams):
        super().__init__(params.N, params.g)
        self.params = params

    def evolve_many(self, F, t, psi0):
        z0 = psi0.z_amps()
        w = self.params.omega
        mats = spin_matrices(self.two_j)
        bx = basis_matrix(self.two_j, "x")
        m = m_values(self.two_j)
        out = []
        for f in np.real(np.atleast_1d(F)):
            tc = bx @ (np.exp(-2j * f * t * m) * (bx.conj().T @ z0))
            k = (f / w) * (math.sin(2 * w * t) * mats["Jx"] + (math.cos(2 * w * t) - 1) * mats["Jy"])
            out.append(unitary_from_hermitian(k) @ tc)
        return np.array(out)


def stroboscopic_times(m_max: int, omega: float = 1.0) -> np.ndarray:
    """t = (2m + 1) pi / (2 omega) for m = 0..m_max."""
    return (2 * np.arange(m_max + 1) + 1) * math.pi / (2 * omega)


def stroboscopic_filter_ket(params: DickeModelParams, t: float, psi0: DickeKet) -> DickeKet:
    """Floquet-Magnus heralded state at q~ = 0 and a stroboscopic time.

    sqrt(F_c/sqrt(pi)) sum exp(-(F_c t)^2 [m_x - m_y/(omega t)]^2)
    <J m_y|J m_x>^x |J m_y>^y <J m_x|^x psi0.
    """
    two_j = params.N
    m = m_values(two_j)
    bx = basis_matrix(two_j, "x")
    by = basis_matrix(two_j, "y")
    overlap = by.conj().T @ bx  # [m_y, m_x]
    expo = (params.F_c * t) ** 2 * (m[None, :] - m[:, None] / (params.omega * t)) ** 2
    kernel = math.sqrt(params.F_c / math.sqrt(math.pi)) * np.exp(-expo) * overlap
    ax = bx.conj().T @ psi0.z_amps()
    return DickeKet(two_j, kernel @ ax, "y")


def dicke_stroboscopic_heralded(params: DickeModelParams, t_strobe: float, psi0: DickeKet,
                                method: str = "exact", grid: FieldGrid | None = None
                                ) -> HeraldedState:
    """q~ = 0 heralded state at a stroboscopic time.

    ``method='exact'`` sums exact per-qubit trajectories over the field grid;
    ``method='floquet'`` uses the closed Floquet-Magnus contraction.
    """
    k = (t_strobe * params.omega / math.pi) - 0.5
    # times already snapped to the integration grid are accepted
    if abs(k - round(k)) > params.dt_classical * params.omega / math.pi + 1e-9 or round(k) < 0:
        raise DomainError(f"t = {t_strobe} is not a stroboscopic time (2m+1) pi/(2 omega)")
    herald = HeraldSpec(g=params.g)
    if method == "floquet":
        t_strobe = (2 * round(k) + 1) * math.pi / (2 * params.omega)
        ket = stroboscopic_filter_ket(params, t_strobe, psi0)
        return HeraldedState(ket, ket.norm**2, herald, t_strobe)
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    grid = grid or make_field_grid(params.F_c)
    return heralded_vector(DickePropagator(params), grid, psi0, herald, t_strobe)


def z_cat_reference(N: int) -> DickeKet:
    """(|J,J>^z + (-1)^J |J,-J>^z)/sqrt(2)."""
    if N <= 0 or N % 2:
        raise DomainError("N must be a positive even integer")
    amps = np.zeros(N + 1, complex)
    amps[-1] = 1 / math.sqrt(2)
    amps[0] = (-1) ** (N // 2) / math.sqrt(2)
    return DickeKet(N, amps, "z")


def y_filtered_dicke_state(N: int, strength: float | None = None) -> DickeKet:
    """exp(-s^2 Jy^2)|J,0>^x with s = N^(-1/2) by default (normalized)."""
    s2 = 1 / N if strength is None else strength**2
    m = m_values(N)
    ay = basis_matrix(N, "y").conj().T @ basis_matrix(N, "x")[:, N // 2]
    return DickeKet(N, np.exp(-s2 * m * m) * ay, "y").normalized()

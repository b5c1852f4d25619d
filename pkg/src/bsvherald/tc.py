"""Tavis-Cummings model: classical propagator and closed forms of the heralded dynamics.

All results are in the frame rotating at omega (= Delta = 1).  Probability
densities refer to the scaled outcome q~ = q/g (see ``xfa``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .photon import HeraldSpec
from .spin import DickeKet, DomainError, basis_change, basis_matrix, log_binomial_row, m_values
from .xfa import ClassicalPropagator, HeraldedState


@dataclass(frozen=True)
class TcParams:
    N: int
    g: float
    r: float
    omega: float = 1.0

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise DomainError("N must be a positive even integer")
        if self.g <= 0:
            raise DomainError("g must be positive")

    @classmethod
    def from_field(cls, N: int, F_c: float, g: float = 0.005, omega: float = 1.0) -> TcParams:
        return cls(N, g, math.log(F_c / g), omega)

    @property
    def F_c(self) -> float:
        return self.g * math.exp(self.r)

    @property
    def two_j(self) -> int:
        return self.N

    @property
    def J(self) -> float:
        return self.N / 2


class TcPropagator(ClassicalPropagator):
    """exp(-2 i t (Re F Jx - Im F Jy)); for real F this is diagonal in the x basis."""

    name = "tavis-cummings"

    def __init__(self, params: TcParams):
        super().__init__(params.N, params.g)
        self.params = params

    def evolve_many(self, F, t, psi0):
        F = np.atleast_1d(np.asarray(F))
        two_j = psi0.two_j
        m = m_values(two_j)
        bx = basis_matrix(two_j, "x")
        z0 = psi0.in_axis("z").amps
        if np.isrealobj(F) or not np.any(np.imag(F)):
            F = np.real(F)
            ax = bx.conj().T @ z0
            return (np.exp(-2j * t * np.outer(F, m)) * ax[None, :]) @ bx.T
        # axis n = (cos chi, sin chi, 0) with chi = arg(conj F); conjugate Jx by exp(-i chi Jz)
        chi = np.angle(np.conj(F))
        amp = np.abs(F)
        zin = np.exp(1j * np.outer(chi, m)) * z0[None, :]
        xin = zin @ bx.conj()
        xout = np.exp(-2j * t * amp[:, None] * m[None, :]) * xin
        return np.exp(-1j * np.outer(chi, m)) * (xout @ bx.T)


def tc_classical_propagator(params: TcParams) -> TcPropagator:
    return TcPropagator(params)


def _filter_exponent(m, F_c: float, q_tilde: float, t: float):
    """tau^2 (m - mu)^2 written as F_c^2 (t m - q~/sqrt 2)^2, regular at t = 0."""
    return F_c**2 * (t * m - q_tilde / math.sqrt(2)) ** 2


def tc_heralded_closed_form(params: TcParams, q_tilde: float, t: float,
                            psi0: DickeKet) -> HeraldedState:
    """Gaussian filter sqrt(F_c/sqrt(pi)) exp(-(F_c t)^2 (Jx - q~/(sqrt 2 t))^2) on psi0."""
    m = m_values(psi0.two_j)
    ax = basis_change(psi0, "x").amps
    amps = math.sqrt(params.F_c / math.sqrt(math.pi)) * np.exp(
        -_filter_exponent(m, params.F_c, q_tilde, t)) * ax
    ket = DickeKet(psi0.two_j, amps, "x")
    p = float(np.vdot(amps, amps).real)
    return HeraldedState(ket, p, HeraldSpec.from_scaled(q_tilde, g=params.g), t)


def _log_binomial_weights(two_j: int) -> np.ndarray:
    """ln(2^-2J C(2J, J+m)) = ln |c_m|^2 at tau = 0."""
    return log_binomial_row(two_j) - two_j * math.log(2)


def tc_qfi_exact(params: TcParams, q_tilde: float, t: float) -> float:
    """QFI of the heralded state grown from |J,-J>^z, closed form in the x basis."""
    two_j = params.N
    J = two_j / 2
    m = m_values(two_j)
    tau2 = (params.F_c * t) ** 2
    logc2 = _log_binomial_weights(two_j) - 2 * _filter_exponent(m, params.F_c, q_tilde, t)
    w = np.exp(logc2 - logc2.max())
    ratio = float(np.dot(J * J - m * m, w) / w.sum())
    return params.N + 2 * (-math.expm1(-2 * tau2)) * ratio


def tc_qfi_large_n(params: TcParams, t: float) -> float:
    N = params.N
    tau2 = (params.F_c * t) ** 2
    return N + (-math.expm1(-2 * tau2)) * (N * N / 2 - N / (2 * (1 + N * tau2)))


def tc_p0_density(params: TcParams, t: float) -> float:
    """P(q~ = 0): (F_c/sqrt(pi)) sum_m 2^-N C(N, J+m) exp(-2 tau^2 m^2), per unit q~."""
    m = m_values(params.N)
    tau2 = (params.F_c * t) ** 2
    s = logsumexp(_log_binomial_weights(params.N) - 2 * tau2 * m * m)
    return params.F_c / math.sqrt(math.pi) * math.exp(s)


def tc_p0_asymptote(params: TcParams, t: float) -> float:
    """Small- or large-tau limit of ``tc_p0_density``, whichever regime tau is in."""
    tau = params.F_c * t
    pref = params.F_c / math.sqrt(math.pi)
    if tau < 1:
        return pref / math.sqrt(1 + params.N * tau * tau)
    return pref / math.sqrt(math.pi * params.N / 2)


def tc_three_level_truncation(params: TcParams, q_tilde: float, t: float,
                              psi0: DickeKet | None = None) -> DickeKet:
    """Heralded ket kept only on m = -1, 0, 1 of the x basis (unnormalized).

    Component phases are those of ``psi0`` (default |J,-J>^z) in the x basis.
    """
    from .spin import ground_state

    psi0 = psi0 or ground_state(params.N)
    full = tc_heralded_closed_form(params, q_tilde, t, psi0).ket.amps
    amps = np.zeros_like(full)
    c = params.N // 2
    amps[c - 1:c + 2] = full[c - 1:c + 2]
    return DickeKet(params.N, amps, "x")


def tc_crossover_time(delta_q_tilde: float) -> float:
    if delta_q_tilde < 0:
        raise DomainError("delta_q_tilde must be >= 0")
    return delta_q_tilde / (2 * math.sqrt(2))

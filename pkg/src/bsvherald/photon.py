"""Single-mode photonic states in truncated Fock space and quadrature overlaps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

DEFAULT_LEAKAGE_TOL = 1e-8
PI_M14 = math.pi ** -0.25


class TruncationError(ValueError):
    """The Fock cutoff discards more probability than allowed."""

    def __init__(self, message: str, required_n_max: int | None = None):
        super().__init__(message)
        self.required_n_max = required_n_max


@dataclass(frozen=True)
class FockKet:
    n_max: int
    amps: np.ndarray = field(repr=False)
    leakage: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != self.n_max + 1:
            raise ValueError(f"expected {self.n_max + 1} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    def mean_photon_number(self) -> float:
        p = np.abs(self.amps) ** 2
        return float(np.dot(np.arange(self.n_max + 1), p) / p.sum())


@dataclass(frozen=True)
class HeraldSpec:
    """Quadrature measurement: angle ``phi``, outcome ``q``, bin width ``delta_q``.

    ``q_tilde`` and ``delta_q_tilde`` are the coupling-scaled controls q/g and
    delta_q/g that the heralded matter dynamics actually depends on.
    """

    phi: float = 0.0
    q: float = 0.0
    delta_q: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        if self.delta_q < 0:
            raise ValueError("delta_q must be >= 0")
        if self.g <= 0:
            raise ValueError("g must be > 0")

    @classmethod
    def from_scaled(cls, q_tilde: float, delta_q_tilde: float = 0.0, g: float = 1.0,
                    phi: float = 0.0) -> HeraldSpec:
        return cls(phi=phi, q=q_tilde * g, delta_q=delta_q_tilde * g, g=g)

    @property
    def q_tilde(self) -> float:
        return self.q / self.g

    @property
    def delta_q_tilde(self) -> float:
        return self.delta_q / self.g

    @property
    def ideal(self) -> bool:
        return self.delta_q == 0


def _check_leakage(leakage: float, tol: float, what: str, required: int) -> None:
    if leakage > tol:
        raise TruncationError(
            f"{what}: truncation leakage {leakage:.3e} exceeds {tol:.1e}; "
            f"try n_max >= {required}",
            required_n_max=required,
        )


def coherent_fock(alpha: complex, n_max: int, leakage_tol: float = DEFAULT_LEAKAGE_TOL) -> FockKet:
    """|alpha> on n = 0..n_max, amplitudes built in log space."""
    alpha = complex(alpha)
    lam = abs(alpha) ** 2
    n = np.arange(n_max + 1)
    amps = np.zeros(n_max + 1, complex)
    if lam == 0:
        amps[0] = 1.0
        return FockKet(n_max, amps, 0.0)
    logmag = -lam / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    amps = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    # Poisson tail P(n > n_max) = P(n_max + 1, lambda), the regularized lower gamma
    leakage = float(gammainc(n_max + 1, lam))
    required = int(math.ceil(lam + 10 * math.sqrt(lam) + 20))
    _check_leakage(leakage, leakage_tol, "coherent_fock", required)
    return FockKet(n_max, amps, leakage)


def squeezed_vacuum_fock(r: float, n_max: int, leakage_tol: float = DEFAULT_LEAKAGE_TOL) -> FockKet:
    """exp((xi* a^2 - xi a^dag^2)/2)|0> for real xi = r >= 0.

    Even amplitudes follow the two-photon recursion
    c_{2k+2} = -tanh(r) sqrt((2k+1)/(2k+2)) c_{2k}; odd amplitudes are exactly 0.
    """
    if r < 0:
        raise ValueError("squeezing parameter r must be >= 0")
    amps = np.zeros(n_max + 1, complex)
    if r == 0:
        amps[0] = 1.0
        return FockKet(n_max, amps, 0.0)
    k = np.arange(n_max // 2 + 1)
    t = math.tanh(r)
    # log of sqrt((2k)!)/(2^k k!) accumulated as a running sum of the recursion ratios
    steps = np.log(np.sqrt((2 * k[1:] - 1) / (2 * k[1:])))
    logc = np.concatenate([[0.0], np.cumsum(steps)]) + k * math.log(t) - 0.5 * math.log(math.cosh(r))
    amps[0::2] = np.exp(logc) * np.where(k % 2, -1.0, 1.0)
    probs = np.exp(2 * logc)
    leakage = max(0.0, 1.0 - math.fsum(probs))
    # p_{2k} ~ tanh^{2k}/sqrt(pi k cosh r): solve for the cutoff of the tail
    required = int(math.ceil(2 * math.log(leakage_tol * (1 - t * t)) / math.log(t * t))) + 2
    _check_leakage(leakage, leakage_tol, "squeezed_vacuum_fock", max(required, n_max + 2))
    return FockKet(n_max, amps, leakage)


def janszky_weight(p, r: float):
    """Gaussian weight of |ip> in the one-dimensional coherent-state expansion of |r>."""
    if r <= 0:
        raise ValueError("janszky_weight needs r > 0")
    p = np.asarray(p, float)
    return np.exp(-0.5 * (1 / math.tanh(r) - 1) * p * p) / math.sqrt(2 * math.pi * math.sinh(r))


def quadrature_coherent_overlap(q, phi: float, alpha: complex):
    """<q; phi | alpha> with q_phi = (e^{-i phi} a + e^{i phi} a^dag)/sqrt(2)."""
    z = complex(alpha) * np.exp(-1j * phi)
    q0, p0 = z.real, z.imag
    q = np.asarray(q, float)
    return PI_M14 * np.exp(-1j * q0 * p0 + 1j * math.sqrt(2) * p0 * q - 0.5 * (q - math.sqrt(2) * q0) ** 2)


def hermite_functions(q, n_max: int) -> np.ndarray:
    """Normalized oscillator eigenfunctions h_0..h_{n_max} at q (shape (n_max+1, *q.shape)).

    Upward three-term recurrence, stable far past the point where Hermite
    polynomials themselves overflow.
    """
    q = np.asarray(q, float)
    h = np.empty((n_max + 1,) + q.shape)
    # run the recurrence on rescaled values; log_scale carries the true magnitude
    # so that h_0 = exp(-q^2/2) underflowing at large |q| does not zero the tail
    log_scale = math.log(PI_M14) - 0.5 * q * q
    prev = np.zeros(q.shape)
    cur = np.ones(q.shape)
    h[0] = np.exp(log_scale)
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * q * cur - math.sqrt(n / (n + 1)) * prev
        big = np.maximum(np.abs(nxt), np.abs(cur))
        rescale = big > 1e100
        if np.any(rescale):
            s = np.where(rescale, big, 1.0)
            nxt, cur = nxt / s, cur / s
            log_scale = log_scale + np.log(s)
        prev, cur = cur, nxt
        h[n + 1] = cur * np.exp(log_scale)
    return h


def quadrature_fock_overlap(q: float, phi: float, n_max: int) -> np.ndarray:
    """Vector of <q; phi | n> = e^{-i n phi} h_n(q) for n = 0..n_max."""
    n = np.arange(n_max + 1)
    return np.exp(-1j * n * phi) * hermite_functions(q, n_max)

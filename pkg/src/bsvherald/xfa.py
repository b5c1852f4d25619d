"""External-field-approximation engine for squeezed-vacuum driving.

In the weak-coupling limit the squeezed vacuum is a Gaussian superposition of
coherent states |iF/g> with width F_c = g e^r, and every component drives the
matter as a classical field F.  Everything here is generic over a
``ClassicalPropagator`` that produces U_F(t)|psi0> for a batch of fields.

Normalization: factors of 1/sqrt(g) that diverge in the g -> 0 limit are
dropped, so heralded kets and probability densities refer to the scaled
outcome q~ = q/g and integrate to one over q~.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .photon import HeraldSpec, quadrature_coherent_overlap
from .spin import DickeKet

PSD_FLOOR = -1e-10
MOMENT_RTOL = 1e-8


class ConfigurationError(ValueError):
    """Numerical settings that cannot give results at the promised accuracy."""


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


class ClassicalPropagator(ABC):
    """U_F(t) acting on matter kets, for (possibly complex) field amplitudes F.

    F labels the coherent state |iF/g>; real F is the squeezed-vacuum axis.
    Results are returned in the rotating frame, z-Dicke basis.
    """

    name = "classical"
    frame = "rotating"

    def __init__(self, two_j: int, g: float = 1.0):
        self.two_j = two_j
        self.g = g

    @abstractmethod
    def evolve_many(self, F, t: float, psi0: DickeKet) -> np.ndarray:
        """Rows are U_{F_i}(t)|psi0> as z-basis amplitude vectors."""

    def evolve_series(self, F, times, psi0: DickeKet):
        """Yield (t, rows) for each time; subclasses may integrate incrementally."""
        for t in times:
            yield t, self.evolve_many(F, t, psi0)

    def apply(self, F, t: float, psi0: DickeKet) -> DickeKet:
        row = self.evolve_many(np.array([F]), t, psi0)[0]
        return DickeKet(self.two_j, row, "z")


# ---------------------------------------------------------------------------
# field grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldGrid:
    F_values: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    F_c: float

    @property
    def size(self) -> int:
        return self.F_values.size

    def gaussian_moments(self) -> tuple[float, float, float]:
        """Rectangular-rule moments of exp(-2(F/F_c)^2) times 1, F, F^2."""
        g = self.weights * np.exp(-2 * (self.F_values / self.F_c) ** 2)
        return float(g.sum()), float(g @ self.F_values), float(g @ self.F_values**2)

    def check_moments(self, rtol: float = MOMENT_RTOL) -> None:
        m0, m1, m2 = self.gaussian_moments()
        exact0 = math.sqrt(math.pi / 2) * self.F_c
        exact2 = exact0 * self.F_c**2 / 4
        if (abs(m0 - exact0) > rtol * exact0 or abs(m1) > rtol * exact0 * self.F_c
                or abs(m2 - exact2) > rtol * exact2):
            raise ConfigurationError(
                f"field grid fails the Gaussian moment test: ({m0:.12g}, {m1:.3g}, {m2:.12g}) "
                f"vs ({exact0:.12g}, 0, {exact2:.12g})"
            )


def make_field_grid(F_c: float, n_points: int = 801, cutoff_sigmas: float = 8.0) -> FieldGrid:
    """Uniform odd-sized grid over +-cutoff_sigmas * F_c/sqrt(2) with rectangle weights.

    F_c/sqrt(2) is the standard deviation of the heralding weight exp(-(F/F_c)^2).
    """
    if F_c <= 0:
        raise ConfigurationError("F_c must be positive")
    if n_points < 3 or n_points % 2 == 0:
        raise ConfigurationError("n_points must be odd and >= 3 so that F = 0 is a node")
    if cutoff_sigmas <= 0:
        raise ConfigurationError("cutoff_sigmas must be positive")
    half = cutoff_sigmas * F_c / math.sqrt(2)
    F = np.linspace(-half, half, n_points)
    F[n_points // 2] = 0.0
    h = 2 * half / (n_points - 1)
    return FieldGrid(F, np.full(n_points, h), F_c)


def suggest_n_points(F_c: float, t_max: float, two_j: int, q_tilde_max: float = 0.0,
                     cutoff_sigmas: float = 8.0, extra_frequency: float = 0.0) -> int:
    """Grid size whose rectangle rule does not alias up to time ``t_max``.

    The F integrands oscillate with angular frequency at most
    4 t J + 2 sqrt(2) |q~| (+ ``extra_frequency``); the Nyquist-like bound
    2 pi / h must clear that by a margin where the Gaussian weight is ~e^-40.
    """
    kappa = 2 * t_max * two_j + 2 * math.sqrt(2) * abs(q_tilde_max) + extra_frequency
    kappa += 20.0 / F_c
    h = 2 * math.pi / kappa
    n = int(math.ceil(2 * cutoff_sigmas * F_c / math.sqrt(2) / h)) + 1
    return max(n + (n + 1) % 2, 101)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def clean_density(rho: np.ndarray, floor: float = PSD_FLOOR) -> np.ndarray:
    """Hermitize, floor tiny negative eigenvalues and renormalize the trace."""
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    if w.min() < floor * max(1.0, abs(w).max()):
        raise ConfigurationError(f"density has eigenvalue {w.min():.3e} below {floor:.0e}")
    if w.min() < 0:
        w = np.clip(w, 0, None)
        rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def unconditional_weights(grid: FieldGrid) -> np.ndarray:
    return grid.weights * np.exp(-2 * (grid.F_values / grid.F_c) ** 2) / (
        math.sqrt(math.pi / 2) * grid.F_c)


def heralded_weights(grid: FieldGrid, q_tilde) -> np.ndarray:
    """Quadrature weights of the heralded propagator; shape (len(q_tilde), grid.size)."""
    q = np.atleast_1d(np.asarray(q_tilde, float))
    base = grid.weights * np.exp(-((grid.F_values / grid.F_c) ** 2)) / (
        math.pi**0.75 * math.sqrt(grid.F_c))
    return base[None, :] * np.exp(1j * math.sqrt(2) * np.outer(q, grid.F_values))


def unconditional_density(prop: ClassicalPropagator, grid: FieldGrid, psi0: DickeKet,
                          t: float) -> np.ndarray:
    """Gaussian classical mixture of classically driven states (z basis)."""
    if not psi0.is_normalized:
        raise ValueError("psi0 must be normalized")
    grid.check_moments()
    psi = prop.evolve_many(grid.F_values, t, psi0)
    w = unconditional_weights(grid)
    rho = (psi.T * w) @ psi.conj()
    return clean_density(rho)


@dataclass(frozen=True)
class HeraldedState:
    """Unnormalized heralded ket |psi^q(t)> and P(q~) = <psi^q|psi^q>."""

    ket: DickeKet
    prob_density: float
    herald: HeraldSpec
    t: float

    def normalized(self) -> DickeKet:
        return self.ket.normalized()


@dataclass(frozen=True)
class HeraldedDensity:
    """Matter state heralded by a finite bin and the bin's success probability."""

    rho: np.ndarray = field(repr=False)
    bin_prob: float
    herald: HeraldSpec
    t: float


def _require_rotating_quadrature(herald: HeraldSpec) -> None:
    if herald.phi != 0:
        raise ValueError("the squeezed-vacuum XFA route assumes the rotating-frame "
                         "quadrature (phi offset 0)")


def heralded_vector(prop: ClassicalPropagator, grid: FieldGrid, psi0: DickeKet,
                    herald: HeraldSpec, t: float) -> HeraldedState:
    """Ideal quadrature heralding: sum_F w(F) e^{i F sqrt(2) q~} U_F(t)|psi0>."""
    if not herald.ideal:
        raise ValueError("finite-resolution heralds go through heralded_density_finite_resolution")
    _require_rotating_quadrature(herald)
    psi = prop.evolve_many(grid.F_values, t, psi0)
    amps = heralded_weights(grid, herald.q_tilde)[0] @ psi
    p = float(np.vdot(amps, amps).real)
    return HeraldedState(DickeKet(psi0.two_j, amps, "z"), p, herald, t)


def default_n_q(delta_q_tilde: float, F_c: float) -> int:
    return max(33, int(math.ceil(delta_q_tilde * F_c * 8)))


def bin_nodes(q_tilde: float, delta_q_tilde: float, n_q: int) -> tuple[np.ndarray, float]:
    """Midpoints and width of n_q equal sub-intervals of the bin."""
    h = delta_q_tilde / n_q
    return q_tilde - delta_q_tilde / 2 + h * (np.arange(n_q) + 0.5), h


def heralded_density_finite_resolution(prop: ClassicalPropagator, grid: FieldGrid,
                                       psi0: DickeKet, herald: HeraldSpec, t: float,
                                       n_q: int | None = None) -> HeraldedDensity:
    """Matter density heralded by a bin of width delta_q~ centred at q~."""
    _require_rotating_quadrature(herald)
    psi = prop.evolve_many(grid.F_values, t, psi0)
    dq = herald.delta_q_tilde
    if dq == 0:
        amps = heralded_weights(grid, herald.q_tilde)[0] @ psi
        p = float(np.vdot(amps, amps).real)
        return HeraldedDensity(np.outer(amps, amps.conj()) / p, 0.0, herald, t)
    n_q = n_q or default_n_q(dq, grid.F_c)
    nodes, h = bin_nodes(herald.q_tilde, dq, n_q)
    vecs = heralded_weights(grid, nodes) @ psi
    rho = h * (vecs.T @ vecs.conj())
    prob = float(np.trace(rho).real)
    return HeraldedDensity(clean_density(rho), prob, herald, t)


def probability_weighted_qfi(state, herald: HeraldSpec | None = None,
                             bin_prob: float | None = None) -> float:
    """QFI of the heralded matter state times the success probability of the bin.

    For an ideal ``HeraldedState`` the bin mass defaults to P(q~) * delta_q~,
    the narrow-bin approximation.
    """
    from .observables import qfi

    if isinstance(state, HeraldedState):
        herald = herald or state.herald
        if bin_prob is None:
            bin_prob = state.prob_density * herald.delta_q_tilde
        state = state.normalized()
    elif isinstance(state, HeraldedDensity):
        bin_prob = state.bin_prob if bin_prob is None else bin_prob
        state = state.rho
    if bin_prob is None:
        raise ValueError("bin_prob is required for a bare density matrix")
    if not 0 <= bin_prob <= 1 + 1e-12:
        raise ValueError(f"bin_prob must lie in [0, 1], got {bin_prob}")
    if bin_prob == 0:
        return 0.0
    return qfi(state)[0] * bin_prob


def cat_heralded_vector(prop: ClassicalPropagator, alpha0: float, psi0: DickeKet, q: float,
                        t: float, g: float | None = None) -> HeraldedState:
    """Heralding after even-cat driving |alpha0> + |-alpha0>, quadrature phi = -omega t + pi/2.

    The branch fields are F = -+ i g alpha0 (|alpha0> = |iF/g>).  ``q`` is the
    unscaled outcome and the density is per unit q.
    """
    g = prop.g if g is None else g
    F = -1j * g * alpha0
    psi = prop.evolve_many(np.array([F, -F]), t, psi0)
    ov = np.array([quadrature_coherent_overlap(q, math.pi / 2, s * alpha0) for s in (1, -1)])
    amps = (ov[0] * psi[0] + ov[1] * psi[1]) / math.sqrt(2)
    p = float(np.vdot(amps, amps).real)
    herald = HeraldSpec(phi=math.pi / 2, q=q, delta_q=0.0, g=g)
    return HeraldedState(DickeKet(psi0.two_j, amps, "z"), p, herald, t)


def heralded_series(prop: ClassicalPropagator, grid: FieldGrid, psi0: DickeKet,
                    herald: HeraldSpec, times) -> list[HeraldedState]:
    """``heralded_vector`` over a list of times (one trajectory pass when supported)."""
    if not herald.ideal:
        raise ValueError("finite-resolution heralds go through heralded_density_finite_resolution")
    _require_rotating_quadrature(herald)
    w = heralded_weights(grid, herald.q_tilde)[0]
    out = []
    for t, psi in prop.evolve_series(grid.F_values, times, psi0):
        amps = w @ psi
        out.append(HeraldedState(DickeKet(psi0.two_j, amps, "z"),
                                 float(np.vdot(amps, amps).real), herald, t))
    return out

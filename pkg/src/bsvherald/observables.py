"""Quantum Fisher information and spin Wigner functions for collective spin states."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spin import DickeKet, DomainError, _jy_eigensystem, clebsch_gordan, m_values, spin_matrices

EIG_CUTOFF = 1e-12
PSD_TOL = 1e-10


def _spin_triplet(two_j: int) -> list[np.ndarray]:
    mats = spin_matrices(two_j)
    return [mats["Jx"], mats["Jy"], mats["Jz"]]


def _top_direction(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(matrix)
    n = v[:, -1]
    # fix the sign: largest component positive
    n = n * np.sign(n[np.argmax(np.abs(n))])
    return float(w[-1]), n


def qfi_pure(ket: DickeKet) -> tuple[float, np.ndarray]:
    """4 x largest eigenvalue of the symmetrized (Jx, Jy, Jz) covariance matrix."""
    psi = ket.normalized().z_amps()
    ops = _spin_triplet(ket.two_j)
    vecs = [op @ psi for op in ops]
    mean = np.array([np.vdot(psi, v).real for v in vecs])
    second = np.array([[np.vdot(a, b).real for b in vecs] for a in vecs])
    cov = second - np.outer(mean, mean)
    val, n = _top_direction(4 * cov)
    return val, n


def qfi_mixed(rho: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of the QFI matrix over the directions n.J."""
    rho = np.asarray(rho, complex)
    rho = 0.5 * (rho + rho.conj().T)
    lam, vec = np.linalg.eigh(rho)
    if lam.min() < -PSD_TOL:
        raise DomainError(f"density matrix is not PSD (eigenvalue {lam.min():.3e})")
    tr = lam.sum()
    lam = np.where(lam < EIG_CUTOFF, 0.0, lam / tr)
    two_j = rho.shape[0] - 1
    ops = [vec.conj().T @ op @ vec for op in _spin_triplet(two_j)]
    s = lam[:, None] + lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = np.where(s > EIG_CUTOFF, 2 * (lam[:, None] - lam[None, :]) ** 2 / s, 0.0)
    mat = np.array([[np.sum(coeff * (a * b.T).real) for b in ops] for a in ops])
    return _top_direction(mat)


def qfi(state) -> tuple[float, np.ndarray]:
    """QFI maximized over collective directions n.J; returns (value, n)."""
    if isinstance(state, DickeKet):
        return qfi_pure(state)
    return qfi_mixed(state)


def qfi_density(state) -> float:
    if isinstance(state, DickeKet):
        return qfi_pure(state)[0] / state.N
    return qfi_mixed(state)[0] / (np.shape(state)[0] - 1)


# ---------------------------------------------------------------------------
# spin Wigner function
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def kernel_weights(two_j: int) -> np.ndarray:
    """w_m = sum_j (2j+1)/(2J+1) <J m; j 0 | J m> for m = -J..J."""
    J = two_j / 2
    out = np.zeros(two_j + 1)
    for k, m in enumerate(m_values(two_j)):
        out[k] = sum((2 * j + 1) * clebsch_gordan(J, m, j, 0, J, m) for j in range(two_j + 1))
    out /= two_j + 1
    out.setflags(write=False)
    return out


@dataclass
class SphereGrid:
    thetas: np.ndarray
    phis: np.ndarray
    theta_weights: np.ndarray | None = None
    values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def gauss_legendre(cls, n_theta: int = 200, n_phi: int = 400) -> SphereGrid:
        """Gauss-Legendre in cos(theta) times a uniform phi grid (integration grid)."""
        x, w = np.polynomial.legendre.leggauss(n_theta)
        order = np.argsort(-x)
        return cls(np.arccos(x[order]), 2 * np.pi * np.arange(n_phi) / n_phi, w[order])

    @classmethod
    def uniform(cls, n_theta: int = 91, n_phi: int = 181) -> SphereGrid:
        return cls(np.linspace(0, np.pi, n_theta), np.linspace(0, 2 * np.pi, n_phi, endpoint=False))

    def integrate(self) -> float:
        """Integral of ``values`` over the sphere (needs Gauss-Legendre weights)."""
        if self.theta_weights is None or self.values is None:
            raise ValueError("grid has no quadrature weights or values")
        dphi = 2 * np.pi / self.phis.size
        return float(self.theta_weights @ self.values.sum(axis=1) * dphi)


def spin_wigner(state, grid: SphereGrid) -> SphereGrid:
    """W(theta, phi) = Tr[rho Delta(theta, phi)] with the Stratonovich kernel.

    Delta = sum_m w_m R|J m><J m|R^dagger, R = exp(i phi Jz) exp(i theta Jy).
    """
    if isinstance(state, DickeKet):
        state = state.normalized().density()
    rho = np.asarray(state, complex)
    two_j = rho.shape[0] - 1
    if grid.thetas.size == 0 or grid.phis.size == 0:
        raise ValueError("empty sphere grid")
    w = kernel_weights(two_j)
    v, m = _jy_eigensystem(two_j)
    d = two_j + 1
    # M[theta, a, b] = sum_m w_m d[a, m]^* d[b, m], d = exp(i theta Jy)
    phases = np.exp(1j * np.outer(grid.thetas, m))  # (T, d)
    dmat = np.einsum("ak,tk,bk->tab", v, phases, v.conj())
    M = np.einsum("tam,m,tbm->tab", dmat.conj(), w, dmat)
    S = M * rho[None, :, :]
    # collect by a - b, then W = Re sum_k S_k e^{-i phi k}
    diffs = np.arange(-(d - 1), d)
    a_idx, b_idx = np.indices((d, d))
    kidx = (a_idx - b_idx).ravel() + d - 1
    Sk = np.zeros((grid.thetas.size, diffs.size), complex)
    for t in range(grid.thetas.size):
        Sk[t] = np.bincount(kidx, weights=S[t].real.ravel(), minlength=diffs.size) + 1j * np.bincount(
            kidx, weights=S[t].imag.ravel(), minlength=diffs.size)
    values = (Sk @ np.exp(-1j * np.outer(diffs, grid.phis))).real
    return SphereGrid(grid.thetas, grid.phis, grid.theta_weights, values)

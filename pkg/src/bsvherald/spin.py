"""Dicke-basis algebra for a fixed total spin J = N/2.

Total spin is carried as ``two_j`` (an integer, 2J = N) so that half-integer
arithmetic never goes through floating point equality tests.  Amplitude
vectors are indexed by ``k = m + J`` with ``m = -J, ..., J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

AXES = ("x", "y", "z")
NORM_TOL = 1e-12


class DomainError(ValueError):
    """Raised for quantum numbers or arguments outside their allowed range."""


def _twice(x) -> int:
    """Return 2*x as an int, rejecting anything that is not a half-integer."""
    two = round(2 * float(x))
    if abs(2 * float(x) - two) > 1e-9:
        raise DomainError(f"{x!r} is not an integer or half-integer")
    return int(two)


def m_values(two_j: int) -> np.ndarray:
    return np.arange(two_j + 1) - two_j / 2


# ---------------------------------------------------------------------------
# combinatorics
# ---------------------------------------------------------------------------


def log_binomial(n: int, k: int) -> float:
    """Natural log of the binomial coefficient C(n, k)."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_binomial_row(n: int) -> np.ndarray:
    """ln C(n, k) for k = 0..n."""
    k = np.arange(n + 1)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> in the Condon-Shortley convention.

    Evaluated with the Racah closed form in exact rational arithmetic; only
    the final square root is taken in floating point.
    """
    tj1, tm1, tj2, tm2, tJ, tM = (_twice(v) for v in (j1, m1, j2, m2, J, M))
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if tj < 0 or abs(tm) > tj or (tj + tm) % 2:
            raise DomainError(f"invalid pair j={tj / 2}, m={tm / 2}")
    if (tj1 + tj2 + tJ) % 2:
        raise DomainError("j1 + j2 + J must be an integer")
    if tM != tm1 + tm2 or tJ < abs(tj1 - tj2) or tJ > tj1 + tj2:
        return 0.0

    f = math.factorial
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tJ - tj2 + tm1) // 2
    e = (tJ - tj1 - tm2) // 2
    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        den = f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k)
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    pref = Fraction(
        (tJ + 1)
        * f((tJ + tj1 - tj2) // 2)
        * f((tJ - tj1 + tj2) // 2)
        * f((tj1 + tj2 - tJ) // 2),
        f((tj1 + tj2 + tJ) // 2 + 1),
    )
    pref *= (
        f((tJ + tM) // 2)
        * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2)
        * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2)
        * f((tj2 + tm2) // 2)
    )
    value = math.sqrt(float(pref * total * total))
    return value if total > 0 else -value


# ---------------------------------------------------------------------------
# collective operators
# ---------------------------------------------------------------------------


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def _ladder_coefficients(two_j: int) -> np.ndarray:
    """sqrt(J(J+1) - m(m+1)) for m = -J..J-1 (the J+ superdiagonal)."""
    J = two_j / 2
    m = m_values(two_j)[:-1]
    return _readonly(np.sqrt(J * (J + 1) - m * (m + 1)))


@lru_cache(maxsize=None)
def spin_matrices(two_j: int) -> dict[str, np.ndarray]:
    """Dense Jx, Jy, Jz, J+ and J- in the z-Dicke basis."""
    if two_j < 0:
        raise DomainError("two_j must be non-negative")
    c = _ladder_coefficients(two_j)
    jp = np.diag(c, -1).astype(complex)  # (J+)_{m+1, m}
    jm = jp.T.copy()
    jz = np.diag(m_values(two_j)).astype(complex)
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    return {k: _readonly(v) for k, v in
            {"Jx": jx, "Jy": jy, "Jz": jz, "Jplus": jp, "Jminus": jm}.items()}


@dataclass(frozen=True)
class CollectiveOp:
    """A collective spin operator; ``n`` is only used for ``kind='AxisDot'``."""

    kind: str
    two_j: int
    n: tuple[float, float, float] | None = None

    def matrix(self) -> np.ndarray:
        mats = spin_matrices(self.two_j)
        if self.kind == "AxisDot":
            if self.n is None:
                raise DomainError("AxisDot needs a direction")
            nx, ny, nz = np.asarray(self.n, float) / np.linalg.norm(self.n)
            return nx * mats["Jx"] + ny * mats["Jy"] + nz * mats["Jz"]
        try:
            return mats[self.kind]
        except KeyError:
            raise DomainError(f"unknown collective operator {self.kind!r}") from None


def unitary_from_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i t H) for Hermitian H via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _jy_eigensystem(two_j: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of Jy (columns) and the exact eigenvalues m.

    Jx is real symmetric tridiagonal, and Jy = D Jx D^dagger with
    D = exp(-i pi Jz / 2), so one tridiagonal solve gives both.
    """
    m = m_values(two_j)
    if two_j == 0:
        return _readonly(np.ones((1, 1), complex)), _readonly(m)
    _, vecs = eigh_tridiagonal(np.zeros(two_j + 1), _ladder_coefficients(two_j) / 2)
    dphase = np.exp(-0.5j * np.pi * m)
    return _readonly(dphase[:, None] * vecs), _readonly(m)


def wigner_small_d(two_j: int, theta: float) -> np.ndarray:
    """exp(i theta Jy) in the z basis (real up to rounding)."""
    v, m = _jy_eigensystem(two_j)
    return (v * np.exp(1j * theta * m)) @ v.conj().T


def rotation_matrix(two_j: int, theta: float, phi: float) -> np.ndarray:
    """R(theta, phi) = exp(i phi Jz) exp(i theta Jy) in the z-Dicke basis."""
    return np.exp(1j * phi * m_values(two_j))[:, None] * wigner_small_d(two_j, theta)


@lru_cache(maxsize=None)
def basis_matrix(two_j: int, axis: str) -> np.ndarray:
    """Columns are the axis-Dicke kets |J, m>^axis written in the z basis.

    x and y kets are rotated z kets, R(pi/2, 0) and R(pi/2, pi/2); the
    rotation sends |J, m>^z to the eigenvalue -m along the new axis, so the
    columns are reversed to keep column k at eigenvalue m_k.
    """
    if axis == "z":
        return _readonly(np.eye(two_j + 1, dtype=complex))
    if axis == "x":
        rot = rotation_matrix(two_j, np.pi / 2, 0.0)
    elif axis == "y":
        rot = rotation_matrix(two_j, np.pi / 2, np.pi / 2)
    else:
        raise DomainError(f"unknown axis {axis!r}")
    op = spin_matrices(two_j)["J" + axis]
    m = m_values(two_j)
    diag = np.einsum("ik,ij,jk->k", rot.conj(), op, rot).real
    if two_j and np.allclose(diag, -m, atol=1e-9):
        rot = rot[:, ::-1]
    elif not np.allclose(diag, m, atol=1e-9):
        raise AssertionError("rotated basis is not an eigenbasis")
    return _readonly(np.ascontiguousarray(rot))


# ---------------------------------------------------------------------------
# kets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DickeKet:
    """Amplitudes over m = -J..J in the Dicke basis of ``axis``.

    Kets need not be normalized; ``is_normalized`` reports whether they are.
    """

    two_j: int
    amps: np.ndarray = field(repr=False)
    axis: str = "z"

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != self.two_j + 1:
            raise DomainError(f"expected {self.two_j + 1} amplitudes, got {amps.size}")
        if self.axis not in AXES:
            raise DomainError(f"unknown axis {self.axis!r}")
        object.__setattr__(self, "amps", _readonly(amps))

    @property
    def J(self) -> float:
        return self.two_j / 2

    @property
    def N(self) -> int:
        return self.two_j

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm**2 - 1) <= NORM_TOL

    def normalized(self) -> DickeKet:
        n = self.norm
        if n == 0:
            raise DomainError("cannot normalize a zero ket")
        return DickeKet(self.two_j, self.amps / n, self.axis)

    def in_axis(self, axis: str) -> DickeKet:
        return basis_change(self, axis)

    def z_amps(self) -> np.ndarray:
        return self.in_axis("z").amps

    def density(self) -> np.ndarray:
        """|psi><psi| in the z basis (not renormalized)."""
        a = self.z_amps()
        return np.outer(a, a.conj())


def dicke_state(two_j: int, m, axis: str = "z") -> DickeKet:
    k = _twice(m) + two_j
    if k % 2 or not 0 <= k // 2 <= two_j:
        raise DomainError(f"m={m} not allowed for J={two_j / 2}")
    amps = np.zeros(two_j + 1, complex)
    amps[k // 2] = 1.0
    return DickeKet(two_j, amps, axis)


def ground_state(two_j: int) -> DickeKet:
    """All spins down, |J, -J>^z."""
    return dicke_state(two_j, -two_j / 2, "z")


def basis_change(ket: DickeKet, target_axis: str) -> DickeKet:
    if target_axis == ket.axis:
        return ket
    z = basis_matrix(ket.two_j, ket.axis) @ ket.amps
    out = basis_matrix(ket.two_j, target_axis).conj().T @ z
    return DickeKet(ket.two_j, out, target_axis)


def fidelity(a: DickeKet, b: DickeKet) -> float:
    """|<a|b>|^2 between the normalized versions of two kets."""
    za, zb = a.normalized().z_amps(), b.normalized().z_amps()
    return float(abs(np.vdot(za, zb)) ** 2)

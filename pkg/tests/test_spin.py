import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given
from hypothesis import strategies as st
from sympy import Rational
from sympy.physics.quantum.cg import CG
from sympy.physics.quantum.spin import Rotation

from bsvherald.spin import (CollectiveOp, DickeKet, DomainError, basis_change, clebsch_gordan,
                            dicke_state, fidelity, ground_state, log_binomial, log_binomial_row,
                            m_values, rotation_matrix, spin_matrices, unitary_from_hermitian,
                            wigner_small_d)


def half(x2):
    return Rational(x2, 2)


@pytest.mark.parametrize("j1x2,j2x2", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 3)])
def test_clebsch_gordan_matches_sympy(j1x2, j2x2):
    for Jx2 in range(abs(j1x2 - j2x2), j1x2 + j2x2 + 1, 2):
        for m1x2 in range(-j1x2, j1x2 + 1, 2):
            for m2x2 in range(-j2x2, j2x2 + 1, 2):
                Mx2 = m1x2 + m2x2
                if abs(Mx2) > Jx2:
                    continue
                ref = float(CG(half(j1x2), half(m1x2), half(j2x2), half(m2x2), half(Jx2),
                               half(Mx2)).doit())
                got = clebsch_gordan(j1x2 / 2, m1x2 / 2, j2x2 / 2, m2x2 / 2, Jx2 / 2, Mx2 / 2)
                assert got == pytest.approx(ref, abs=1e-13)


def test_clebsch_gordan_selection_rules():
    assert clebsch_gordan(1, 0, 1, 0, 1, 0) == 0.0  # parity
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0  # M mismatch
    assert clebsch_gordan(1, 0, 1, 0, 3, 0) == 0.0  # triangle
    with pytest.raises(DomainError):
        clebsch_gordan(0.3, 0, 1, 0, 1, 0)


@pytest.mark.parametrize("j1x2,j2x2", [(2, 2), (4, 2), (3, 3), (8, 4), (16, 16)])
def test_clebsch_gordan_orthogonality(j1x2, j2x2):
    """sum_{m1 m2} <j1 m1 j2 m2|J M><j1 m1 j2 m2|J' M'> = delta delta (J <= 8)."""
    j1, j2 = j1x2 / 2, j2x2 / 2
    Js = [x / 2 for x in range(abs(j1x2 - j2x2), j1x2 + j2x2 + 1, 2)]
    labels = [(J, M / 2) for J in Js for M in range(-int(2 * J), int(2 * J) + 1, 2)]
    pairs = [(m1 / 2, m2 / 2) for m1 in range(-j1x2, j1x2 + 1, 2) for m2 in range(-j2x2, j2x2 + 1, 2)]
    U = np.array([[clebsch_gordan(j1, m1, j2, m2, J, M) for (J, M) in labels] for (m1, m2) in pairs])
    assert np.allclose(U.T @ U, np.eye(len(labels)), atol=1e-12)
    assert np.allclose(U @ U.T, np.eye(len(pairs)), atol=1e-12)


@pytest.mark.parametrize("two_j", list(range(1, 33)))
def test_spin_algebra(two_j):
    mats = spin_matrices(two_j)
    Jx, Jy, Jz = mats["Jx"], mats["Jy"], mats["Jz"]
    J = two_j / 2
    assert np.allclose(Jx @ Jy - Jy @ Jx, 1j * Jz, atol=1e-10)
    assert np.allclose(Jy @ Jz - Jz @ Jy, 1j * Jx, atol=1e-10)
    assert np.allclose(Jz @ Jx - Jx @ Jz, 1j * Jy, atol=1e-10)
    J2 = Jx @ Jx + Jy @ Jy + Jz @ Jz
    assert np.allclose(J2, J * (J + 1) * np.eye(two_j + 1), atol=1e-9)
    assert np.allclose(mats["Jplus"], Jx + 1j * Jy)


def test_spin_matrices_read_only_and_odd_sizes():
    m = spin_matrices(3)["Jz"]
    with pytest.raises(ValueError):
        m[0, 0] = 5
    assert np.allclose(np.diag(m), [-1.5, -0.5, 0.5, 1.5])
    with pytest.raises(DomainError):
        spin_matrices(-1)


def test_log_binomial_exact_big_integers():
    for n, k in [(10, 3), (64, 32), (200, 77), (5000, 2500)]:
        exact = math.log(math.comb(n, k))
        assert log_binomial(n, k) == pytest.approx(exact, rel=1e-13)
    assert log_binomial(32, 16) == pytest.approx(math.log(601080390), rel=1e-14)
    assert log_binomial(7, 0) == 0.0
    with pytest.raises(DomainError):
        log_binomial(10, 11)
    for n in range(61):
        for k in range(n + 1):
            assert math.exp(log_binomial(n, k)) == pytest.approx(math.comb(n, k), rel=1e-12)
    row = log_binomial_row(64)
    assert np.allclose(np.exp(row - row.max()) * math.comb(64, 32),
                       [math.comb(64, k) for k in range(65)], rtol=1e-12)


def test_rotation_matrix_against_expm():
    two_j = 5
    mats = spin_matrices(two_j)
    for theta, phi in [(0.3, 1.1), (math.pi / 2, 0.0), (2.9, -0.7)]:
        ref = sl.expm(1j * phi * mats["Jz"]) @ sl.expm(1j * theta * mats["Jy"])
        assert np.allclose(rotation_matrix(two_j, theta, phi), ref, atol=1e-12)


@pytest.mark.parametrize("two_j", [1, 2, 3])
def test_wigner_small_d_against_sympy(two_j):
    beta = 0.77
    d = wigner_small_d(two_j, beta)
    m = m_values(two_j)
    # exp(i beta Jy) = d(-beta) in the usual exp(-i beta Jy) convention
    for a, ma in enumerate(m):
        for b, mb in enumerate(m):
            ref = complex(Rotation.d(half(two_j), half(int(2 * ma)), half(int(2 * mb)), -beta).doit())
            assert d[a, b] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("axis,op", [("x", "Jx"), ("y", "Jy"), ("z", "Jz")])
def test_axis_dicke_states_are_eigenstates(axis, op):
    two_j = 6
    M = spin_matrices(two_j)[op]
    for m in m_values(two_j):
        v = dicke_state(two_j, m, axis).z_amps()
        assert np.allclose(M @ v, m * v, atol=1e-12)


@given(st.integers(1, 12), st.sampled_from("xyz"), st.sampled_from("xyz"), st.integers(0, 10**6))
def test_basis_change_round_trip(two_j, a, b, seed):
    r = np.random.default_rng(seed)
    amps = r.normal(size=two_j + 1) + 1j * r.normal(size=two_j + 1)
    k = DickeKet(two_j, amps / np.linalg.norm(amps), a)
    back = basis_change(basis_change(k, b), a)
    assert np.allclose(back.amps, k.amps, atol=1e-12)
    assert basis_change(k, b).norm == pytest.approx(1.0, abs=1e-12)


def test_known_overlap_x_state():
    # <J,-J|^z |J,m>^x has modulus 2^-J sqrt(C(2J, J+m))
    two_j = 10
    z = ground_state(two_j).z_amps()
    for m in m_values(two_j):
        x = dicke_state(two_j, m, "x").z_amps()
        assert abs(np.vdot(z, x)) == pytest.approx(
            math.sqrt(math.comb(two_j, int(m + two_j / 2))) / 2 ** (two_j / 2), rel=1e-12)


def test_dicke_ket_validation():
    with pytest.raises(DomainError):
        DickeKet(2, np.ones(4), "z")
    with pytest.raises(DomainError):
        DickeKet(2, np.ones(3), "w")
    with pytest.raises(DomainError):
        dicke_state(4, 0.5)
    k = DickeKet(2, [1, 1, 0], "z")
    assert not k.is_normalized
    assert k.normalized().is_normalized
    assert fidelity(k, k.normalized()) == pytest.approx(1.0)


def test_collective_op_and_unitary():
    op = CollectiveOp("Jx", 4)
    assert np.allclose(op.matrix(), spin_matrices(4)["Jx"])
    h = spin_matrices(4)["Jy"]
    assert np.allclose(unitary_from_hermitian(h, 0.4), sl.expm(-0.4j * h), atol=1e-12)


def test_rotation_examples():
    d = rotation_matrix(1, 0.9, 0.0)
    assert d[1, 1] == pytest.approx(math.cos(0.45))
    assert np.allclose(rotation_matrix(7, 0.0, 0.0), np.eye(8))
    v = rotation_matrix(2, math.pi, 0.0) @ np.array([1, 0, 0])
    assert abs(abs(v[2]) - 1) < 1e-12
    r = rotation_matrix(9, 1.3, 2.2)
    assert np.allclose(r.conj().T @ r, np.eye(10), atol=1e-10)


def test_spin_one_x_zero_state():
    v = dicke_state(2, 0, "x").z_amps()
    ref = np.array([-1, 0, 1]) / math.sqrt(2)
    assert abs(abs(np.vdot(ref, v)) - 1) < 1e-12


def test_basis_change_unitarity_columns():
    from bsvherald.spin import basis_matrix

    for two_j in (4, 9, 32):
        B = basis_matrix(two_j, "x")
        assert np.allclose((np.abs(B) ** 2).sum(axis=1), 1, atol=1e-12)
        assert np.allclose(B.conj().T @ B, np.eye(two_j + 1), atol=1e-10)

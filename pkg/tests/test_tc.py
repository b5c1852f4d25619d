import math

import numpy as np
import pytest
from scipy.linalg import expm

from bsvherald.observables import qfi
from bsvherald.photon import HeraldSpec
from bsvherald.spin import (DickeKet, DomainError, dicke_state, fidelity, ground_state,
                            log_binomial, m_values, spin_matrices)
from bsvherald.tc import (TcParams, tc_classical_propagator, tc_crossover_time,
                          tc_heralded_closed_form, tc_p0_asymptote, tc_p0_density, tc_qfi_exact,
                          tc_qfi_large_n, tc_three_level_truncation)
from bsvherald.xfa import heralded_vector, make_field_grid, suggest_n_points

P32 = TcParams.from_field(32, 0.1)


def test_params():
    assert TcParams(4, 0.005, 3.0).F_c == pytest.approx(0.005 * math.exp(3))
    assert TcParams.from_field(8, 0.2).F_c == pytest.approx(0.2)
    for bad in (3, 0, -2):
        with pytest.raises(DomainError):
            TcParams(bad, 0.005, 1.0)


def test_propagator_examples(rng):
    prop = tc_classical_propagator(TcParams(2, 0.005, 1.0))
    psi = ground_state(2)
    assert np.allclose(prop.evolve_many([0.0], 3.0, psi)[0], psi.z_amps())
    F = 0.3
    out = prop.apply(F, math.pi / (2 * F), psi)
    assert abs(out.z_amps()[2]) == pytest.approx(1.0, abs=1e-12)
    for _ in range(5):
        F, t = rng.normal(), rng.uniform(0, 50)
        ref = expm(-2j * F * t * spin_matrices(2)["Jx"]) @ psi.z_amps()
        assert np.allclose(prop.apply(F, t, psi).z_amps(), ref, atol=1e-12)
    # complex F rotates the axis in the xy plane
    F = 0.2 - 0.1j
    ref = expm(-2j * 4.0 * (F.real * spin_matrices(2)["Jx"] - F.imag * spin_matrices(2)["Jy"])) @ psi.z_amps()
    assert np.allclose(prop.apply(F, 4.0, psi).z_amps(), ref, atol=1e-12)


def test_closed_form_examples():
    psi0 = ground_state(32)
    st = tc_heralded_closed_form(P32, 0.0, 0.0, psi0)
    assert fidelity(st.normalized(), psi0) == pytest.approx(1.0)
    late = tc_heralded_closed_form(P32, 0.0, 200.0, psi0)
    assert fidelity(late.normalized(), dicke_state(32, 0, "x")) > 1 - 1e-12
    t = 10.0
    far = tc_heralded_closed_form(P32, 100 * math.sqrt(2) * t, t, psi0)
    bound = math.sqrt(P32.F_c / math.sqrt(math.pi)) * math.exp(-(P32.F_c * t * 84) ** 2)
    assert np.max(np.abs(far.ket.amps)) <= bound + 1e-300


@pytest.mark.parametrize("q", [0.0, 25.0, -60.0, 140.0])
@pytest.mark.parametrize("t", [0.0, 3.0, 17.5, 40.0])
def test_engine_matches_closed_form(q, t):
    psi0 = ground_state(16)
    p = TcParams.from_field(16, 0.1)
    prop = tc_classical_propagator(p)
    grid = make_field_grid(p.F_c, suggest_n_points(p.F_c, 40.0, 16, 140.0))
    eng = heralded_vector(prop, grid, psi0, HeraldSpec.from_scaled(q, g=p.g), t)
    ref = tc_heralded_closed_form(p, q, t, psi0)
    assert eng.prob_density == pytest.approx(ref.prob_density, rel=1e-8, abs=1e-20)  # cancellation floor of the F sum
    if ref.prob_density > 1e-30:
        assert 1 - fidelity(eng.normalized(), ref.normalized()) < 1e-8


def test_qfi_exact_limits_and_range():
    assert tc_qfi_exact(P32, 0.0, 0.0) == pytest.approx(32)
    assert tc_qfi_exact(P32, 0.0, 1e4) == pytest.approx(32 * 17, rel=1e-12)
    for t in np.linspace(0, 80, 33):
        for q in (0, 30, -100):
            v = tc_qfi_exact(P32, q, t)
            assert 32 - 1e-9 <= v <= 32 * 17 + 1e-9


def test_qfi_exact_matches_state_qfi():
    psi0 = ground_state(32)
    for q in (0.0, 40.0):
        for t in (2.0, 9.0, 30.0):
            st = tc_heralded_closed_form(P32, q, t, psi0)
            assert tc_qfi_exact(P32, q, t) == pytest.approx(qfi(st.normalized())[0], rel=1e-9)


def test_qfi_exact_n2_brute_force():
    p = TcParams.from_field(2, 0.3)
    # explicit x-basis 3-vector: binomial weights 1/4, 1/2, 1/4
    for q, t in [(0.0, 1.0), (1.5, 2.0), (-0.7, 5.0)]:
        mu_term = lambda m: math.exp(-(p.F_c ** 2) * (t * m - q / math.sqrt(2)) ** 2)
        c = np.array([math.sqrt(w) * mu_term(m) for w, m in zip((0.25, 0.5, 0.25), (-1, 0, 1))])
        ket = DickeKet(2, c.astype(complex), "x")
        x = ket.normalized()
        assert tc_qfi_exact(p, q, t) == pytest.approx(qfi(x)[0], rel=1e-10)


def test_qfi_exact_nondecreasing_at_zero_herald():
    v = [tc_qfi_exact(P32, 0.0, t) for t in np.linspace(0, 80, 401)]
    assert np.all(np.diff(v) >= -1e-12)


def test_large_n_formula():
    assert tc_qfi_large_n(P32, 0.0) == 32
    assert tc_qfi_large_n(P32, 1e5) == pytest.approx(32 + 32 * 32 / 2, rel=1e-9)
    t = 1 / P32.F_c
    direct = 32 + (1 - math.exp(-2)) * (512 - 32 / (2 * 33))
    assert tc_qfi_large_n(P32, t) == pytest.approx(direct, rel=1e-14)
    v = [tc_qfi_large_n(P32, t) for t in np.linspace(0, 80, 401)]
    assert np.all(np.diff(v) >= 0)


def test_large_n_agrees_with_exact_at_n32():
    p = TcParams(32, 0.005, 3.0)
    for t in np.linspace(0, 40, 81):
        assert tc_qfi_large_n(p, t) == pytest.approx(tc_qfi_exact(p, 0.0, t), rel=0.02)


def test_p0_density():
    assert tc_p0_density(P32, 0.0) == pytest.approx(P32.F_c / math.sqrt(math.pi))
    assert tc_p0_density(P32, 0.0) == pytest.approx(tc_p0_asymptote(P32, 0.0))
    # direct sum
    t = 12.0
    m = m_values(32)
    direct = sum(math.exp(log_binomial(32, 16 + int(k)) - 32 * math.log(2)) * math.exp(-2 * (P32.F_c * t * k) ** 2)
                 for k in m) * P32.F_c / math.sqrt(math.pi)
    assert tc_p0_density(P32, t) == pytest.approx(direct, rel=1e-12)
    # closed-form state norm is the same number
    st = tc_heralded_closed_form(P32, 0.0, t, ground_state(32))
    assert st.prob_density == pytest.approx(direct, rel=1e-12)
    # large-tau asymptote (the sum is a theta function; 1% needs tau >~ 1.5)
    assert tc_p0_density(P32, 40.0) == pytest.approx(tc_p0_asymptote(P32, 40.0), rel=0.01)
    # small tau
    assert tc_p0_density(P32, 0.5) == pytest.approx(tc_p0_asymptote(P32, 0.5), rel=0.01)


def test_p0_scaling_exponent():
    Ns = np.array([8, 16, 32, 64, 128])
    vals = [tc_p0_density(TcParams.from_field(int(N), 0.1), 40.0) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(vals), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_three_level_truncation():
    psi0 = ground_state(32)
    k = tc_three_level_truncation(P32, 0.0, 1e3, psi0)
    assert fidelity(k.normalized(), dicke_state(32, 0, "x")) == pytest.approx(1.0)
    for tau in (3.0, 4.0, 8.0):
        t = tau / P32.F_c
        full = tc_heralded_closed_form(P32, 0.0, t, psi0).normalized()
        assert fidelity(tc_three_level_truncation(P32, 0.0, t, psi0).normalized(), full) > 0.999
    # m = +1 weight relative to m = 0 decays as exp(-2 tau^2) times the binomial ratio
    c = 16
    ratio = math.exp(log_binomial(32, 17) - log_binomial(32, 16))
    for t in (5.0, 10.0):
        a = tc_three_level_truncation(P32, 0.0, t).amps
        assert abs(a[c + 1] / a[c]) ** 2 == pytest.approx(ratio * math.exp(-2 * (P32.F_c * t) ** 2), rel=1e-10)
    assert tc_three_level_truncation(P32, 0.0, 10.0).axis == "x"


def test_crossover_time():
    assert tc_crossover_time(0.0) == 0.0
    assert tc_crossover_time(80.0) == pytest.approx(28.28, abs=0.01)
    with pytest.raises(DomainError):
        tc_crossover_time(-1.0)


@pytest.mark.parametrize("q", [5.0, 30.0, 100.0])
def test_nonzero_herald_converges_to_jx0(q):
    t = 10 * max(1 / P32.F_c, q)
    st = tc_heralded_closed_form(P32, q, t, ground_state(32))
    assert fidelity(st.normalized(), dicke_state(32, 0, "x")) > 0.99

import math
from functools import reduce
from itertools import product

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bsvherald.dicke import (DickeModelParams, DickePropagator, FloquetMagnusPropagator,
                             StepRejected, dicke_classical_propagator,
                             dicke_stroboscopic_heralded, floquet_magnus_propagator,
                             floquet_magnus_unitary, kick_operator, product_state_to_dicke,
                             stroboscopic_times, y_filtered_dicke_state, z_cat_reference)
from bsvherald.observables import qfi_density
from bsvherald.photon import HeraldSpec
from bsvherald.spin import (DickeKet, DomainError, dicke_state, fidelity, ground_state,
                            spin_matrices)
from bsvherald.tc import TcParams, TcPropagator
from bsvherald.xfa import heralded_series, make_field_grid, suggest_n_points


def _dicke_in_qubits(N, k):
    """|J, k - J> as a normalized 2^N vector, qubit basis (up, down)."""
    v = np.zeros(2**N)
    for bits in product((0, 1), repeat=N):
        if sum(bits) == k:
            v[int("".join(str(1 - b) for b in bits), 2)] = 1
    return v / np.linalg.norm(v)


def test_product_state_matches_kron(rng):
    N = 4
    for _ in range(3):
        q = rng.normal(size=2) + 1j * rng.normal(size=2)
        up, down = q / np.linalg.norm(q)
        full = reduce(np.kron, [np.array([up, down])] * N)
        ref = [np.vdot(_dicke_in_qubits(N, k), full) for k in range(N + 1)]
        assert np.allclose(product_state_to_dicke(up, down, N), ref, atol=1e-12)
    rows = product_state_to_dicke([1, 0], [0, 1], 4)
    assert rows.shape == (2, 5)
    assert np.allclose(rows[0], [0, 0, 0, 0, 1]) and np.allclose(rows[1], [1, 0, 0, 0, 0])


def test_params_validation():
    with pytest.raises(DomainError):
        DickeModelParams(3, 0.005, 1.0)
    with pytest.raises(DomainError):
        DickeModelParams(4, 0.005, 1.0, dt_classical=0.0)
    assert DickeModelParams.from_field(4, 0.1).F_c == pytest.approx(0.1)


def _reference_lab(N, F, t, omega=1.0):
    mats = spin_matrices(N)

    def rhs(s, y):
        h = omega * mats["Jz"] + 4 * F * math.cos(omega * s) * mats["Jx"]
        return -1j * (h @ y)

    y0 = ground_state(N).z_amps()
    sol = solve_ivp(rhs, (0, t), y0, method="DOP853", rtol=1e-12, atol=1e-12)
    lab = sol.y[:, -1]
    return np.exp(1j * omega * t * np.diag(mats["Jz"]).real) * lab


@pytest.mark.parametrize("F,t", [(0.05, 7.3), (0.2, 3.0), (-0.1, 12.0)])
def test_propagator_matches_fine_integration(F, t):
    N = 4
    p = DickeModelParams(N, 0.005, 1.0, dt_classical=1e-3)
    t = round(t / 1e-3) * 1e-3
    out = DickePropagator(p).apply(F, t, ground_state(N)).z_amps()
    ref = _reference_lab(N, F, t)
    assert abs(np.vdot(ref, out)) ** 2 > 1 - 1e-8
    # the rotating-frame global phase convention is fixed too
    assert np.allclose(out, ref, atol=1e-4)


def test_zero_field_and_norm():
    p = DickeModelParams(8, 0.005, 2.0)
    prop = dicke_classical_propagator(p)
    psi = ground_state(8)
    for t in (0.0, 1.0, 13.37):
        assert fidelity(prop.apply(0.0, t, psi), psi) == pytest.approx(1.0, abs=1e-12)
    F = np.linspace(-0.3, 0.3, 7)
    for t, rows in prop.evolve_series(F, [0.0, 5.0, 20.0], psi):
        assert np.allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-10)
    with pytest.raises(DomainError):
        prop.apply(0.1, 1.0, dicke_state(8, 0, "x"))


def test_series_equals_pointwise():
    p = DickeModelParams(6, 0.005, 2.0)
    prop = DickePropagator(p)
    F = [0.0, 0.07, -0.2]
    times = [0.5, 2.0, 3.14]
    got = dict(prop.evolve_series(F, times, ground_state(6)))
    for t in times:
        ts = prop.snap(t) * p.dt_classical
        assert np.allclose(got[ts], prop.evolve_many(F, t, ground_state(6)), atol=1e-13)


def test_product_structure_preserved():
    """Single-qubit reduced state stays pure: |<J>| = J."""
    N = 16
    mats = spin_matrices(N)
    prop = DickePropagator(DickeModelParams(N, 0.005, 2.0))
    for F, t in [(0.1, 3.0), (0.4, 11.0)]:
        v = prop.apply(F, t, ground_state(N)).z_amps()
        s = np.array([np.vdot(v, mats[k] @ v).real for k in ("Jx", "Jy", "Jz")])
        assert np.linalg.norm(s) == pytest.approx(N / 2, abs=1e-8)


def test_rwa_limit():
    N, F = 8, 0.01
    psi = ground_state(N)
    dk = DickePropagator(DickeModelParams(N, 0.005, 1.0))
    tc = TcPropagator(TcParams(N, 0.005, 1.0))
    times = np.arange(0.5, 20.01, 0.5)
    fids = [fidelity(dk.apply(F, t, psi), tc.apply(F, t, psi)) for t in times]
    assert np.mean(fids) > 0.99


def test_step_rejection_guard(monkeypatch):
    import bsvherald.dicke as dm
    monkeypatch.setattr(dm, "UNITARITY_TOL", -1.0)
    prop = DickePropagator(DickeModelParams(2, 0.005, 1.0))
    with pytest.raises(StepRejected):
        list(prop.evolve_series([0.1], [0.1], ground_state(2)))


def test_kick_operator():
    N, F = 4, 0.05
    mats = spin_matrices(N)
    for m in range(4):
        assert np.allclose(kick_operator(N, F, m * math.pi), 0, atol=1e-15)
    assert np.allclose(kick_operator(N, F, math.pi / 2), -2 * F * mats["Jy"], atol=1e-15)
    u = floquet_magnus_unitary(N, F, 3 * math.pi)
    tc = TcPropagator(TcParams(N, 0.005, 1.0)).apply(F, 3 * math.pi, ground_state(N))
    assert np.allclose(u @ ground_state(N).z_amps(), tc.z_amps(), atol=1e-12)
    with pytest.warns(UserWarning):
        floquet_magnus_unitary(N, 0.5, 1.0)


def test_floquet_magnus_accuracy_n2():
    p = DickeModelParams(2, 0.005, 1.0)
    exact = DickePropagator(p)
    fm = FloquetMagnusPropagator(p)
    psi = ground_state(2)
    for t in np.arange(0.0, 20.01, 0.25):
        a = exact.apply(0.05, t, psi)
        b = fm.apply(0.05, t, psi)
        assert fidelity(a, b) > 0.999
        assert np.allclose(b.z_amps(), floquet_magnus_propagator(0.05, t, psi).z_amps())


def test_floquet_magnus_beats_rwa_n8():
    p = DickeModelParams(8, 0.005, 1.0)
    psi = ground_state(8)
    exact, fm, tc = DickePropagator(p), FloquetMagnusPropagator(p), TcPropagator(TcParams(8, 0.005, 1.0))
    ts = np.arange(0.25, 20.01, 0.25)
    f_fm = [fidelity(exact.apply(0.05, t, psi), fm.apply(0.05, t, psi)) for t in ts]
    f_tc = [fidelity(exact.apply(0.05, t, psi), tc.apply(0.05, t, psi)) for t in ts]
    assert min(f_fm) > 0.995
    assert np.mean(f_fm) > np.mean(f_tc)


def test_stroboscopic_times():
    assert np.allclose(stroboscopic_times(2), [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2])
    p = DickeModelParams.from_field(4, 0.1)
    with pytest.raises(DomainError):
        dicke_stroboscopic_heralded(p, 1.0, ground_state(4))


def test_stroboscopic_weak_field_is_jx0():
    p = DickeModelParams.from_field(8, 1e-3, g=1e-4)
    t = stroboscopic_times(4000)[-1]
    st = dicke_stroboscopic_heralded(p, t, ground_state(8), method="floquet")
    assert fidelity(st.normalized(), dicke_state(8, 0, "x")) > 0.999


def test_stroboscopic_exact_vs_floquet():
    p = DickeModelParams.from_field(8, 0.05)
    t = stroboscopic_times(6)[-1]
    grid = make_field_grid(p.F_c, suggest_n_points(p.F_c, t, 8, extra_frequency=4 * 8))
    a = dicke_stroboscopic_heralded(p, t, ground_state(8), grid=grid)
    b = dicke_stroboscopic_heralded(p, t, ground_state(8), method="floquet")
    assert fidelity(a.normalized(), b.normalized()) > 0.999
    assert a.prob_density == pytest.approx(b.prob_density, rel=0.02)
    with pytest.raises(ValueError):
        dicke_stroboscopic_heralded(p, t, ground_state(8), method="magic")


def test_z_cat_formation():
    N = 32
    p = DickeModelParams.from_field(N, 1 / math.sqrt(N))
    t = stroboscopic_times(12)[-1]
    st = dicke_stroboscopic_heralded(p, t, ground_state(N), method="floquet")
    assert fidelity(st.normalized(), z_cat_reference(N)) > 0.9


def test_z_cat_reference():
    c = z_cat_reference(2)
    assert np.allclose(c.z_amps(), [-1 / math.sqrt(2), 0, 1 / math.sqrt(2)])
    assert c.norm == pytest.approx(1.0)
    for N in (2, 8, 32):
        assert qfi_density(z_cat_reference(N)) == pytest.approx(N)
    assert fidelity(y_filtered_dicke_state(64), z_cat_reference(64)) > 0.95
    assert fidelity(y_filtered_dicke_state(8, 0.0), dicke_state(8, 0, "x")) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        z_cat_reference(5)


def test_y_filtered_state_dense():
    N = 16
    mats = spin_matrices(N)
    w, v = np.linalg.eigh(mats["Jy"])
    filt = v @ np.diag(np.exp(-w * w / N)) @ v.conj().T
    ref = DickeKet(N, filt @ dicke_state(N, 0, "x").z_amps(), "z").normalized()
    assert fidelity(y_filtered_dicke_state(N), ref) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.slow
def test_strong_field_qfi_oscillates_at_2omega():
    N = 32
    p = DickeModelParams.from_field(N, 0.27299075073652)
    prop = DickePropagator(p)
    times = np.arange(0, 40.0 + 1e-9, 0.05)
    grid = make_field_grid(p.F_c, suggest_n_points(p.F_c, 40.0, N, extra_frequency=4 * N))
    sts = heralded_series(prop, grid, ground_state(N), HeraldSpec(g=p.g), times)
    q = np.array([qfi_density(s.normalized()) for s in sts])
    assert q.max() > 0.95 * N
    tail = q[times >= 10] - q[times >= 10].mean()
    spec = np.abs(np.fft.rfft(tail * np.hanning(tail.size)))
    freqs = 2 * math.pi * np.fft.rfftfreq(tail.size, d=0.05)
    k = 1 + int(np.argmax(spec[1:]))
    assert abs(freqs[k] - 2.0) <= freqs[1] + 1e-12

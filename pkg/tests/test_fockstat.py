import numpy as np
import pytest

from meanfield_lindblad.fockstat import (build_liouvillian, evolve_fock, fock_report, ladder,
                                         physical_states, qp_covariance, quadratures,
                                         recursion_analysis, stationary_states,
                                         vacuum_fidelity)
from meanfield_lindblad.mesoflow import asymptotic_covariance


def _explicit(L, rho):
    Ld = L.conj().T
    return L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L)


def _random_state(rng, d, support):
    M = np.zeros((d, d), dtype=complex)
    M[:support, :support] = rng.normal(size=(support, support)) + 1j * rng.normal(
        size=(support, support))
    rho = M @ M.conj().T
    return rho / np.trace(rho).real


def test_jump_operator_identities():
    a = ladder(20)
    assert np.max(np.abs(build_liouvillian(1, 20).jump - np.sqrt(2) * a)) <= 1e-12
    assert np.max(np.abs(build_liouvillian(-1, 20).jump - np.sqrt(2) * a.conj().T)) <= 1e-12


def test_quadratures_canonical_away_from_edge():
    q, p = quadratures(12)
    comm = q @ p - p @ q
    assert np.allclose(comm[:12, :12], 1j * np.eye(12))


def test_superoperator_matches_direct_action(rng):
    for b in (1.0, -1.0, 0.3):
        L = build_liouvillian(b, 8)
        rho = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        assert np.allclose(L.apply(rho), _explicit(L.jump, rho), atol=1e-12)


def test_dephasing_case_moves_vacuum():
    L = build_liouvillian(0.0, 20)
    q, _ = quadratures(20)
    vac = np.zeros((21, 21))
    vac[0, 0] = 1
    out = L.apply(vac)
    # b = 0 is the double commutator -[q, [q, rho]] / 2
    assert np.allclose(out, -0.5 * (q @ (q @ vac - vac @ q) - (q @ vac - vac @ q) @ q))
    assert np.linalg.norm(out) > 0.1


def test_damping_has_unique_vacuum():
    good = physical_states(stationary_states(build_liouvillian(1, 30)))
    assert len(good) == 1
    assert vacuum_fidelity(good[0].rho) >= 1 - 1e-8
    cov = qp_covariance(good[0].rho)
    assert np.max(np.abs(cov - asymptotic_covariance(np.eye(2), 1.0))) <= 1e-8


def test_gain_has_no_physical_state():
    cands = stationary_states(build_liouvillian(-1, 30))
    assert physical_states(cands) == []
    assert cands and all(c.artifact for c in cands)


def test_recursion_reports():
    plus = recursion_analysis(1, 30)
    n = np.arange(30)
    assert np.allclose(plus.coefficients, n / (n + 1))
    assert plus.coefficients[0] == 0.0  # rho_11 = 0 * rho_00
    expected = np.zeros(31)
    expected[0] = 1
    assert plus.feasible and np.allclose(plus.solution, expected)
    minus = recursion_analysis(-1, 30)
    assert minus.rho00_forced_zero and not minus.feasible
    assert np.allclose(minus.coefficients, np.arange(1, 30) / np.arange(2, 31))
    with pytest.raises(ValueError):
        recursion_analysis(0, 30)


@pytest.mark.parametrize("n_max", [20, 30, 40])
def test_methods_agree(n_max):
    for b in (1, -1):
        good = physical_states(stationary_states(build_liouvillian(b, n_max)))
        rec = recursion_analysis(b, n_max)
        assert (len(good) == 1) == rec.feasible
        assert len(good) <= 1


def test_truncation_stability():
    small = physical_states(stationary_states(build_liouvillian(1, 20)))[0].rho
    large = physical_states(stationary_states(build_liouvillian(1, 40)))[0].rho
    padded = np.zeros_like(large)
    padded[:21, :21] = small
    # both are (numerically) pure, so the overlap is the fidelity
    assert np.trace(padded @ large).real >= 1 - 1e-10


def test_damping_dynamics_reach_vacuum(rng):
    L = build_liouvillian(1, 30)
    rho0 = _random_state(rng, 31, 10)
    final = evolve_fock(L, rho0, [0.0, 20.0])[-1]
    vac = np.zeros((31, 31))
    vac[0, 0] = 1
    trace_dist = 0.5 * np.abs(np.linalg.eigvalsh(final - vac)).sum()
    assert trace_dist <= 1e-6


def test_gain_dynamics_pump_photons():
    L = build_liouvillian(-1, 40)
    vac = np.zeros((41, 41), dtype=complex)
    vac[0, 0] = 1
    n_op = np.diag(np.arange(41.0))
    prev = -1.0
    checked = 0
    for rho in evolve_fock(L, vac, np.linspace(0, 2, 41)):
        if rho[-1, -1].real >= 1e-6:
            break
        n = np.trace(rho @ n_op).real
        assert n > prev
        prev = n
        checked += 1
    assert checked > 5


def test_small_truncation_rejected():
    with pytest.raises(ValueError):
        build_liouvillian(1, 3)


def test_report_fields():
    rep = fock_report(1, 20)
    assert rep["stationary_count"] == 1 and rep["vacuum_fidelity"] >= 1 - 1e-8
    assert fock_report(-1, 20)["stationary_count"] == 0

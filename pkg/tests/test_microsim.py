import numpy as np
import pytest

from meanfield_lindblad.algebra import validate_kossakowski
from meanfield_lindblad.errors import NotExchangeSymmetric, SizeExceeded
from meanfield_lindblad.macroflow import integrate_macro
from meanfield_lindblad.mesoflow import gaussian_char, integrate_covariance
from meanfield_lindblad.microsim import (MICRO_CSV_HEADER, SPIN_HALF, Reference,
                                         Representation, SingleSiteState, SpinChainState,
                                         build_product_state, check_exchange_symmetric,
                                         collective_moments, collective_observables,
                                         dense_spin_operators, dicke_multiplicity,
                                         evolve_micro, fluctuation_char, heisenberg_generator,
                                         lindblad_rhs, pair_correlation_12, qclt_product_char,
                                         sector_js, site_operator, spin_matrices, to_dense,
                                         write_micro_csv)

from conftest import random_bloch, random_psd

SWEEP_D = np.array([[1, 0.3 + 0.8j, 0], [0.3 - 0.8j, 1, 0], [0, 0, 0.5]])


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def test_spin_matrices_algebra():
    for j in (0.5, 1.0, 2.5):
        Jx, Jy, Jz = spin_matrices(j)
        assert np.allclose(Jx @ Jy - Jy @ Jx, 1j * Jz)
        cas = Jx @ Jx + Jy @ Jy + Jz @ Jz
        assert np.allclose(cas, j * (j + 1) * np.eye(int(2 * j + 1)))
        assert Jz[0, 0] == pytest.approx(j)


def test_dicke_multiplicities_fill_hilbert_space():
    for N in (1, 2, 5, 8, 13):
        total = sum(dicke_multiplicity(N, j) * (2 * j + 1) for j in sector_js(N))
        assert total == 2 ** N


def test_two_site_maximally_mixed():
    st = build_product_state(2, SingleSiteState(np.zeros(3)))
    blocks = {b.j: b for b in st.blocks}
    assert np.allclose(blocks[1.0].block, np.eye(3) / 4) and blocks[1.0].multiplicity == 1
    assert np.allclose(blocks[0.0].block, [[0.25]]) and blocks[0.0].multiplicity == 1
    assert st.trace() == pytest.approx(1.0, abs=1e-15)
    # brute force: the 4x4 tensor product projected on the triplet
    dense = to_dense(st)
    assert np.allclose(dense, np.eye(4) / 4)


def test_two_site_spin_up():
    st = build_product_state(2, SingleSiteState([0, 0, 0.5]))
    blocks = {b.j: b.block for b in st.blocks}
    expected = np.zeros((3, 3))
    expected[0, 0] = 1
    assert np.allclose(blocks[1.0], expected) and np.allclose(blocks[0.0], 0)


@pytest.mark.parametrize("bloch", [[0, 0, 0.4], [0.2, -0.3, 0.1], [0.5, 0, 0]])
def test_sector_state_matches_tensor_power(bloch):
    site = SingleSiteState(bloch)
    for N in (3, 6):
        dense = build_product_state(N, site, Representation.DENSE)
        assert np.allclose(dense.rho, _kron_all([site.rho] * N))
        assert np.max(np.abs(to_dense(build_product_state(N, site)) - dense.rho)) <= 1e-12


def test_moments_agree_between_engines():
    site = SingleSiteState([0, 0, 0.4])
    f_d, s_d = collective_moments(build_product_state(6, site, Representation.DENSE))
    f_s, s_s = collective_moments(build_product_state(6, site))
    assert np.max(np.abs(f_d - f_s)) <= 1e-10 and np.max(np.abs(s_d - s_s)) <= 1e-10


def test_zero_generator():
    spec = validate_kossakowski(np.zeros((3, 3)))
    st = build_product_state(4, SingleSiteState([0.1, 0.2, 0.3]))
    assert all(not b.block.any() for b in lindblad_rhs(st, spec).blocks)
    traj = evolve_micro(st, spec, np.linspace(0, 3, 4))
    assert all(np.array_equal(s.blocks[1].block, st.blocks[1].block) for _, s in traj)


def test_heisenberg_duality(rng):
    N = 3
    D = random_psd(rng)
    spec = validate_kossakowski(D)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = M @ M.conj().T
    rho /= np.trace(rho)
    st = SpinChainState(N, Representation.DENSE, rho=rho)
    drho = lindblad_rhs(st, spec).rho
    for _ in range(20):
        X = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        x = X + X.conj().T
        lhs = np.trace(drho @ x)
        rhs = np.trace(rho @ heisenberg_generator(N, D, x))
        assert abs(lhs - rhs) <= 1e-10


def test_derivatives_agree_between_engines(rng):
    spec = validate_kossakowski(random_psd(rng))
    site = SingleSiteState(random_bloch(rng))
    d_dense = lindblad_rhs(build_product_state(4, site, Representation.DENSE), spec)
    d_sect = lindblad_rhs(build_product_state(4, site), spec)
    # the derivative is traceless, so compare its moments directly
    f1, s1 = collective_moments(d_dense)
    f2, s2 = collective_moments(d_sect)
    assert np.max(np.abs(f1 - f2)) <= 1e-10 and np.max(np.abs(s1 - s2)) <= 1e-10
    assert np.max(np.abs(to_dense(d_sect) - d_dense.rho)) <= 1e-12


def _observable_gap(a, b):
    return max(float(np.max(np.abs(a.mean - b.mean))),
               float(np.max(np.abs(a.fluct_cov - b.fluct_cov))),
               abs(a.pair_corr_12 - b.pair_corr_12))


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6, 7, 8])
def test_engine_equivalence(N):
    rng = np.random.default_rng(100 + N)
    t = np.linspace(0, 5, 6)
    for _ in range(10):
        spec = validate_kossakowski(random_psd(rng))
        site = SingleSiteState(random_bloch(rng))
        runs = [evolve_micro(build_product_state(N, site, rep), spec, t, tol=1e-11)
                for rep in (Representation.DENSE, Representation.SECTORS)]
        for (_, sd), (_, ss) in zip(*runs):
            gap = _observable_gap(collective_observables(sd), collective_observables(ss))
            assert gap <= 1e-9


def test_sectors_never_mix_and_match_dense(rng):
    spec = validate_kossakowski(random_psd(rng))
    site = SingleSiteState(random_bloch(rng))
    st0 = build_product_state(6, site)
    t = np.array([0.0, 1.0, 2.5])
    sect = evolve_micro(st0, spec, t, tol=1e-12)
    dense = evolve_micro(build_product_state(6, site, Representation.DENSE), spec, t, tol=1e-12)
    for (_, s), (_, d) in zip(sect, dense):
        assert [(b.j, b.multiplicity, b.block.shape) for b in s.blocks] == \
            [(b.j, b.multiplicity, b.block.shape) for b in st0.blocks]
        assert np.max(np.abs(to_dense(s) - d.rho)) <= 1e-9
        check_exchange_symmetric(d)


def test_physicality_along_evolution(rng):
    for rep in (Representation.DENSE, Representation.SECTORS):
        spec = validate_kossakowski(random_psd(rng))
        traj = evolve_micro(build_product_state(5, SingleSiteState(random_bloch(rng)), rep),
                            spec, np.linspace(0, 5, 11))
        for _, s in traj:
            assert abs(s.trace() - 1) <= 1e-9
            assert s.hermiticity_error() <= 1e-9
            assert s.min_eigenvalue() >= -1e-7


def test_product_state_observables():
    w = np.array([0.2, -0.1, 0.3])
    for rep in (Representation.DENSE, Representation.SECTORS):
        obs = collective_observables(build_product_state(6, SingleSiteState(w), rep))
        assert np.allclose(obs.mean, w, atol=1e-14)
        assert np.allclose(obs.fluct_cov, np.eye(3) / 4 - np.outer(w, w), atol=1e-13)
        assert abs(obs.pair_corr_12) <= 1e-12
    mixed = collective_observables(build_product_state(10, SingleSiteState(np.zeros(3))))
    assert np.allclose(mixed.fluct_cov, np.eye(3) / 4, atol=1e-13)


def test_initial_fixed_reference():
    st = build_product_state(8, SingleSiteState([0.1, 0.2, 0.3]))
    ev = collective_observables(st, Reference.EVOLVED)
    fixed = collective_observables(st, Reference.INITIAL_FIXED, ref_mean=ev.mean)
    assert np.allclose(ev.fluct_cov, fixed.fluct_cov, atol=1e-13)
    shifted = collective_observables(st, "InitialFixed", ref_mean=ev.mean + [0.01, 0, 0])
    # a shifted centre adds N * delta delta^T
    assert shifted.fluct_cov[0, 0] == pytest.approx(ev.fluct_cov[0, 0] + 8 * 1e-4, abs=1e-12)
    with pytest.raises(ValueError):
        collective_observables(st, Reference.INITIAL_FIXED)


def test_pair_correlation_site_resolved(rng):
    N = 6
    spec = validate_kossakowski(SWEEP_D)
    traj = evolve_micro(build_product_state(N, SingleSiteState([0.3, 0, 0.2]),
                                            Representation.DENSE), spec, [0.0, 2.0], tol=1e-12)
    st = traj[-1][1]
    rho = st.rho
    s1 = site_operator(N, 0, SPIN_HALF[0])
    s2 = site_operator(N, 1, SPIN_HALF[1])
    ref = (np.trace(rho @ s1 @ s2) - np.trace(rho @ s1) * np.trace(rho @ s2)).real
    assert abs(pair_correlation_12(st) - ref) <= 1e-10
    assert abs(ref) > 1e-4  # the check is not vacuous


def test_exchange_symmetry_violation_detected():
    up = np.diag([1.0, 0.0]).astype(complex)
    down = np.diag([0.0, 1.0]).astype(complex)
    st = SpinChainState(2, Representation.DENSE, rho=np.kron(up, down))
    with pytest.raises(NotExchangeSymmetric):
        pair_correlation_12(st)


def test_fluctuation_first_moment_vanishes():
    spec = validate_kossakowski(SWEEP_D)
    st = evolve_micro(build_product_state(12, SingleSiteState([0.3, 0, 0.2])), spec,
                      [0.0, 1.0])[-1][1]
    r, h = np.array([0.3, -0.5, 0.8]), 1e-4
    deriv = (fluctuation_char(st, h * r) - fluctuation_char(st, -h * r)) / (2 * h)
    assert abs(deriv) <= 1e-7


def test_characteristic_function_cumulant():
    spec = validate_kossakowski(SWEEP_D)
    st = evolve_micro(build_product_state(10, SingleSiteState([0.3, 0, 0.2])), spec,
                      [0.0, 1.5])[-1][1]
    obs = collective_observables(st)
    assert fluctuation_char(st, np.zeros(3)) == pytest.approx(1.0, abs=1e-14)
    h = 1e-3
    for r in (np.array([1.0, 0, 0]), np.array([0.4, -0.7, 0.5])):
        logabs = lambda e: np.log(abs(fluctuation_char(st, e * r)))
        second = (logabs(h) - 2 * logabs(0.0) + logabs(-h)) / h ** 2
        # log|CF(e r)| = -e^2 (r, S r) / 2 + O(e^4)
        assert -second == pytest.approx(r @ obs.fluct_cov @ r, rel=1e-4)


def test_characteristic_function_engines_agree():
    site = SingleSiteState([0.1, 0.2, -0.3])
    r = np.array([0.7, -0.2, 1.1])
    vals = [fluctuation_char(build_product_state(6, site, rep), r)
            for rep in (Representation.DENSE, Representation.SECTORS)]
    assert abs(vals[0] - vals[1]) <= 1e-12
    assert abs(vals[1] - qclt_product_char(site, 6, r)) <= 1e-12


def test_characteristic_function_approaches_gaussian():
    spec = validate_kossakowski(SWEEP_D)
    w0 = np.array([0.3, 0, 0.2])
    t = np.array([0.0, 2.0])
    macro = integrate_macro(w0, spec.B, t)
    Sigma = integrate_covariance(np.eye(3) / 4 - np.outer(w0, w0), macro, spec.A, spec.B)[-1]
    r = np.array([1.0, 0.5, -0.5])
    devs = []
    for N in (16, 32, 64):
        st = evolve_micro(build_product_state(N, SingleSiteState(w0)), spec, t)[-1][1]
        devs.append(abs(fluctuation_char(st, r) - gaussian_char(Sigma, r)))
    assert devs[0] > devs[1] > devs[2]


def test_qclt_examples():
    site = SingleSiteState([0, 0, 0.4])
    assert qclt_product_char(site, 100, np.zeros(3)) == 1.0
    val = qclt_product_char(site, 10 ** 4, [1, 0, 0])
    assert abs(val - np.exp(-0.125)) <= 1e-2
    r = np.array([0.0, 1.5, 1.0])
    g = np.exp(-0.5 * r @ (np.eye(3) / 4 - np.diag([0, 0, 0.16])) @ r)
    devs = [abs(qclt_product_char(site, n, r) - g) for n in (100, 1000, 10000)]
    assert devs[0] > devs[1] > devs[2]
    for n in (1, 7, 100, 10 ** 6):
        assert abs(qclt_product_char(SingleSiteState([0.3, 0.1, 0.2]), n, r)) <= 1 + 1e-12


def test_size_limits():
    site = SingleSiteState(np.zeros(3))
    with pytest.raises(SizeExceeded):
        build_product_state(13, site, Representation.DENSE)
    with pytest.raises(SizeExceeded):
        build_product_state(129, site)
    with pytest.raises(SizeExceeded):
        fluctuation_char(build_product_state(11, site, Representation.DENSE), np.ones(3))


def test_dense_operators_are_collective_sums():
    N = 3
    J = dense_spin_operators(N)
    for m in range(3):
        ref = sum(site_operator(N, k, SPIN_HALF[m]) for k in range(N))
        assert np.allclose(J[m].toarray(), ref)


def test_csv(tmp_path):
    st = build_product_state(4, SingleSiteState([0.1, 0, 0.2]))
    write_micro_csv([collective_observables(st)], tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0].split(",") == MICRO_CSV_HEADER and len(lines) == 2

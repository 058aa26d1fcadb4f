import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meanfield_lindblad.algebra import (EPS, canonical_B, canonical_frame, dual_vector,
                                        from_dual, kossakowski_from_parts, rotate_scenario,
                                        rotated_spec, validate_kossakowski)
from meanfield_lindblad.errors import NotHermitian, NotPositive

from conftest import random_psd, random_rotation


def test_zero_generator_is_valid():
    spec = validate_kossakowski(np.zeros((3, 3)))
    assert not spec.A.any() and not spec.B.any()


def test_two_by_two_example_split():
    spec = validate_kossakowski([[1, 1j], [-1j, 1]])
    assert np.array_equal(spec.A, np.eye(2))
    assert np.array_equal(spec.B, [[0, 1], [-1, 0]])


def test_negative_eigenvalue_rejected():
    with pytest.raises(NotPositive):
        validate_kossakowski(np.diag([1.0, -0.1, 1.0]))


def test_non_hermitian_rejected():
    with pytest.raises(NotHermitian):
        validate_kossakowski([[1, 0.5], [0.2, 1]])


def test_bad_shape_rejected():
    with pytest.raises(ValueError):
        validate_kossakowski(np.eye(4))


def test_roundtrip_thousand_random_matrices():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        D = random_psd(rng)
        spec = validate_kossakowski(D)
        assert np.max(np.abs(spec.reconstruct() - D)) <= 1e-12
        assert np.allclose(spec.A, spec.A.T) and np.allclose(spec.B, -spec.B.T)


def test_levi_civita_and_dual():
    assert EPS[0, 1, 2] == 1 and EPS[1, 0, 2] == -1 and EPS[0, 0, 1] == 0
    beta = np.array([0.3, -1.2, 0.7])
    B = from_dual(beta)
    assert np.allclose(dual_vector(B), beta)
    # B v = v x beta for the eps convention used here
    v = np.array([0.2, 0.5, -0.4])
    assert np.allclose(B @ v, np.cross(v, beta))


def test_already_canonical():
    spec = kossakowski_from_parts(np.eye(3), canonical_B(0.8))
    frame = canonical_frame(spec, [0.1, 0, 0.2])
    assert np.array_equal(frame.R, np.eye(3)) and frame.lam == pytest.approx(0.8, abs=1e-15)


def test_beta_along_e2():
    spec = kossakowski_from_parts(np.eye(3), from_dual([0, 0.7, 0]))
    frame = canonical_frame(spec, np.zeros(3))
    assert frame.lam == pytest.approx(0.7, abs=1e-15)
    assert np.max(np.abs(frame.R @ spec.B @ frame.R.T - canonical_B(0.7))) <= 1e-12


def test_beta_along_minus_e3():
    spec = kossakowski_from_parts(np.eye(3), from_dual([0, 0, -0.5]))
    frame = canonical_frame(spec, np.zeros(3))
    assert np.linalg.det(frame.R) == pytest.approx(1.0)
    assert np.allclose(frame.R @ spec.B @ frame.R.T, canonical_B(0.5), atol=1e-15)


def test_zero_B_gives_identity():
    frame = canonical_frame(validate_kossakowski(np.eye(3)), np.zeros(3))
    assert frame.lam == 0 and np.array_equal(frame.R, np.eye(3))


def test_too_long_bloch_rejected():
    with pytest.raises(ValueError):
        canonical_frame(validate_kossakowski(np.eye(3)), [0.4, 0.4, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_frame_is_proper_rotation_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    spec = validate_kossakowski(random_psd(rng))
    frame = canonical_frame(spec, np.zeros(3))
    R = frame.R
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(R @ spec.B @ R.T - canonical_B(frame.lam))) < 1e-12
    again = canonical_frame(rotated_spec(spec, frame), np.zeros(3))
    assert np.max(np.abs(again.R - np.eye(3))) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_lambda_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    D = random_psd(rng)
    R0 = random_rotation(rng)
    lam = canonical_frame(validate_kossakowski(D), np.zeros(3)).lam
    lam_rot = canonical_frame(validate_kossakowski(R0 @ D @ R0.T), np.zeros(3)).lam
    assert abs(lam - lam_rot) <= 1e-12


def test_rotate_scenario_examples(rng):
    spec = validate_kossakowski(random_psd(rng))
    omega0 = np.array([0.1, -0.2, 0.3])
    frame = canonical_frame(spec, omega0)
    assert np.allclose(rotate_scenario(frame, np.eye(3) / 4), np.eye(3) / 4, atol=1e-15)
    S0 = np.eye(3) / 4 - np.outer(omega0, omega0)
    w = frame.R @ omega0
    assert np.allclose(rotate_scenario(frame, S0), np.eye(3) / 4 - np.outer(w, w), atol=1e-15)
    assert np.allclose(frame.omega_rot, w)
    ident = canonical_frame(kossakowski_from_parts(np.eye(3), canonical_B(1.0)), omega0)
    assert np.array_equal(rotate_scenario(ident, S0), S0)

"""Kossakowski matrix handling and the rotation to the canonical frame.

The coefficient matrix ``D`` of the collective generator splits as
``D = A + iB`` with ``A`` real symmetric and ``B`` real antisymmetric.  Only
``B`` drives the mean-field drift; it is encoded by its dual vector ``beta``
with ``B[m, n] = eps[m, n, g] * beta[g]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NotPositive

HERMITIAN_TOL = 1e-10
PSD_TOL = -1e-10

# Levi-Civita symbol
EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[_i, _j, _k] = 1.0
    EPS[_i, _k, _j] = -1.0


@dataclass(frozen=True)
class KossakowskiSpec:
    dim: int
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray
    min_eigenvalue: float

    def reconstruct(self) -> np.ndarray:
        return self.A + 1j * self.B


@dataclass(frozen=True)
class CanonicalFrame:
    """Rotation ``R`` taking ``B`` to ``[[0, lam, 0], [-lam, 0, 0], [0, 0, 0]]``."""

    R: np.ndarray
    lam: float
    A_rot: np.ndarray
    omega_rot: np.ndarray

    @property
    def B_rot(self) -> np.ndarray:
        return canonical_B(self.lam)


def validate_kossakowski(D_raw) -> KossakowskiSpec:
    """Split ``D`` into real/imaginary parts and certify it is Hermitian PSD."""
    D = np.asarray(D_raw, dtype=complex)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] not in (2, 3):
        raise ValueError(f"Kossakowski matrix must be 2x2 or 3x3, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValueError("Kossakowski matrix has non-finite entries")
    dev = np.max(np.abs(D - D.conj().T))
    if dev > HERMITIAN_TOL:
        raise NotHermitian(f"max |D - D^dagger| = {dev:.3e}")
    D = 0.5 * (D + D.conj().T)
    A = 0.5 * (D + D.T).real
    B = (0.5 * (D - D.T) / 1j).real
    min_eig = float(np.linalg.eigvalsh(D).min())
    if min_eig < PSD_TOL:
        raise NotPositive(f"minimum eigenvalue {min_eig:.3e} is negative")
    return KossakowskiSpec(dim=D.shape[0], D=D, A=A, B=B, min_eigenvalue=min_eig)


def kossakowski_from_parts(re, im) -> KossakowskiSpec:
    return validate_kossakowski(np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float))


def canonical_B(lam: float) -> np.ndarray:
    return np.array([[0.0, lam, 0.0], [-lam, 0.0, 0.0], [0.0, 0.0, 0.0]])


def dual_vector(B) -> np.ndarray:
    """``beta`` with ``B[m, n] = sum_g eps[m, n, g] beta[g]``."""
    B = np.asarray(B, dtype=float)
    return np.array([B[1, 2], B[2, 0], B[0, 1]])


def from_dual(beta) -> np.ndarray:
    return np.einsum("mng,g->mn", EPS, np.asarray(beta, dtype=float))


def _rotation_to_e3(beta: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(beta)
    if norm == 0.0:
        return np.eye(3)
    u = beta / norm
    e3 = np.array([0.0, 0.0, 1.0])
    axis = np.cross(u, e3)
    s = np.linalg.norm(axis)
    c = float(u @ e3)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])  # pi about e1
    k = axis / s
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def canonical_frame(spec: KossakowskiSpec, omega0) -> CanonicalFrame:
    """Rotate the spin frame so that the dual vector of ``B`` lies along +e3.

    Any rotation aligning ``beta`` with e3 is equally valid; this one is the
    Rodrigues rotation about ``beta x e3``.
    """
    if spec.dim != 3:
        raise ValueError("canonical frame needs a 3x3 Kossakowski matrix")
    omega0 = np.asarray(omega0, dtype=float)
    if np.linalg.norm(omega0) > 0.5 + 1e-12:
        raise ValueError("initial Bloch triple longer than 1/2")
    beta = dual_vector(spec.B)
    R = _rotation_to_e3(beta)
    lam = float(np.linalg.norm(beta))
    return CanonicalFrame(R=R, lam=lam, A_rot=R @ spec.A @ R.T, omega_rot=R @ omega0)


def rotate_scenario(frame: CanonicalFrame, Sigma0) -> np.ndarray:
    S = np.asarray(Sigma0, dtype=float)
    out = frame.R @ S @ frame.R.T
    return 0.5 * (out + out.T)


def rotated_spec(spec: KossakowskiSpec, frame: CanonicalFrame) -> KossakowskiSpec:
    """The Kossakowski matrix expressed in the canonical frame."""
    return validate_kossakowski(frame.R @ spec.D @ frame.R.T)

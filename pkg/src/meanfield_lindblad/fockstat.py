"""Single-mode master equation with jump operator ``q + i b p``.

    L^T[rho] = (q + i b p) rho (q - i b p) - 1/2 {(q - i b p)(q + i b p), rho}

on the number basis truncated at ``n_max``.  For ``b = 1`` the jump operator
is ``sqrt(2) a`` (damping to the vacuum); for ``b = -1`` it is
``sqrt(2) a^dagger`` (pure gain, no normalizable stationary state).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARTIFACT_MASS = 0.01      # population threshold ...
ARTIFACT_TOP_FRACTION = 0.1  # ... in this top fraction of levels
NULL_TOL = 1e-10


def ladder(n_max: int) -> np.ndarray:
    """Truncated annihilation operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def quadratures(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    a = ladder(n_max)
    ad = a.conj().T
    return (a + ad) / np.sqrt(2), (a - ad) / (1j * np.sqrt(2))


def _vec(rho):
    return rho.reshape(-1, order="F")


def _unvec(v, d):
    return v.reshape(d, d, order="F")


@dataclass(frozen=True)
class FockLiouvillian:
    n_max: int
    b: float
    L_super: np.ndarray
    jump: np.ndarray

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def apply(self, rho) -> np.ndarray:
        return _unvec(self.L_super @ _vec(np.asarray(rho, dtype=complex)), self.dim)


def build_liouvillian(b: float, n_max: int) -> FockLiouvillian:
    """Superoperator on column-stacked density matrices."""
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    q, p = quadratures(n_max)
    L = q + 1j * b * p
    Ld = q - 1j * b * p
    LdL = Ld @ L
    eye = np.eye(n_max + 1)
    # vec(X rho Y) = (Y^T kron X) vec(rho)
    sup = np.kron(Ld.T, L) - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    return FockLiouvillian(n_max=n_max, b=float(b), L_super=sup, jump=L)


@dataclass(frozen=True)
class StationaryCandidate:
    rho: np.ndarray
    artifact: bool
    positive: bool
    top_mass: float


def _is_artifact(rho: np.ndarray) -> tuple[bool, float]:
    pops = np.real(np.diag(rho))
    d = len(pops)
    k = max(1, int(np.ceil(ARTIFACT_TOP_FRACTION * d)))
    top = float(np.sum(np.abs(pops[-k:])) / max(np.sum(np.abs(pops)), 1e-300))
    return top > ARTIFACT_MASS, top


def stationary_states(L: FockLiouvillian, tol: float = NULL_TOL) -> list[StationaryCandidate]:
    """Normalizable Hermitian elements of the kernel of ``L_super``.

    Kernel vectors are Hermitized and trace-normalized; the two Hermitian
    parts of a complex kernel vector are tried separately.  Candidates are
    flagged as truncation artifacts when more than 1% of their population
    sits in the top 10% of levels.
    """
    d = L.dim
    _, s, Vh = np.linalg.svd(L.L_super)
    scale = s[0] if s.size else 1.0
    null = Vh[s <= tol * scale].conj()
    out: list[StationaryCandidate] = []
    basis: list[np.ndarray] = []
    for v in null:
        M = _unvec(v, d)
        for cand in (0.5 * (M + M.conj().T), 0.5j * (M - M.conj().T)):
            tr = np.trace(cand).real
            if abs(tr) <= tol:
                continue
            rho = cand / tr
            # skip candidates already spanned by earlier ones
            flat = _vec(rho)
            if basis:
                Q = np.column_stack(basis)
                resid = flat - Q @ np.linalg.lstsq(Q, flat, rcond=None)[0]
                if np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(flat):
                    continue
            basis.append(flat)
            evals = np.linalg.eigvalsh(rho)
            art, top = _is_artifact(rho)
            out.append(StationaryCandidate(rho, art, bool(evals.min() >= -1e-8), top))
    return out


def physical_states(cands: list[StationaryCandidate]) -> list[StationaryCandidate]:
    return [c for c in cands if c.positive and not c.artifact]


def vacuum_fidelity(rho: np.ndarray) -> float:
    return float(np.real(rho[0, 0]))


def qp_covariance(rho: np.ndarray) -> np.ndarray:
    """Symmetrized covariance of ``(q, p)`` in the state ``rho``."""
    n_max = rho.shape[0] - 1
    q, p = quadratures(n_max)
    R = [q, p]
    mean = np.array([np.trace(rho @ X).real for X in R])
    cov = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            cov[i, j] = 0.5 * np.trace(rho @ (R[i] @ R[j] + R[j] @ R[i])).real - mean[i] * mean[j]
    return cov


@dataclass(frozen=True)
class RecursionReport:
    b: int
    n_max: int
    system: np.ndarray
    coefficients: np.ndarray
    rho00_forced_zero: bool
    solution: np.ndarray | None
    boundary_solution: bool

    @property
    def feasible(self) -> bool:
        return self.solution is not None


def diagonal_system(b: int, n_max: int) -> np.ndarray:
    """Matrix ``M`` with ``diag(L^T[diag(x)]) = M x``, from the ladder algebra."""
    n = np.arange(n_max + 1, dtype=float)
    M = np.zeros((n_max + 1, n_max + 1))
    if b == 1:
        # 2 (a rho a^dag - 1/2 {a^dag a, rho})
        for k in range(n_max + 1):
            M[k, k] = -2 * n[k]
            if k < n_max:
                M[k, k + 1] = 2 * (n[k] + 1)
    else:
        # 2 (a^dag rho a - 1/2 {a a^dag, rho}); a a^dag vanishes on the top level
        for k in range(n_max + 1):
            M[k, k] = -2 * (n[k] + 1) if k < n_max else 0.0
            if k >= 1:
                M[k, k - 1] = 2 * n[k]
    return M


def recursion_analysis(b: int, n_max: int) -> RecursionReport:
    """Diagonal stationarity conditions and the recursion they imply.

    ``b = 1``: row ``n`` reads ``(n+1) rho_{n+1} = n rho_n``.  ``b = -1``:
    row ``0`` forces ``rho_00 = 0`` and row ``n`` gives
    ``rho_nn = n/(n+1) rho_{n-1,n-1}``.  The top level is excluded from the
    feasibility analysis because truncation changes its equation.
    """
    if b not in (1, -1):
        raise ValueError("recursion analysis covers b = +1 and b = -1 only")
    M = diagonal_system(b, n_max)
    if b == 1:
        coeffs = np.array([-M[k, k] / M[k, k + 1] for k in range(n_max)])
    else:
        coeffs = np.array([-M[k, k - 1] / M[k, k] for k in range(1, n_max)])
    rho00_zero = b == -1 and M[0, 0] != 0 and np.all(M[0, 1:] == 0)
    # kernel of the rows that coincide with the untruncated equations
    interior = M[:n_max]
    _, s, Vh = np.linalg.svd(interior)
    null = Vh[np.sum(s > 1e-12 * s[0]):]
    solution = None
    boundary = False
    for v in null:
        if abs(v.sum()) < 1e-12:
            continue
        x = v / v.sum()
        if abs(x[-1]) > 1e-12:
            boundary = True  # supported on the truncation edge
            continue
        if np.all(x >= -1e-12):
            solution = x
    return RecursionReport(b, n_max, M, coeffs, bool(rho00_zero), solution, boundary)


def evolve_fock(L: FockLiouvillian, rho0, times) -> list[np.ndarray]:
    """Exact propagation by the matrix exponential of the superoperator."""
    from scipy.linalg import expm

    d = L.dim
    times = np.asarray(times, dtype=float)
    out = []
    v = _vec(np.asarray(rho0, dtype=complex))
    prev = times[0]
    steps: dict[float, np.ndarray] = {}  # uniform grids reuse one exponential
    for t in times:
        if t != prev:
            dt = round(float(t - prev), 12)
            if dt not in steps:
                steps[dt] = expm(dt * L.L_super)
            v = steps[dt] @ v
            prev = t
        out.append(_unvec(v, d))
    return out


def fock_report(b: float, n_max: int) -> dict:
    L = build_liouvillian(b, n_max)
    cands = stationary_states(L)
    good = physical_states(cands)
    return {
        "b": b,
        "n_max": n_max,
        "stationary_count": len(good),
        "flagged_count": len(cands) - len(good),
        "vacuum_fidelity": vacuum_fidelity(good[0].rho) if good else None,
    }

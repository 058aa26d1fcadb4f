"""Exact finite-N simulation of the collective Lindblad dynamics.

Schrödinger picture of the mean-field generator with ``L_mu = J_mu / sqrt(N)``:

    drho/dt = sum_{mu,nu} D[mu, nu] (L_nu rho L_mu - 1/2 {L_mu L_nu, rho})

Two engines are provided.  ``Dense`` works on the full ``2^N`` space and is
the oracle.  ``Sectors`` uses permutation invariance: a symmetric state is a
direct sum over total-spin sectors ``j``, each repeated ``m_{N,j}`` times, and
the generator acts inside every ``(2j+1)``-dimensional irrep separately.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import rk
from .algebra import KossakowskiSpec
from .errors import NotExchangeSymmetric, SizeExceeded, StepFailure
from .macroflow import check_bloch

DENSE_MAX_N = 12
SECTOR_MAX_N = 128
DENSE_CHAR_MAX_N = 10

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
SPIN_HALF = PAULI / 2


class Representation(str, enum.Enum):
    DENSE = "Dense"
    SECTORS = "Sectors"


class Reference(str, enum.Enum):
    EVOLVED = "Evolved"
    INITIAL_FIXED = "InitialFixed"


@dataclass(frozen=True)
class SingleSiteState:
    bloch: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bloch", check_bloch(self.bloch))

    @property
    def rho(self) -> np.ndarray:
        return 0.5 * np.eye(2) + np.einsum("m,mij->ij", self.bloch, PAULI)


@dataclass(frozen=True)
class SectorBlock:
    j: float
    multiplicity: int
    block: np.ndarray


@dataclass(frozen=True)
class SpinChainState:
    N: int
    representation: Representation
    rho: np.ndarray | None = None
    blocks: tuple[SectorBlock, ...] = ()
    t: float = 0.0

    def trace(self) -> float:
        if self.representation is Representation.DENSE:
            return float(np.trace(self.rho).real)
        return float(sum(b.multiplicity * np.trace(b.block).real for b in self.blocks))

    def hermiticity_error(self) -> float:
        mats = [self.rho] if self.representation is Representation.DENSE else [
            b.block for b in self.blocks]
        return max(float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0 for m in mats)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the normalized state (blocks weighted by multiplicity)."""
        if self.representation is Representation.DENSE:
            return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())
        return min(float(np.linalg.eigvalsh(0.5 * (b.block + b.block.conj().T)).min())
                   * b.multiplicity for b in self.blocks)


# --- collective spin operators ----------------------------------------------

@lru_cache(maxsize=512)
def spin_matrices(j: float) -> np.ndarray:
    """``(Jx, Jy, Jz)`` in the spin-``j`` irrep, basis ordered ``m = j, ..., -j``."""
    d = int(round(2 * j)) + 1
    m = j - np.arange(d)
    jp = np.zeros((d, d), dtype=complex)
    for k in range(1, d):
        # J+ |m_k> -> |m_{k-1}>
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jm = jp.conj().T
    out = np.array([(jp + jm) / 2, (jp - jm) / 2j, np.diag(m).astype(complex)])
    out.setflags(write=False)
    return out


def sector_js(N: int) -> list[float]:
    return [N / 2 - k for k in range(N // 2 + 1)]


def dicke_multiplicity(N: int, j: float) -> int:
    k = int(round(N / 2 - j))
    return comb(N, k) - (comb(N, k - 1) if k >= 1 else 0)


@lru_cache(maxsize=16)
def dense_spin_operators(N: int) -> tuple:
    """Collective ``J_mu`` on ``(C^2)^{⊗N}`` as sparse matrices (site 0 is leftmost)."""
    dim = 2 ** N
    out = []
    for mu in range(3):
        J = sp.csr_matrix((dim, dim), dtype=complex)
        for k in range(N):
            J = J + sp.kron(sp.kron(sp.identity(2 ** k), sp.csr_matrix(SPIN_HALF[mu])),
                            sp.identity(2 ** (N - k - 1)), format="csr")
        out.append(J.tocsr())
    return tuple(out)


def site_operator(N: int, k: int, op) -> np.ndarray:
    """Dense ``op`` acting on site ``k`` of an N-site chain."""
    return np.kron(np.kron(np.eye(2 ** k), op), np.eye(2 ** (N - k - 1)))


# --- state construction -----------------------------------------------------

def _rotation_unitary(Jmats: np.ndarray, axis) -> np.ndarray:
    """Unitary taking the +z spin direction onto the unit vector ``axis``."""
    axis = np.asarray(axis, dtype=float)
    e3 = np.array([0.0, 0.0, 1.0])
    n = np.cross(e3, axis)
    s = np.linalg.norm(n)
    c = float(axis @ e3)
    if s < 1e-15:
        if c > 0:
            return np.eye(Jmats.shape[1], dtype=complex)
        n, theta = np.array([1.0, 0.0, 0.0]), np.pi
    else:
        n, theta = n / s, float(np.arctan2(s, c))
    return sla.expm(-1j * theta * np.einsum("m,mij->ij", n, Jmats))


def build_product_state(N: int, site: SingleSiteState,
                        representation: Representation | str = Representation.SECTORS
                        ) -> SpinChainState:
    """N-fold tensor power of the single-site state, dense or sector-resolved."""
    representation = Representation(representation)
    if N < 1:
        raise ValueError("N must be positive")
    if representation is Representation.DENSE:
        if N > DENSE_MAX_N:
            raise SizeExceeded(f"dense engine limited to N <= {DENSE_MAX_N}")
        rho = np.ones((1, 1), dtype=complex)
        for _ in range(N):
            rho = np.kron(rho, site.rho)
        return SpinChainState(N, representation, rho=rho)
    if N > SECTOR_MAX_N:
        raise SizeExceeded(f"sector engine limited to N <= {SECTOR_MAX_N}")
    r = float(np.linalg.norm(site.bloch))
    p = 0.5 + r
    blocks = []
    for j in sector_js(N):
        Jm = spin_matrices(j)
        m = j - np.arange(int(round(2 * j)) + 1)
        up = np.rint(N / 2 + m).astype(int)
        w = p ** up * (1.0 - p) ** (N - up)
        block = np.diag(w).astype(complex)
        if r > 0:
            U = _rotation_unitary(Jm, site.bloch / r)
            block = U @ block @ U.conj().T
            block = 0.5 * (block + block.conj().T)
        blocks.append(SectorBlock(j, dicke_multiplicity(N, j), block))
    return SpinChainState(N, representation, blocks=tuple(blocks))


def to_dense(state: SpinChainState) -> np.ndarray:
    """Dense ``2^N`` matrix of a sector state (coupled basis built numerically).

    Used only as a cross-check at small N.
    """
    if state.representation is Representation.DENSE:
        return state.rho
    N = state.N
    if N > 8:
        raise SizeExceeded("sector-to-dense conversion limited to N <= 8")
    J = [op.toarray() for op in dense_spin_operators(N)]
    J2 = sum(op @ op for op in J)
    Jp = J[0] + 1j * J[1]
    evals, evecs = np.linalg.eigh(J2 + 1e-3 * J[2])  # split degenerate J^2 by J_z
    out = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for blk in state.blocks:
        j = blk.j
        d = int(round(2 * j)) + 1
        # highest-weight vectors: J^2 = j(j+1), J_z = j
        target = j * (j + 1) + 1e-3 * j
        hw = evecs[:, np.abs(evals - target) < 1e-6]
        assert hw.shape[1] == blk.multiplicity
        Jm = Jp.conj().T
        for a in range(hw.shape[1]):
            vecs = [hw[:, a]]
            for k in range(1, d):
                m = j - (k - 1)
                v = Jm @ vecs[-1] / np.sqrt(j * (j + 1) - m * (m - 1))
                vecs.append(v)
            V = np.column_stack(vecs)
            out += V @ blk.block @ V.conj().T
    return out


# --- generator -----------------------------------------------------------------

def _generator_pieces(L: np.ndarray, D: np.ndarray):
    M = np.einsum("mn,nij->mij", D, L)
    K = np.einsum("mij,mjk->ik", L, M)
    return M, K


class SectorGenerator:
    """Blockwise generator; operates on multiplicity-weighted blocks."""

    def __init__(self, N: int, D: np.ndarray):
        self.N = N
        self.js = sector_js(N)
        self.dims = [int(round(2 * j)) + 1 for j in self.js]
        self.offsets = np.concatenate([[0], np.cumsum([d * d for d in self.dims])])
        self.pieces = []
        for j, d in zip(self.js, self.dims):
            L = np.asarray(spin_matrices(j)) / np.sqrt(N)
            M, K = _generator_pieces(L, D)
            # stacked so the jump term is two plain matmuls
            self.pieces.append((L.reshape(3 * d, d), M.reshape(3 * d, d), K))

    def unpack(self, y: np.ndarray) -> list[np.ndarray]:
        return [y[self.offsets[i]:self.offsets[i + 1]].reshape(d, d)
                for i, d in enumerate(self.dims)]

    def pack(self, mats) -> np.ndarray:
        return np.concatenate([m.ravel() for m in mats])

    def apply(self, rho: np.ndarray, i: int) -> np.ndarray:
        Ls, Ms, K = self.pieces[i]
        d = rho.shape[0]
        X = (Ms @ rho).reshape(3, d, d).transpose(1, 0, 2).reshape(d, 3 * d)
        return X @ Ls - 0.5 * (K @ rho + rho @ K)

    def __call__(self, t, y):
        out = np.empty_like(y)
        for i, d in enumerate(self.dims):
            a, b = self.offsets[i], self.offsets[i + 1]
            out[a:b] = self.apply(y[a:b].reshape(d, d), i).ravel()
        return out


class DenseGenerator:
    """Sparse full-space generator.

    With ``X = [M_0 rho; M_1 rho; M_2 rho]`` the jump term is
    ``(sum_m L_m^T X_m^T)^T`` and ``K rho = [L_0 L_1 L_2] X``; ``rho K`` is
    ``(K^dag rho^dag)^dag`` with ``K^dag = sum_m M_m^dag L_m``.
    """

    def __init__(self, N: int, D: np.ndarray):
        self.N = N
        self.dim = 2 ** N
        L = [op / np.sqrt(N) for op in dense_spin_operators(N)]
        M = [sum(D[m, n] * L[n] for n in range(3)) for m in range(3)]
        self.M_stack = sp.vstack(M).tocsr()
        self.L_stack = sp.vstack(L).tocsr()
        self.L_row = sp.hstack(L).tocsr()
        self.LT_row = sp.hstack([Lm.T for Lm in L]).tocsr()
        self.Mdag_row = sp.hstack([Mm.conj().T for Mm in M]).tocsr()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        X = self.M_stack @ rho
        XT = np.ascontiguousarray(X.reshape(3, d, d).transpose(0, 2, 1)).reshape(3 * d, d)
        Y = self.L_stack @ np.ascontiguousarray(rho.conj().T)
        rhoK_dag = self.Mdag_row @ Y
        jump = self.LT_row @ XT
        return (jump - 0.5 * rhoK_dag.conj()).T - 0.5 * (self.L_row @ X)

    def __call__(self, t, y):
        return self.apply(y.reshape(self.dim, self.dim)).ravel()


def _check_spec(spec: KossakowskiSpec):
    if spec.dim != 3:
        raise ValueError("finite-N engine needs a 3x3 Kossakowski matrix")


def lindblad_rhs(state: SpinChainState, spec: KossakowskiSpec) -> SpinChainState:
    """Time derivative of ``state`` (same shape; the derivative is traceless)."""
    _check_spec(spec)
    if state.representation is Representation.DENSE:
        return replace(state, rho=DenseGenerator(state.N, spec.D).apply(state.rho))
    gen = SectorGenerator(state.N, spec.D)
    blocks = tuple(SectorBlock(b.j, b.multiplicity, gen.apply(b.block, i))
                   for i, b in enumerate(state.blocks))
    return replace(state, blocks=blocks)


def heisenberg_generator(N: int, D, x: np.ndarray) -> np.ndarray:
    """Heisenberg-picture action on a dense operator, written site by site."""
    D = np.asarray(D)
    s = [[site_operator(N, k, SPIN_HALF[m]) for m in range(3)] for k in range(N)]
    out = np.zeros_like(x, dtype=complex)
    for k in range(N):
        for h in range(N):
            for m in range(3):
                for n in range(3):
                    if D[m, n] == 0:
                        continue
                    a, c = s[k][m], s[h][n]
                    out += D[m, n] / 2 * ((a @ x - x @ a) @ c + a @ (x @ c - c @ x))
    return out / N


# --- time evolution ------------------------------------------------------------

TRACE_DRIFT = 1e-9
HERM_DRIFT = 1e-9
POS_FLOOR = -1e-7


def evolve_micro(state0: SpinChainState, spec: KossakowskiSpec, t_grid, tol: float = 1e-10,
                 check: bool = True) -> list[tuple[float, SpinChainState]]:
    """Integrate the master equation and sample the state on ``t_grid``.

    Sector blocks are integrated multiplicity-weighted so the error control sees
    each sector's true share of the trace.  With ``check`` set, drifts in trace,
    Hermiticity or positivity beyond fixed floors raise :class:`StepFailure`.
    """
    _check_spec(spec)
    t_grid = np.asarray(t_grid, dtype=float)
    if state0.representation is Representation.DENSE:
        gen = DenseGenerator(state0.N, spec.D)
        y0 = state0.rho.ravel().astype(complex)
    else:
        gen = SectorGenerator(state0.N, spec.D)
        y0 = gen.pack([b.multiplicity * b.block for b in state0.blocks]).astype(complex)
    if not np.any(spec.D):
        return [(float(t), replace(state0, t=float(t))) for t in t_grid]
    _, ys = rk.solve_on_grid(gen, t_grid, y0, tol=tol)
    out = []
    for t, y in zip(t_grid, ys):
        if state0.representation is Representation.DENSE:
            st = replace(state0, rho=y.reshape(gen.dim, gen.dim), t=float(t))
        else:
            blocks = tuple(SectorBlock(b.j, b.multiplicity, W / b.multiplicity)
                           for b, W in zip(state0.blocks, gen.unpack(y)))
            st = replace(state0, blocks=blocks, t=float(t))
        if check:
            _check_physical(st)
        out.append((float(t), st))
    return out


def _check_physical(st: SpinChainState) -> None:
    tr = st.trace()
    if abs(tr - 1.0) > TRACE_DRIFT:
        raise StepFailure(f"trace drift {tr - 1.0:.3e} at t={st.t}")
    if st.representation is Representation.DENSE:
        herm = st.hermiticity_error()
    else:
        herm = max(b.multiplicity * float(np.max(np.abs(b.block - b.block.conj().T)))
                   for b in st.blocks)
    if herm > HERM_DRIFT:
        raise StepFailure(f"Hermiticity drift {herm:.3e} at t={st.t}")
    lo = st.min_eigenvalue()
    if lo < POS_FLOOR:
        raise StepFailure(f"positivity violated (min eigenvalue {lo:.3e}) at t={st.t}")


# --- observables ---------------------------------------------------------------

@dataclass
class MicroObservables:
    t: float
    mean: np.ndarray
    fluct_cov: np.ndarray
    pair_corr_12: float
    char_samples: dict = field(default_factory=dict)

    def row(self) -> list[float]:
        S = self.fluct_cov
        return [self.t, *self.mean, S[0, 0], S[0, 1], S[0, 2], S[1, 1], S[1, 2], S[2, 2],
                self.pair_corr_12]


MICRO_CSV_HEADER = ["t", "m1", "m2", "m3", "S11", "S12", "S13", "S22", "S23", "S33",
                    "C12pair"]


def collective_moments(state: SpinChainState) -> tuple[np.ndarray, np.ndarray]:
    """``<J_mu>`` and the symmetrized second moments ``<{J_mu, J_nu}>/2``."""
    if state.representation is Representation.DENSE:
        J = dense_spin_operators(state.N)
        rho = state.rho
        first = np.array([op.multiply(rho.T).sum().real for op in J])
        second = np.empty((3, 3))
        for n in range(3):
            X = J[n] @ rho
            for m in range(n + 1):
                # Re tr(rho J_m J_n) is the symmetrized moment
                second[m, n] = second[n, m] = J[m].multiply(X.T).sum().real
        return first, second
    first = np.zeros(3)
    second = np.zeros((3, 3))
    for b in state.blocks:
        Jm = spin_matrices(b.j)
        mult = float(b.multiplicity)
        first += mult * np.einsum("ab,mba->m", b.block, Jm).real
        JJ = np.einsum("mab,nbc->mnac", Jm, Jm)
        second += mult * np.einsum("ca,mnac->mn", b.block, JJ).real
    second = 0.5 * (second + second.T)
    return first, second


def collective_observables(state: SpinChainState, reference: Reference | str = Reference.EVOLVED,
                           ref_mean=None, char_probes=()) -> MicroObservables:
    """Mean magnetization, fluctuation covariance and pair correlation.

    ``fluct_cov[m, n] = <(J_m - N c_m)(J_n - N c_n)>_sym / N`` where ``c`` is the
    current mean (``Evolved``) or the supplied ``ref_mean`` (``InitialFixed``).
    """
    reference = Reference(reference)
    N = state.N
    first, second = collective_moments(state)
    mean = first / N
    if reference is Reference.EVOLVED:
        c = mean
    else:
        if ref_mean is None:
            raise ValueError("InitialFixed reference needs ref_mean")
        c = np.asarray(ref_mean, dtype=float)
    cov = second / N - N * (np.outer(c, mean) + np.outer(mean, c) - np.outer(c, c))
    cov = 0.5 * (cov + cov.T)
    pair = _pair_from_moments(first, second, N) if N >= 2 else float("nan")
    chars = {tuple(map(float, r)): fluctuation_char(state, r, reference, ref_mean)
             for r in char_probes}
    return MicroObservables(state.t, mean, cov, pair, chars)


def _pair_from_moments(first, second, N) -> float:
    # same-site s1, s2 anticommute, so <{J1,J2}>/2 only collects i != j pairs
    return float(second[0, 1] / (N * (N - 1)) - first[0] * first[1] / N ** 2)


def _site_swap(rho: np.ndarray, N: int, k: int) -> np.ndarray:
    """Exchange sites ``k`` and ``k+1`` in a dense density matrix."""
    t = rho.reshape([2] * (2 * N))
    perm = list(range(2 * N))
    perm[k], perm[k + 1] = perm[k + 1], perm[k]
    perm[N + k], perm[N + k + 1] = perm[N + k + 1], perm[N + k]
    return t.transpose(perm).reshape(rho.shape)


def check_exchange_symmetric(state: SpinChainState, tol: float = 1e-8) -> None:
    if state.representation is not Representation.DENSE:
        return
    for k in range(state.N - 1):
        dev = np.max(np.abs(_site_swap(state.rho, state.N, k) - state.rho))
        if dev > tol:
            raise NotExchangeSymmetric(f"swap of sites {k},{k + 1} changes state by {dev:.3e}")


def pair_correlation_12(state: SpinChainState) -> float:
    """``<s_1^(i) s_2^(j)> - <s_1^(i)><s_2^(j)>`` for distinct sites of a symmetric state."""
    if state.N < 2:
        raise ValueError("pair correlation needs N >= 2")
    check_exchange_symmetric(state)
    first, second = collective_moments(state)
    return _pair_from_moments(first, second, state.N)


def fluctuation_char(state: SpinChainState, r, reference: Reference | str = Reference.EVOLVED,
                     ref_mean=None) -> complex:
    """``<exp(i r.J / sqrt N)> exp(-i sqrt(N) r.c)`` with ``c`` the reference mean."""
    reference = Reference(reference)
    r = np.asarray(r, dtype=float)
    N = state.N
    if reference is Reference.EVOLVED:
        c = collective_moments(state)[0] / N
    else:
        if ref_mean is None:
            raise ValueError("InitialFixed reference needs ref_mean")
        c = np.asarray(ref_mean, dtype=float)
    if state.representation is Representation.DENSE:
        if N > DENSE_CHAR_MAX_N:
            raise SizeExceeded(f"dense characteristic function limited to N <= {DENSE_CHAR_MAX_N}")
        gen = sum(r[m] * op for m, op in enumerate(dense_spin_operators(N))).toarray()
        w, V = np.linalg.eigh(gen)
        U = (V * np.exp(1j * w / np.sqrt(N))) @ V.conj().T
        val = np.sum(state.rho.T * U)
    else:
        val = 0.0j
        for b in state.blocks:
            if b.block.shape[0] > 129:
                raise SizeExceeded("sector dimension above 129")
            gen = np.einsum("m,mij->ij", r, spin_matrices(b.j))
            w, V = np.linalg.eigh(gen)
            U = (V * np.exp(1j * w / np.sqrt(N))) @ V.conj().T
            val += b.multiplicity * np.sum(b.block.T * U)
    return complex(val * np.exp(-1j * np.sqrt(N) * (r @ c)))


def qclt_product_char(site: SingleSiteState, N: int, r) -> complex:
    """Characteristic function of the fluctuation vector of an N-fold product state.

    Uses ``exp(i theta n.sigma/2) = cos(theta/2) + i sin(theta/2) n.sigma``.
    """
    if N < 1:
        raise ValueError("N must be positive")
    r = np.asarray(r, dtype=float)
    norm = float(np.linalg.norm(r))
    if norm == 0.0:
        return 1.0 + 0.0j
    theta = norm / np.sqrt(N)
    nb = float(r @ site.bloch) / norm
    single = np.cos(theta / 2) + 1j * np.sin(theta / 2) * 2 * nb
    # power via logs keeps N ~ 1e6 accurate
    return complex(np.exp(N * np.log(single) - 1j * np.sqrt(N) * (r @ site.bloch)))


def write_micro_csv(observables: list[MicroObservables], path) -> None:
    from .io import write_csv

    write_csv(path, MICRO_CSV_HEADER, [o.row() for o in observables])

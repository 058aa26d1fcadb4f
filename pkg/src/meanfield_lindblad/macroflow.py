"""Mean-magnetization dynamics of the large-N limit.

The Bloch triple ``omega`` obeys ``d omega/dt = (omega x beta) x omega`` where
``beta`` is the dual vector of the antisymmetric part ``B``.  In the canonical
frame this reduces to a tanh relaxation of ``omega_3`` towards ``+-xi``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import rk
from .errors import DegenerateLength

BLOCH_TOL = 1e-12


MACRO_CSV_HEADER = ["t", "omega1", "omega2", "omega3", "norm"]


class Stability(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    FROZEN = "Frozen"


def check_bloch(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (3,):
        raise ValueError("Bloch triple must have three components")
    if np.any(np.abs(omega) > 0.5 + BLOCH_TOL) or np.linalg.norm(omega) > 0.5 + BLOCH_TOL:
        raise ValueError(f"not a valid spin-1/2 Bloch triple: {omega}")
    return omega


def macro_rhs(omega, B) -> np.ndarray:
    """Right-hand side of the mean-field equations for a general antisymmetric B."""
    w1, w2, w3 = omega
    B12, B13, B23 = B[0][1], B[0][2], B[1][2]
    return np.array([
        -B12 * w1 * w3 + B13 * w1 * w2 + B23 * (w2 * w2 + w3 * w3),
        -B12 * w2 * w3 - B23 * w1 * w2 - B13 * (w1 * w1 + w3 * w3),
        B13 * w2 * w3 - B23 * w1 * w3 + B12 * (w1 * w1 + w2 * w2),
    ])


def macro_jacobian(omega, B) -> np.ndarray:
    w1, w2, w3 = omega
    B12, B13, B23 = B[0][1], B[0][2], B[1][2]
    return np.array([
        [-B12 * w3 + B13 * w2, B13 * w1 + 2 * B23 * w2, -B12 * w1 + 2 * B23 * w3],
        [-B23 * w2 - 2 * B13 * w1, -B12 * w3 - B23 * w1, -B12 * w2 - 2 * B13 * w3],
        [-B23 * w3 + 2 * B12 * w1, B13 * w3 + 2 * B12 * w2, B13 * w2 - B23 * w1],
    ])


# single-site spin operators s = sigma / 2
_SPIN = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex) / 2


def emergent_local_rate(omega, B) -> np.ndarray:
    """d<s_a>/dt from the state-dependent Hamiltonian ``H = B[m, n] omega[n] s_m``.

    Evaluated with explicit 2x2 matrices on the single-site state whose Bloch
    triple is ``omega``; it must coincide with :func:`macro_rhs`.
    """
    omega = np.asarray(omega, dtype=float)
    B = np.asarray(B, dtype=float)
    rho = 0.5 * np.eye(2) + np.einsum("m,mij->ij", 2 * omega, _SPIN)
    H = np.einsum("mn,n,mij->ij", B, omega, _SPIN)
    rates = np.empty(3)
    for a in range(3):
        heis = 1j * (H @ _SPIN[a] - _SPIN[a] @ H)
        rates[a] = np.trace(rho @ heis).real
    return rates


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def macro_closed_form(omega0, lam: float, t) -> np.ndarray:
    """tanh/cosh solution in the canonical frame (``B`` has only its (1,2) entry).

    ``omega_3(t) = xi tanh(xi (lam t + c))``,
    ``omega_{1,2}(t) = cosh(xi c) / cosh(xi (lam t + c)) omega_{1,2}(0)``.
    A vanishing length returns ``omega0`` unchanged.  ``t`` may be ``inf``.
    """
    omega0 = np.asarray(omega0, dtype=float)
    xi = float(np.linalg.norm(omega0))
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if xi < 1e-14 or lam == 0.0:
        out = np.tile(omega0, (len(t), 1))
        return out[0] if scalar else out
    ratio = omega0[2] / xi
    if abs(ratio) >= 1.0:
        out = np.tile(omega0, (len(t), 1))
        return out[0] if scalar else out
    c = np.arctanh(ratio) / xi
    arg = xi * (lam * t + c)
    w3 = xi * np.tanh(arg)
    scale = np.exp(_logcosh(xi * c) - _logcosh(arg))
    out = np.column_stack([scale * omega0[0], scale * omega0[1], w3])
    return out[0] if scalar else out


@dataclass(frozen=True)
class FixedPoints:
    stability: Stability
    stable: np.ndarray | None
    unstable: np.ndarray | None
    b: float


def classify_fixed_points(lam: float, xi: float) -> FixedPoints:
    """Stable/unstable invariant triples on the canonical axis.

    For ``lam > 0`` the stable point is ``(0, 0, |xi|)``; signs swap for
    ``lam < 0``.  ``b = lam * omega_3(stable) = |lam| |xi|``.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if lam == 0.0 or xi == 0.0:
        return FixedPoints(Stability.FROZEN, None, None, 0.0)
    sgn = np.sign(lam)
    stable = np.array([0.0, 0.0, sgn * xi])
    unstable = np.array([0.0, 0.0, -sgn * xi])
    return FixedPoints(Stability.STABLE, stable, unstable, float(lam * stable[2]))


@dataclass
class MacroTrajectory:
    times: np.ndarray
    states: np.ndarray
    xi: float
    stability: Stability
    B: np.ndarray
    _dense: rk.DenseSolution | None = field(default=None, repr=False)

    def at(self, t):
        """Bloch triple at arbitrary times inside the integrated span."""
        if self._dense is None:
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(self.states[0], t.shape + (3,)).copy()
        return self._dense(t)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _trajectory_stability(omega0, B) -> Stability:
    from .algebra import dual_vector

    beta = dual_vector(B)
    lam = float(np.linalg.norm(beta))
    xi = float(np.linalg.norm(omega0))
    if lam == 0.0 or xi < 1e-14:
        return Stability.FROZEN
    # unstable invariant point sits antiparallel to beta
    if np.linalg.norm(omega0 + xi * beta / lam) <= 1e-12:
        return Stability.UNSTABLE
    return Stability.STABLE


def integrate_macro(omega0, B, t_grid, tol: float = 1e-10) -> MacroTrajectory:
    """Adaptive RK4(5) solution of the mean-field equations sampled on ``t_grid``."""
    omega0 = check_bloch(omega0)
    B = np.asarray(B, dtype=float)
    if np.max(np.abs(B + B.T)) > 1e-12:
        raise ValueError("B must be antisymmetric")
    t_grid = np.asarray(t_grid, dtype=float)
    xi = float(np.linalg.norm(omega0))
    stability = _trajectory_stability(omega0, B)
    if stability is Stability.FROZEN or not np.any(macro_rhs(omega0, B)):
        if len(t_grid) > 1 and np.any(np.diff(t_grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        states = np.tile(omega0, (len(t_grid), 1))
        return MacroTrajectory(t_grid, states, xi, stability, B, None)
    sol, states = rk.solve_on_grid(lambda t, y: macro_rhs(y, B), t_grid, omega0, tol=tol)
    return MacroTrajectory(t_grid, states, xi, stability, B, sol)


def write_trajectory_csv(traj: MacroTrajectory, path) -> None:
    from .io import write_csv

    rows = [[t, *w, np.linalg.norm(w)] for t, w in zip(traj.times, traj.states)]
    write_csv(path, MACRO_CSV_HEADER, rows)

"""Gaussian dynamics of the collective fluctuation modes.

The covariance ``Sigma`` of the three fluctuation operators ``F(s_mu)`` obeys

    dSigma/dt = sigma_t A sigma_t^T + (sigma_t B Sigma + Sigma B sigma_t)
                + (C_t Sigma + Sigma C_t^T)

with the symplectic matrix ``sigma_t`` and the drift ``C_t`` both evaluated at
the time-evolved Bloch triple.  Around a stationary triple ``(0, 0, xi)`` the
first two modes reduce to one bosonic mode ``(q, p)`` with a closed-form
channel.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import rk
from .algebra import EPS
from .errors import DegenerateLength, NoStationaryState
from .macroflow import MacroTrajectory, integrate_macro

COV_CSV_HEADER = ["t", "S11", "S12", "S13", "S22", "S23", "S33"]
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class Frame(str, enum.Enum):
    FULL3 = "Full3"
    REDUCED_QP = "ReducedQP"


@dataclass(frozen=True)
class CovarianceState:
    Sigma: np.ndarray
    t: float
    frame: Frame = Frame.FULL3

    def admissibility(self, sigma=None) -> float:
        """Minimum eigenvalue of ``Sigma + (i/2) sigma``."""
        if sigma is None:
            if self.frame is not Frame.REDUCED_QP:
                raise ValueError("symplectic form required outside the reduced frame")
            sigma = J2
        return float(np.linalg.eigvalsh(self.Sigma + 0.5j * sigma).min())


@dataclass(frozen=True)
class ChannelPropagator:
    """Affine covariance map ``Sigma -> X Sigma X^T + Y`` from ``t0`` to ``t``."""

    t0: float
    t: float
    X: np.ndarray
    Y: np.ndarray

    def apply(self, Sigma) -> np.ndarray:
        return self.X @ Sigma @ self.X.T + self.Y

    def compose(self, earlier: "ChannelPropagator") -> "ChannelPropagator":
        """``self o earlier`` for consecutive intervals."""
        return ChannelPropagator(
            earlier.t0, self.t, self.X @ earlier.X,
            self.X @ earlier.Y @ self.X.T + self.Y,
        )


def symplectic_matrix(omega) -> np.ndarray:
    """``sigma[m, n] = eps[m, n, g] omega[g]``."""
    w1, w2, w3 = omega
    return np.array([[0.0, w3, -w2], [-w3, 0.0, w1], [w2, -w1, 0.0]])


def drift_matrix(omega, B) -> np.ndarray:
    """``C[m, n] = sum eps[m, m', n] B[m', n'] omega[n']``."""
    v = np.asarray(B, dtype=float) @ np.asarray(omega, dtype=float)
    return np.einsum("man,a->mn", EPS, v)


def build_flow_matrices(omega, A, B, lam=None):
    """Return ``(sigma, C, F, G)`` with ``dSigma/dt = F Sigma + Sigma F^T + G``.

    ``F = sigma B + C`` and ``G = sigma A sigma^T``.  ``lam`` is accepted for
    symmetry with the canonical-frame formulas but not needed: ``C`` is built
    from the general ``B``.
    """
    sigma = symplectic_matrix(omega)
    C = drift_matrix(omega, B)
    F = sigma @ B + C
    G = sigma @ A @ sigma.T
    return sigma, C, F, G


def covariance_rhs(Sigma, omega, A, B) -> np.ndarray:
    sigma = symplectic_matrix(omega)
    C = drift_matrix(omega, B)
    return (sigma @ A @ sigma.T + sigma @ B @ Sigma + Sigma @ B @ sigma
            + C @ Sigma + Sigma @ C.T)


def _sym(S):
    return 0.5 * (S + S.T)


def integrate_covariance(Sigma0, macro: MacroTrajectory, A, B, tol: float = 1e-10,
                         t_offset: float = 0.0) -> list[CovarianceState]:
    """Solve the covariance flow along ``macro``, sampled at ``macro.times``.

    ``Sigma0`` is the covariance at ``macro.times[0]``.
    """
    S0 = Sigma0.Sigma if isinstance(Sigma0, CovarianceState) else np.asarray(Sigma0, float)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    times = np.asarray(macro.times, dtype=float)

    def rhs(t, y):
        return covariance_rhs(y.reshape(3, 3), macro.at(t), A, B).ravel()

    if len(times) == 1:
        return [CovarianceState(_sym(S0), float(times[0]) + t_offset)]
    _, ys = rk.solve_on_grid(rhs, times, _sym(S0).ravel(), tol=tol)
    return [CovarianceState(_sym(y.reshape(3, 3)), float(t) + t_offset)
            for t, y in zip(times, ys)]


def propagator(macro: MacroTrajectory, A, B, t0: float, t: float,
               tol: float = 1e-11) -> ChannelPropagator:
    """Two-parameter propagator ``(X, Y)`` of the flow along a fixed trajectory.

    ``dX/dt = F_t X`` and ``dY/dt = F_t Y + Y F_t^T + G_t`` with ``X(t0) = I``,
    ``Y(t0) = 0``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if t == t0:
        return ChannelPropagator(t0, t, np.eye(3), np.zeros((3, 3)))

    def rhs(tt, y):
        X = y[:9].reshape(3, 3)
        Y = y[9:].reshape(3, 3)
        _, _, F, G = build_flow_matrices(macro.at(tt), A, B)
        return np.concatenate([(F @ X).ravel(), (F @ Y + Y @ F.T + G).ravel()])

    y0 = np.concatenate([np.eye(3).ravel(), np.zeros(9)])
    sol = rk.solve(rhs, (t0, t), y0, tol=tol)
    y = sol.y[-1]
    return ChannelPropagator(t0, t, y[:9].reshape(3, 3), _sym(y[9:].reshape(3, 3)))


# --- reduced (q, p) description around a stationary triple (0, 0, xi) -----

def reduced_kossakowski(A, xi: float) -> np.ndarray:
    """Real part of the one-mode Kossakowski matrix in ``(q, p)`` variables."""
    A = np.asarray(A, dtype=float)
    ax = abs(xi)
    return np.array([[A[0, 0] * ax, A[0, 1] * xi], [A[0, 1] * xi, A[1, 1] * ax]])


def qp_transform(xi: float) -> np.ndarray:
    """Matrix ``T`` with ``(q, p) = T (F(s_1), F(s_2))``."""
    if abs(xi) < 1e-14:
        raise DegenerateLength("q,p variables need a non-vanishing xi")
    return np.diag([1.0, np.sign(xi)]) / np.sqrt(abs(xi))


def fluct_to_qp(Sigma2, xi: float) -> np.ndarray:
    T = qp_transform(xi)
    return T @ np.asarray(Sigma2, dtype=float) @ T.T


def qp_to_fluct(Sigma_qp, xi: float) -> np.ndarray:
    Ti = np.linalg.inv(qp_transform(xi))
    return Ti @ np.asarray(Sigma_qp, dtype=float) @ Ti.T


def _decay_factor(b: float, t: float) -> float:
    """``(1 - exp(-2 b t)) / (2 b)`` continued to ``t`` at ``b = 0``."""
    x = 2.0 * b * t
    if abs(x) < 1e-8:
        return t * (1.0 - x / 2.0)
    return -np.expm1(-x) / (2.0 * b)


def two_mode_closed_form(Sigma0, A2, b: float, t: float) -> np.ndarray:
    """``Sigma_t = e^{-2bt} Sigma0 - (1 - e^{-2bt}) / (2b) sigma A2 sigma``."""
    Sigma0 = np.asarray(Sigma0, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    if np.isinf(t):
        if b <= 0:
            raise NoStationaryState("covariance diverges for b <= 0")
        return asymptotic_covariance(A2, b)
    return np.exp(-2.0 * b * t) * Sigma0 - _decay_factor(b, t) * (J2 @ A2 @ J2)


def asymptotic_covariance(A2, b: float) -> np.ndarray:
    if b <= 0:
        raise NoStationaryState("no invariant Gaussian state for b <= 0")
    A2 = np.asarray(A2, dtype=float)
    return np.array([[A2[1, 1], -A2[0, 1]], [-A2[0, 1], A2[0, 0]]]) / (2.0 * b)


def weyl_channel(r, A2, b: float, t: float):
    """Action on Weyl operators: ``r -> e^{-bt} r`` and the noise matrix ``Y_t``."""
    r = np.asarray(r, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    if np.isinf(t):
        if b <= 0:
            raise NoStationaryState("channel has no limit for b <= 0")
        return np.zeros_like(r), J2 @ A2 @ J2.T / (2.0 * b)
    r_t = np.exp(-b * t) * r
    Y = _decay_factor(b, t) * (J2 @ A2 @ J2.T)
    return r_t, _sym(Y)


def channel_json(r, A2, b: float, t: float) -> dict:
    r_t, Y = weyl_channel(r, A2, b, t)
    return {"t": t, "r_t": r_t.tolist(), "Y": Y.tolist()}


def sigma12_candidates(A_rot, lam: float, xi: float) -> dict[str, float]:
    """Two readings of the asymptotic (1,2) fluctuation covariance.

    ``flow``: the (1,2) entry of the stationary solution of the three-mode
    flow in ``F(s)`` coordinates, ``-xi^2 A12 / (2 b)``.
    ``literal``: ``-A12 / (2 |b|)`` with no length factor.
    """
    b = lam * xi
    if b == 0:
        raise NoStationaryState("b = 0")
    A12 = float(np.asarray(A_rot)[0, 1])
    return {"flow": -xi * xi * A12 / (2.0 * b), "literal": -A12 / (2.0 * abs(b))}


def stationary_block(A_rot, lam: float, xi: float) -> np.ndarray:
    """Limit of the (1,2)-block of the three-mode flow at the stable triple.

    With ``sigma_inf = xi J`` the asymptotic equation is
    ``dS/dt = -2b S + xi^2 A2``, ``A2 = [[A22, -A12], [-A12, A11]]``.
    """
    A = np.asarray(A_rot, dtype=float)
    b = lam * xi
    if b <= 0:
        raise NoStationaryState("stable block needs b > 0")
    A2 = np.array([[A[1, 1], -A[0, 1]], [-A[0, 1], A[0, 0]]])
    return xi * xi * A2 / (2.0 * b)


def third_mode_variance(omega0, Sigma0) -> float:
    """Asymptotic variance of the third fluctuation mode.

    ``omega^T Sigma omega`` is conserved by the flow, so the limit is
    ``omega0^T Sigma0 omega0 / xi^2``.
    """
    omega0 = np.asarray(omega0, dtype=float)
    xi2 = float(omega0 @ omega0)
    if xi2 < 1e-28:
        raise DegenerateLength("third mode variance needs xi > 0")
    return float(omega0 @ np.asarray(Sigma0, dtype=float) @ omega0) / xi2


def gaussian_char(Sigma, r) -> float:
    S = Sigma.Sigma if isinstance(Sigma, CovarianceState) else np.asarray(Sigma, float)
    r = np.asarray(r, dtype=float)
    if r.shape != (S.shape[0],):
        raise ValueError("probe dimension does not match covariance")
    return float(np.exp(-0.5 * r @ S @ r))


def composition_probes(omega0) -> list[np.ndarray]:
    omega0 = np.asarray(omega0, dtype=float)
    return [np.eye(3) / 4, np.eye(3) / 4 - np.outer(omega0, omega0),
            np.diag([0.3, 0.2, 0.25])]


def elapsed_map(omega0, A, B, tau: float, tol: float = 1e-11) -> ChannelPropagator:
    """``Phi_tau``: covariance map for elapsed time ``tau`` from reference ``omega0``."""
    if tau == 0:
        return ChannelPropagator(0.0, 0.0, np.eye(3), np.zeros((3, 3)))
    macro = integrate_macro(omega0, B, np.array([0.0, tau]), tol=min(tol, 1e-12))
    return propagator(macro, A, B, 0.0, tau, tol=tol)


def composition_gap(omega0, A, B, t0: float, s: float, t: float,
                    tol: float = 1e-11) -> float:
    """Frobenius distance between ``Phi_{t-t0}`` and ``Phi_{t-s} o Phi_{s-t0}``.

    Every ``Phi_tau`` restarts the macroscopic trajectory from ``omega0``; the
    result is the maximum over a fixed probe set of admissible covariances.
    """
    if not t0 <= s <= t:
        raise ValueError("need t0 <= s <= t")
    if s == t0 or s == t:
        return 0.0
    direct = elapsed_map(omega0, A, B, t - t0, tol)
    first = elapsed_map(omega0, A, B, s - t0, tol)
    second = elapsed_map(omega0, A, B, t - s, tol)
    gap = 0.0
    for P in composition_probes(omega0):
        d = direct.apply(P) - second.apply(first.apply(P))
        gap = max(gap, float(np.linalg.norm(d)))
    return gap


def write_covariance_csv(states: list[CovarianceState], path) -> None:
    from .io import write_csv

    rows = [[c.t, c.Sigma[0, 0], c.Sigma[0, 1], c.Sigma[0, 2], c.Sigma[1, 1],
             c.Sigma[1, 2], c.Sigma[2, 2]] for c in states]
    write_csv(path, COV_CSV_HEADER, rows)

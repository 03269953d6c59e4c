"""Linear process model, steady-state sensor filter, and the one-step
prediction operator that propagates the receiver's error covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg


class RiccatiError(RuntimeError):
    """Riccati iteration failed to converge; carries the last iterate."""

    def __init__(self, message, last_covariance):
        super().__init__(message)
        self.last_covariance = last_covariance


def _check_psd(name, m, require_pd=False):
    if float(np.abs(m - m.T).max()) > 1e-9 * max(1.0, float(np.abs(m).max())):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    if require_pd:
        if eigs.min() <= 0.0:
            raise ValueError(f"{name} must be positive-definite")
    elif eigs.min() < -1e-9 * max(1.0, eigs.max()):
        raise ValueError(f"{name} must be positive semi-definite")


class LtiSystem:
    """Discrete LTI process x' = A x + w observed through y = C x + v.

    w and v are zero-mean Gaussian with covariances Q (n x n, PSD) and
    R (m x m, PD). A warning is emitted when the process is not expansive
    (rho^2(A) <= 1): the transmit-or-retransmit tradeoff is only
    interesting for unstable dynamics.
    """

    def __init__(self, A, C, Q, R):
        self.A = linalg.as_array(A)
        self.C = linalg.as_array(C)
        self.Q = linalg.as_array(Q)
        self.R = linalg.as_array(R)
        n = self.A.shape[0]
        m = self.C.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns to match A")
        if self.Q.shape != (n, n):
            raise ValueError("Q must match the state dimension")
        if self.R.shape != (m, m):
            raise ValueError("R must be square with the measurement dimension")
        _check_psd("Q", self.Q)
        _check_psd("R", self.R, require_pd=True)
        self.n = n
        self.m = m
        self.rho_sq = linalg.spectral_radius_sq(self.A)
        if self.rho_sq <= 1.0:
            warnings.warn(
                f"rho^2(A) = {self.rho_sq:.6g} <= 1: process is not expansive, "
                "estimation error stays bounded even without transmissions",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class SteadyKalman:
    """Converged sensor-side filter plus the receiver's staleness cost table.

    cost_table[n] is the trace of the receiver error covariance after the
    newest delivered estimate is n+1 steps old, i.e. trace of the (n+1)-fold
    prediction of p_bar0. Entries are clamped at cost_cap (saturated is True
    when clamping occurred).
    """

    p_bar0: np.ndarray
    gain: np.ndarray
    cost_table: np.ndarray
    cost_cap: float
    saturated: bool = field(default=False)

    @property
    def n_max(self) -> int:
        return len(self.cost_table) - 1


def f_apply(sys: LtiSystem, X) -> np.ndarray:
    """One-step covariance prediction A X A^T + Q, symmetrized."""
    X = np.asarray(X, dtype=float)
    if X.shape != (sys.n, sys.n):
        raise ValueError(f"X must be {sys.n}x{sys.n}, got {X.shape}")
    out = sys.A @ X @ sys.A.T + sys.Q
    return 0.5 * (out + out.T)


def riccati_steady_state(
    sys: LtiSystem,
    tol: float = 1e-9,
    max_iter: int = 100000,
    q_max: int = 20,
    cost_cap: float = 1e12,
) -> SteadyKalman:
    """Iterate the filter recursion to its steady state.

    Starting from the process-noise covariance, alternate prediction and
    measurement update until the posterior covariance changes by less than
    tol elementwise. The returned cost table has q_max + 5 entries so that
    one-step-lookahead policies and the saturating boundary of the
    truncated decision model stay inside it.

    Raises RiccatiError (carrying the last iterate) when the recursion does
    not settle within max_iter, which signals an undetectable or otherwise
    unstabilizable configuration.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ident = np.eye(sys.n)
    P = sys.Q.copy()
    gain = None
    for _ in range(max_iter):
        P_pred = sys.A @ P @ sys.A.T + sys.Q
        innov = sys.C @ P_pred @ sys.C.T + sys.R
        gain = P_pred @ sys.C.T @ linalg.spd_inverse(innov).array
        P_new = (ident - gain @ sys.C) @ P_pred
        P_new = 0.5 * (P_new + P_new.T)
        if not np.all(np.isfinite(P_new)):
            raise RiccatiError("Riccati iteration diverged to non-finite values", P)
        if float(np.abs(P_new - P).max()) < tol:
            P = P_new
            break
        P = P_new
    else:
        raise RiccatiError(
            f"Riccati iteration did not converge within {max_iter} iterations", P
        )

    n_entries = q_max + 5
    table = np.empty(n_entries)
    saturated = False
    X = P
    for n in range(n_entries):
        X = f_apply(sys, X)
        value = float(np.trace(X))
        if value > cost_cap:
            value = cost_cap
            saturated = True
        table[n] = value
    if saturated:
        warnings.warn(
            f"staleness cost table saturated at cost_cap={cost_cap:g}; "
            "deep-staleness costs are clamped",
            RuntimeWarning,
            stacklevel=2,
        )
    table.flags.writeable = False
    P.flags.writeable = False
    gain.flags.writeable = False
    return SteadyKalman(p_bar0=P, gain=gain, cost_table=table, cost_cap=cost_cap, saturated=saturated)


def cost_of_q(sk: SteadyKalman, q: int) -> float:
    """Expected estimation MSE when the newest delivered estimate is q+1 steps old."""
    if q < 0 or q > sk.n_max:
        raise ValueError(f"q={q} outside cost table range 0..{sk.n_max}")
    return float(sk.cost_table[q])

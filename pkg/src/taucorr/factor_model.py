"""Ground-truth description of a low-rank-plus-diagonal correlation matrix.

A factor decomposition splits a correlation matrix as

    Sigma = Theta* + diag(v*),

where ``Theta*`` is PSD with rank ``r* < d`` and ``v*`` is a nonnegative
vector chosen so the diagonal of ``Sigma`` is exactly one.  The elementary
special case has ``v* = sigma^2 * ones`` (isotropic noise), which requires
``Theta*`` to have constant diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FactorDecomposition"]


@dataclass(frozen=True)
class FactorDecomposition:
    """Low-rank-plus-diagonal truth ``Sigma = theta_star + diag(v_star)``.

    Attributes
    ----------
    theta_star : ndarray, shape (d, d)
        PSD low-rank part.
    v_star : ndarray, shape (d,)
        Nonnegative diagonal part, ``1 - diag(theta_star)``.
    r_star : int
        Rank of ``theta_star``.
    eigenvalues : ndarray, shape (r_star,)
        Nonzero eigenvalues of ``theta_star`` in decreasing order.
    eigenvectors : ndarray, shape (d, r_star)
        Matching orthonormal eigenvectors.
    """

    theta_star: np.ndarray
    v_star: np.ndarray
    r_star: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta_star, dtype=np.float64)
        v = np.asarray(self.v_star, dtype=np.float64)
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=np.float64))
        u = np.asarray(self.eigenvectors, dtype=np.float64)
        d = th.shape[0]
        if th.shape != (d, d):
            raise ValueError(f"theta_star must be square, got {th.shape}")
        if np.max(np.abs(th - th.T), initial=0.0) > 1e-10:
            raise ValueError("theta_star is not symmetric")
        if v.shape != (d,):
            raise ValueError(f"v_star must have shape ({d},), got {v.shape}")
        if np.min(v, initial=0.0) < -1e-12:
            raise ValueError("v_star must be nonnegative")
        r = int(self.r_star)
        if not 0 <= r <= d:
            raise ValueError(f"r_star must lie in [0, {d}], got {r}")
        if lam.shape != (r,):
            raise ValueError(f"eigenvalues must have shape ({r},), got {lam.shape}")
        if r and (np.any(lam <= 0.0) or np.any(np.diff(lam) > 0.0)):
            raise ValueError("eigenvalues must be positive and non-increasing")
        if u.shape != (d, r):
            raise ValueError(f"eigenvectors must have shape ({d}, {r}), got {u.shape}")
        if r and np.max(np.abs(u.T @ u - np.eye(r))) > 1e-10:
            raise ValueError("eigenvectors are not orthonormal")
        if np.max(np.abs(th - (u * lam) @ u.T), initial=0.0) > 1e-9:
            raise ValueError("theta_star does not match its eigendecomposition")
        if np.max(np.abs(np.diag(th) + v - 1.0), initial=0.0) > 1e-10:
            raise ValueError("diag(theta_star) + v_star must equal one")
        object.__setattr__(self, "theta_star", (th + th.T) / 2.0)
        object.__setattr__(self, "v_star", v)
        object.__setattr__(self, "r_star", r)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", u)

    @property
    def d(self) -> int:
        return self.theta_star.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        """The correlation matrix ``theta_star + diag(v_star)``, with the
        diagonal pinned to exactly 1.0."""
        s = self.theta_star + np.diag(self.v_star)
        np.fill_diagonal(s, 1.0)
        return s

    def is_elementary(self, tol: float = 1e-10) -> bool:
        """True when the diagonal part is isotropic (``v* = sigma^2 I``)."""
        if self.d == 0:
            return True
        return float(np.ptp(self.v_star)) <= tol

    @property
    def noise_level(self) -> float:
        """Mean of ``v_star`` (equals sigma^2 for elementary models)."""
        return float(np.mean(self.v_star))

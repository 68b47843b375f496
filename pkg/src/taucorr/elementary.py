"""Spectral estimation of a low-rank-plus-isotropic correlation structure.

Given a plug-in correlation matrix ``Sigmahat`` for a truth of the form
``Sigma = Theta* + sigma^2 I`` with ``rank(Theta*) = r < d``, the estimator
is purely spectral: sort the eigenvalues of ``Sigmahat`` in decreasing
order, count how many sit at least ``mu`` above the smallest one to get
``rhat``, average the remaining eigenvalues to get ``sigma2hat``, and
rebuild ``Thetahat`` from the top ``rhat`` eigenpairs after subtracting
``sigma2hat``.

The threshold ``mu`` is twice the data-driven correlation deviation bound
(`mu_threshold`); its population counterpart `mu_bar` enters the guarantee:
when ``lambda_r(Theta*) >= 2 mu_bar`` and ``||T||_2 >= f^2``, the estimator
recovers the rank exactly and satisfies

    ||Thetahat - Theta*||_F^2 <= 2 r mu_bar^2,
    |sigma2hat - sigma^2|     <= mu_bar / 2,

with probability greater than ``1 - 2 alpha`` (for ``alpha < 1/2``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import C1, C2, deviation_scale, sigma_deviation_bounds
from .exceptions import DegenerateInputError, ModelMismatchError
from .factor_model import FactorDecomposition
from .transforms import arcsine_transform, operator_norm

__all__ = [
    "ElementaryEstimate",
    "ElementaryConditionsReport",
    "mu_threshold",
    "mu_bar",
    "estimate_elementary",
    "check_elementary_conditions",
]


def _check_alpha_half(alpha: float) -> None:
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha!r}")


def mu_threshold(that_norm: float, n: int, d: int, alpha: float) -> float:
    """Data-driven spectral threshold: twice the data-driven bound on
    ``||Sigmahat - Sigma||_2``.

    ``mu = 2 { C1 sqrt(||That||_2 f^2 + f^4/4) + (C1/2 + C2) f^2 }``.
    """
    _check_alpha_half(alpha)
    _, rhs_dd, _ = sigma_deviation_bounds(n, d, alpha, that_norm=that_norm)
    return 2.0 * rhs_dd


def mu_bar(t_norm: float, n: int, d: int, alpha: float) -> float:
    """Population threshold entering the guarantee:
    ``mu_bar = 2 { C1 sqrt(||T||_2) f + (C1 + C2) f^2 }``.

    On the Kendall deviation event (and when ``||T||_2 >= f^2``) this
    dominates the data-driven `mu_threshold`.
    """
    _check_alpha_half(alpha)
    if t_norm < 0.0:
        raise ValueError(f"t_norm must be nonnegative, got {t_norm!r}")
    f = deviation_scale(n, d, alpha)
    f2 = f * f
    return 2.0 * (C1 * np.sqrt(t_norm) * f + (C1 + C2) * f2)


@dataclass(frozen=True)
class ElementaryEstimate:
    """Output of `estimate_elementary`.

    Attributes
    ----------
    r_hat : int
        Estimated rank, ``#{k : lambda_k - lambda_d >= mu}``.
    sigma2_hat : float
        Average of the ``d - r_hat`` trailing eigenvalues.  May be
        negative for indefinite plug-in input; see ``sigma2_negative``.
    theta_hat : ndarray, shape (d, d)
        ``sum_{k <= r_hat} (lambda_k - sigma2_hat) u_k u_k^T``.
    mu_used : float
        The threshold actually applied.
    eigenvalues : ndarray, shape (d,)
        Input eigenvalues in decreasing order.
    sigma2_negative : bool
        Flag set instead of clamping when ``sigma2_hat <= 0``.
    """

    r_hat: int
    sigma2_hat: float
    theta_hat: np.ndarray
    mu_used: float
    eigenvalues: np.ndarray
    sigma2_negative: bool = False


def _lex_sign_fix(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip eigenvector signs so the first meaningfully nonzero component
    of each column is positive (deterministic output across LAPACK builds)."""
    u = u.copy()
    for k in range(u.shape[1]):
        col = u[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        pivot = nz[0] if nz.size else int(np.argmax(np.abs(col)))
        if col[pivot] < 0.0:
            u[:, k] = -col
    return u


def estimate_elementary(sigma_hat, mu: float) -> ElementaryEstimate:
    """Rank, noise level and low-rank part from a plug-in correlation matrix.

    Parameters
    ----------
    sigma_hat : array_like, shape (d, d)
        Symmetric plug-in correlation matrix (may be indefinite).
    mu : float
        Positive spectral threshold; `mu_threshold` gives the data-driven
        choice.

    Returns
    -------
    ElementaryEstimate

    Raises
    ------
    DegenerateInputError
        If every eigenvalue clears the threshold (``r_hat = d`` leaves no
        trailing eigenvalues to average).
    """
    a = np.asarray(sigma_hat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"sigma_hat must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("sigma_hat contains non-finite entries")
    if np.max(np.abs(a - a.T)) > 1e-10:
        raise ValueError("sigma_hat is not symmetric")
    if not (mu > 0.0) or not np.isfinite(mu):
        raise ValueError(f"mu must be positive and finite, got {mu!r}")
    d = a.shape[0]
    w, q = np.linalg.eigh((a + a.T) / 2.0)
    lam = w[::-1]
    vecs = _lex_sign_fix(q[:, ::-1])
    r_hat = int(np.sum(lam - lam[-1] >= mu))
    if r_hat >= d:
        raise DegenerateInputError(
            f"threshold mu={mu!r} keeps all {d} eigenvalues; no noise "
            "eigenvalues remain to estimate sigma^2"
        )
    sigma2_hat = float(np.mean(lam[r_hat:]))
    top = vecs[:, :r_hat]
    theta_hat = (top * (lam[:r_hat] - sigma2_hat)) @ top.T
    theta_hat = (theta_hat + theta_hat.T) / 2.0
    return ElementaryEstimate(
        r_hat=r_hat,
        sigma2_hat=sigma2_hat,
        theta_hat=theta_hat,
        mu_used=float(mu),
        eigenvalues=lam.copy(),
        sigma2_negative=bool(sigma2_hat < 0.0),
    )


@dataclass(frozen=True)
class ElementaryConditionsReport:
    """Whether a ground truth satisfies the elementary-recovery conditions.

    ``theta_error_bound`` and ``sigma2_error_bound`` are the guaranteed
    ``||Thetahat - Theta*||_F^2`` and ``|sigma2hat - sigma^2|`` ceilings
    (valid when ``all_ok``, with probability > 1 - 2 alpha).
    """

    rank_deficient: bool
    eigengap_ok: bool
    sample_size_ok: bool
    all_ok: bool
    guaranteed_rank: int
    mu_bar: float
    theta_error_bound: float
    sigma2_error_bound: float
    t_norm: float
    f_value: float


def check_elementary_conditions(
    truth: FactorDecomposition, n: int, alpha: float
) -> ElementaryConditionsReport:
    """Evaluate the recovery conditions of the spectral estimator.

    Checks ``r < d``, ``lambda_r(Theta*) >= 2 mu_bar`` and
    ``||T||_2 >= f^2``, where ``T`` is the population Kendall matrix of
    the truth and ``mu_bar = mu_bar(||T||_2, n, d, alpha)``.

    Raises
    ------
    ModelMismatchError
        If the truth's diagonal part is not isotropic.
    """
    _check_alpha_half(alpha)
    if not truth.is_elementary():
        raise ModelMismatchError(
            "truth has non-isotropic diagonal part; the elementary "
            f"estimator assumes v* = sigma^2 * ones (spread {np.ptp(truth.v_star):.3e})"
        )
    d = truth.d
    t_norm = operator_norm(arcsine_transform(truth.sigma))
    f = deviation_scale(n, d, alpha)
    mb = mu_bar(t_norm, n, d, alpha)
    r = truth.r_star
    rank_deficient = r < d
    eigengap_ok = bool(r == 0 or truth.eigenvalues[r - 1] >= 2.0 * mb)
    sample_size_ok = bool(t_norm >= f * f)
    return ElementaryConditionsReport(
        rank_deficient=rank_deficient,
        eigengap_ok=eigengap_ok,
        sample_size_ok=sample_size_ok,
        all_ok=rank_deficient and eigengap_ok and sample_size_ok,
        guaranteed_rank=r,
        mu_bar=mb,
        theta_error_bound=2.0 * r * mb * mb,
        sigma2_error_bound=mb / 2.0,
        t_norm=t_norm,
        f_value=f,
    )

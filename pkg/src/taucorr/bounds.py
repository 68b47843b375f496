"""Finite-sample deviation bounds for Kendall and plug-in correlation matrices.

Everything here is a closed-form function of the sample size ``n``, the
dimension ``d``, the failure probability ``alpha`` and one spectral norm.
The common deviation scale is

    f(n, d, alpha) = sqrt( (16/3) * d * log(2 d / alpha) / n ),

with ``n`` replaced by ``2 * floor(n/2)`` when odd (the underlying pairing
argument discards one observation).  Natural logarithm throughout.

Two bound families are exposed:

* `t_deviation_bounds` - high-probability bounds on ``||That - T||_2``
  (Kendall scale), in three algebraically ordered forms: a population-norm
  form, a fully data-driven form, and a guaranteed-coverage form.
* `sigma_deviation_bounds` - the corresponding bounds on
  ``||Sigmahat - Sigma||_2`` after the sine transform, with constants
  ``C1 = pi`` and ``C2 = 3 pi^2 / 16``; these hold with probability at
  least ``1 - alpha - alpha^2/4``.

`bennett_tail` and `bernstein_tail` evaluate the underlying matrix tail
inequalities directly, for diagnostic use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transforms import arcsine_transform, operator_norm

__all__ = [
    "C1",
    "C2",
    "deviation_scale",
    "t_deviation_bounds",
    "sigma_deviation_bounds",
    "generic_sine_lipschitz_bound",
    "t_sigma_sandwich_check",
    "bennett_tail",
    "bernstein_tail",
    "BoundReport",
    "bound_report",
]

C1 = math.pi
C2 = 3.0 * math.pi**2 / 16.0

# Constants for the generic (non-sharp) Lipschitz bound on the sine map,
# valid without any probabilistic event: pi and pi^2/8.
C1_GENERIC = math.pi
C2_GENERIC = math.pi**2 / 8.0


def _check_ndalpha(n: int, d: int, alpha: float) -> None:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d!r}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def effective_sample_size(n: int) -> int:
    """``n`` for even ``n``, else ``2 * floor(n/2)``."""
    return n if n % 2 == 0 else 2 * (n // 2)


def deviation_scale(n: int, d: int, alpha: float, *, log_dim: float | None = None) -> float:
    """The deviation scale ``f(n, d, alpha)``.

    Parameters
    ----------
    n : int
        Sample size, >= 2.  Odd values are reduced to ``2 * floor(n/2)``.
    d : int
        Dimension, >= 1.
    alpha : float
        Failure probability in (0, 1).
    log_dim : float, optional
        Replacement for ``d`` inside the logarithm only.  Supplying the
        effective rank ``4 d / ||T||_2`` tightens the bound when the
        spectrum is spread out; default is the ambient dimension.

    Returns
    -------
    float
        ``sqrt((16/3) * d * log(2 * log_dim / alpha) / n_eff)``.
    """
    _check_ndalpha(n, d, alpha)
    n_eff = effective_sample_size(n)
    ld = float(d) if log_dim is None else float(log_dim)
    if ld <= 0.0:
        raise ValueError(f"log_dim must be positive, got {log_dim!r}")
    val = (16.0 / 3.0) * d * math.log(2.0 * ld / alpha) / n_eff
    if val < 0.0:
        # log(2 d / alpha) < 0 requires alpha > 2d >= 2, impossible here.
        raise AssertionError("negative deviation scale")
    return math.sqrt(val)


def t_deviation_bounds(
    n: int,
    d: int,
    alpha: float,
    *,
    t_norm: float | None = None,
    that_norm: float | None = None,
    log_dim: float | None = None,
) -> tuple[float | None, float | None, float | None]:
    """Operator-norm deviation bounds for the empirical Kendall matrix.

    With ``f = f(n, d, alpha)`` and with probability at least
    ``1 - alpha``, ``||That - T||_2`` is below each of

        rhs_a = max( sqrt(||T||_2) f,  f^2 )                  (population)
        rhs_b = sqrt( ||That||_2 f^2 + f^4/4 ) + f^2/2        (data-driven)
        rhs_c = max( sqrt(||T||_2) f,  f^2 ) + f^2            (guaranteed)

    On that event the three are ordered ``rhs_a <= rhs_b <= rhs_c``; the
    data-driven middle form is computable without knowing ``T``.

    Parameters
    ----------
    n, d, alpha :
        As in `deviation_scale`.
    t_norm : float, optional
        ``||T||_2``.  Needed for ``rhs_a`` and ``rhs_c``; when omitted
        those slots are returned as None.
    that_norm : float, optional
        ``||That||_2``.  Needed for ``rhs_b``; None when omitted.
    log_dim : float, optional
        Passed through to `deviation_scale`.

    Returns
    -------
    (rhs_a, rhs_b, rhs_c) : tuple of float or None
    """
    f = deviation_scale(n, d, alpha, log_dim=log_dim)
    f2 = f * f
    rhs_a = rhs_b = rhs_c = None
    if t_norm is not None:
        if t_norm < 0.0:
            raise ValueError(f"t_norm must be nonnegative, got {t_norm!r}")
        rhs_a = max(math.sqrt(t_norm) * f, f2)
        rhs_c = rhs_a + f2
    if that_norm is not None:
        if that_norm < 0.0:
            raise ValueError(f"that_norm must be nonnegative, got {that_norm!r}")
        rhs_b = math.sqrt(that_norm * f2 + 0.25 * f2 * f2) + 0.5 * f2
    return rhs_a, rhs_b, rhs_c


def sigma_deviation_bounds(
    n: int,
    d: int,
    alpha: float,
    *,
    t_norm: float | None = None,
    that_norm: float | None = None,
    log_dim: float | None = None,
) -> tuple[float | None, float | None, float | None]:
    """Operator-norm deviation bounds for the plug-in correlation matrix.

    With probability at least ``1 - alpha - alpha^2/4``,
    ``||Sigmahat - Sigma||_2`` is below each of

        rhs_pop  = C1 max( sqrt(||T||_2) f, f^2 ) + C2 f^2
        rhs_dd   = C1 sqrt( ||That||_2 f^2 + f^4/4 ) + (C1/2 + C2) f^2
        rhs_guar = C1 max( sqrt(||T||_2) f, f^2 ) + (C1 + C2) f^2

    with ``C1 = pi`` and ``C2 = 3 pi^2 / 16``.  The identity
    ``rhs_guar - rhs_pop = C1 f^2`` holds exactly, and on the Kendall
    deviation event the data-driven form sits between the two.

    Returns
    -------
    (rhs_pop, rhs_dd, rhs_guar) : tuple of float or None
        Slots requiring a norm that was not supplied are None.
    """
    f = deviation_scale(n, d, alpha, log_dim=log_dim)
    f2 = f * f
    rhs_pop = rhs_dd = rhs_guar = None
    if t_norm is not None:
        if t_norm < 0.0:
            raise ValueError(f"t_norm must be nonnegative, got {t_norm!r}")
        base = C1 * max(math.sqrt(t_norm) * f, f2)
        rhs_pop = base + C2 * f2
        rhs_guar = base + (C1 + C2) * f2
    if that_norm is not None:
        if that_norm < 0.0:
            raise ValueError(f"that_norm must be nonnegative, got {that_norm!r}")
        rhs_dd = C1 * math.sqrt(that_norm * f2 + 0.25 * f2 * f2) + (0.5 * C1 + C2) * f2
    return rhs_pop, rhs_dd, rhs_guar


def generic_sine_lipschitz_bound(t_deviation: float) -> float:
    """Deterministic bound on the sine map: ``pi * e + (pi^2/8) * e^2``.

    Valid for any symmetric perturbation of size ``e = ||That - T||_2``,
    with no probabilistic event; slightly larger constants than the
    event-based `sigma_deviation_bounds`.
    """
    if t_deviation < 0.0:
        raise ValueError(f"t_deviation must be nonnegative, got {t_deviation!r}")
    return C1_GENERIC * t_deviation + C2_GENERIC * t_deviation**2


def t_sigma_sandwich_check(sigma, *, tol: float = 1e-10) -> tuple[float, float, float, bool]:
    """Verify ``(2/pi) ||Sigma||_2 <= ||T||_2 <= ||Sigma||_2``.

    ``T`` is the arcsine transform of ``Sigma``.  The upper inequality is
    an equality iff ``Sigma`` is the identity.

    Parameters
    ----------
    sigma : array_like
        PSD correlation matrix (eigenvalues >= -1e-8 tolerated).
    tol : float
        Slack allowed in each inequality.

    Returns
    -------
    (lower, t_norm, upper, ok)
        ``lower = (2/pi) ||Sigma||_2``, ``upper = ||Sigma||_2`` and
        ``ok`` is True when the chain holds within ``tol``.
    """
    a = np.asarray(sigma, dtype=np.float64)
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    if w[0] < -1e-8:
        raise ValueError(f"sigma must be PSD; min eigenvalue {w[0]:.3e}")
    sig_norm = operator_norm(a)
    t_norm = operator_norm(arcsine_transform(a))
    lower = 2.0 / math.pi * sig_norm
    ok = (lower - tol <= t_norm) and (t_norm <= sig_norm + tol)
    return lower, t_norm, sig_norm, ok


def bennett_tail(n: int, d: int, t: float, t_norm: float) -> float:
    """Matrix Bennett tail for ``P(||That - T||_2 >= t)``.

    ``2 d exp( -(n_eff ||T||_2 / (2 d)) h(t / ||T||_2) )`` with
    ``h(u) = (1 + u) log(1 + u) - u``.  Values above 1 are vacuous but
    returned as-is (capped at 1) for plotting convenience.
    """
    if t < 0.0 or t_norm <= 0.0:
        raise ValueError("t must be >= 0 and t_norm > 0")
    _check_ndalpha(n, d, 0.5)
    n_eff = effective_sample_size(n)
    u = t / t_norm
    h = (1.0 + u) * math.log1p(u) - u
    return min(1.0, 2.0 * d * math.exp(-(n_eff * t_norm / (2.0 * d)) * h))


def bernstein_tail(n: int, d: int, t: float, t_norm: float) -> float:
    """Split matrix Bernstein tail for ``P(||That - T||_2 >= t)``.

    ``2 d max( exp(-(3/16) n_eff t^2 / (d ||T||_2)),
    exp(-(3/16) n_eff t / d) )``, the two branches crossing at
    ``t = ||T||_2``.  Always at least as large as the Bennett tail.
    """
    if t < 0.0 or t_norm <= 0.0:
        raise ValueError("t must be >= 0 and t_norm > 0")
    _check_ndalpha(n, d, 0.5)
    n_eff = effective_sample_size(n)
    quad = math.exp(-(3.0 / 16.0) * n_eff * t * t / (d * t_norm))
    lin = math.exp(-(3.0 / 16.0) * n_eff * t / d)
    return min(1.0, 2.0 * d * max(quad, lin))


@dataclass(frozen=True)
class BoundReport:
    """All closed-form bounds for one ``(n, d, alpha)`` configuration.

    Norm-dependent fields are None when the corresponding spectral norm
    was not supplied.
    """

    n: int
    d: int
    alpha: float
    f_value: float
    t_norm: float | None = None
    that_norm: float | None = None
    t_bound_population: float | None = None
    t_bound_data_driven: float | None = None
    t_bound_guaranteed: float | None = None
    sigma_bound_population: float | None = None
    sigma_bound_data_driven: float | None = None
    sigma_bound_guaranteed: float | None = None
    constants: dict = field(default_factory=lambda: {"C1": C1, "C2": C2})

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "alpha": self.alpha,
            "f_value": self.f_value,
            "t_norm": self.t_norm,
            "that_norm": self.that_norm,
            "t_bound_population": self.t_bound_population,
            "t_bound_data_driven": self.t_bound_data_driven,
            "t_bound_guaranteed": self.t_bound_guaranteed,
            "sigma_bound_population": self.sigma_bound_population,
            "sigma_bound_data_driven": self.sigma_bound_data_driven,
            "sigma_bound_guaranteed": self.sigma_bound_guaranteed,
            "constants": dict(self.constants),
        }


def bound_report(
    n: int,
    d: int,
    alpha: float,
    *,
    t_norm: float | None = None,
    that_norm: float | None = None,
    log_dim: float | None = None,
) -> BoundReport:
    """Assemble a `BoundReport` from whichever norms are available."""
    f = deviation_scale(n, d, alpha, log_dim=log_dim)
    ta, tb, tc = t_deviation_bounds(
        n, d, alpha, t_norm=t_norm, that_norm=that_norm, log_dim=log_dim
    )
    sp, sd, sg = sigma_deviation_bounds(
        n, d, alpha, t_norm=t_norm, that_norm=that_norm, log_dim=log_dim
    )
    return BoundReport(
        n=n,
        d=d,
        alpha=alpha,
        f_value=f,
        t_norm=t_norm,
        that_norm=that_norm,
        t_bound_population=ta,
        t_bound_data_driven=tb,
        t_bound_guaranteed=tc,
        sigma_bound_population=sp,
        sigma_bound_data_driven=sd,
        sigma_bound_guaranteed=sg,
    )

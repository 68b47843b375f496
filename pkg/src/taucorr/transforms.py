"""Elementwise maps between Kendall and product-moment correlation scales.

For elliptically distributed data the two scales are linked entrywise by

    sigma = sin(pi/2 * tau),        tau = (2/pi) * arcsin(sigma),

so a Kendall matrix converts to a correlation matrix and back without any
moment estimation.  The plug-in correlation matrix obtained by applying the
sine map to an empirical Kendall matrix need not be positive semi-definite;
`project_psd` repairs it by eigenvalue clipping followed by rescaling to a
unit diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError
from .rank_stats import KendallMatrix

__all__ = [
    "CorrelationMatrix",
    "sine_transform",
    "arcsine_transform",
    "project_psd",
    "operator_norm",
]


@dataclass(frozen=True)
class CorrelationMatrix:
    """A ``d x d`` correlation-scale matrix with provenance.

    Attributes
    ----------
    values : ndarray, shape (d, d)
        Symmetric, unit diagonal, entries in [-1, 1].  Plugin-provenance
        matrices may carry diagonal entries *below* 1: tied observations
        shrink the empirical self-correlation, and the sine transform
        passes that through.
    provenance : {"population", "plugin", "refined"}
        "population" matrices are PSD; "plugin" matrices (sine transform
        of an empirical Kendall matrix) may be indefinite; "refined"
        matrices come out of the nuclear-norm estimator.
    """

    values: np.ndarray
    provenance: str = "plugin"

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"correlation matrix must be square, got shape {a.shape}")
        if self.provenance not in ("population", "plugin", "refined"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(a)):
            raise ValueError("correlation matrix contains non-finite entries")
        if not np.array_equal(a, a.T):
            if np.max(np.abs(a - a.T)) > 1e-12:
                raise ValueError("correlation matrix is not symmetric")
            a = (a + a.T) / 2.0
        diag = np.diag(a)
        if self.provenance == "plugin":
            # Ties depress the empirical self-correlation, so only an
            # upper bound is enforced here.
            if np.max(diag) > 1.0 + 1e-12 or np.min(diag) <= 0.0:
                raise ValueError(
                    "plugin correlation diagonal must lie in (0, 1]"
                )
        elif np.max(np.abs(diag - 1.0)) > 1e-12:
            raise ValueError("correlation matrix must have unit diagonal")
        if np.max(np.abs(a)) > 1.0 + 1e-12:
            raise ValueError("correlation entries must lie in [-1, 1]")
        object.__setattr__(self, "values", a)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])


def _as_square(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _clip_unit(a: np.ndarray, name: str, tol: float = 1e-12) -> np.ndarray:
    over = np.max(np.abs(a)) - 1.0
    if over > tol:
        raise ValueError(f"{name} entries must lie in [-1, 1]; exceeded by {over:.3e}")
    return np.clip(a, -1.0, 1.0)


def sine_transform(tau_matrix) -> CorrelationMatrix:
    """Map a Kendall matrix to correlation scale, ``sin(pi/2 * tau)``.

    Parameters
    ----------
    tau_matrix : KendallMatrix or array_like
        Symmetric with entries in [-1, 1] (a slack of 1e-12 is tolerated
        and clipped).  Unit diagonal maps to unit diagonal exactly.

    Returns
    -------
    CorrelationMatrix
        Provenance "population" when the input is a population Kendall
        matrix, "plugin" otherwise.  Plug-in outputs may be indefinite;
        see `project_psd`.
    """
    provenance = "plugin"
    if isinstance(tau_matrix, KendallMatrix) and tau_matrix.kind == "population":
        provenance = "population"
    a = _clip_unit(_as_square(tau_matrix, "tau matrix"), "tau matrix")
    s = np.sin(np.pi / 2.0 * a)
    # Restore an exactly-unit diagonal when the input had one: sin(pi/2)
    # evaluates to 1.0 in IEEE double, but guard against entries that were
    # clipped down from 1 + eps.
    np.fill_diagonal(s, np.where(np.diag(a) == 1.0, 1.0, np.diag(s)))
    return CorrelationMatrix(values=(s + s.T) / 2.0, provenance=provenance)


def arcsine_transform(sigma) -> KendallMatrix:
    """Map a correlation matrix to Kendall scale, ``(2/pi) * arcsin(sigma)``.

    Inverse of `sine_transform` on [-1, 1]; the round trip reproduces the
    input to floating-point accuracy.  The output is tagged as a
    population Kendall matrix, and inherits positive semi-definiteness
    from PSD inputs.
    """
    a = _clip_unit(_as_square(sigma, "correlation matrix"), "correlation matrix")
    t = 2.0 / np.pi * np.arcsin(a)
    np.fill_diagonal(t, np.where(np.diag(a) == 1.0, 1.0, np.diag(t)))
    return KendallMatrix(values=(t + t.T) / 2.0, kind="population")


def operator_norm(m) -> float:
    """Spectral norm of a symmetric matrix (largest absolute eigenvalue).

    Raises
    ------
    ValueError
        If the input is not symmetric within 1e-10 or contains
        non-finite entries.
    """
    a = _as_square(m, "matrix")
    if a.shape[0] == 0:
        return 0.0
    if np.max(np.abs(a - a.T)) > 1e-10:
        raise ValueError("operator_norm expects a symmetric matrix")
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    return float(max(abs(w[0]), abs(w[-1])))


def project_psd(sigma) -> CorrelationMatrix:
    """Nearest-PSD repair of an indefinite correlation-scale matrix.

    Eigenvalues are clipped at zero, the matrix is reassembled and then
    rescaled symmetrically (``D^{-1/2} M D^{-1/2}``) so the diagonal is
    exactly one again.  Inputs that are already PSD come back unchanged
    up to 1e-12, so the operation is idempotent at that tolerance.

    Parameters
    ----------
    sigma : CorrelationMatrix or array_like
        Symmetric with unit diagonal.

    Returns
    -------
    CorrelationMatrix
        PSD, unit diagonal, provenance "plugin".

    Raises
    ------
    DegenerateInputError
        If clipping annihilates some diagonal entry (the rescaling would
        divide by zero).
    """
    a = _as_square(sigma, "correlation matrix")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise ValueError("correlation matrix is not symmetric")
    a = (a + a.T) / 2.0
    diag = np.diag(a)
    if np.max(diag) > 1.0 + 1e-12 or np.min(diag) <= 0.0:
        raise ValueError(
            "correlation matrix diagonal must lie in (0, 1] before repair"
        )
    w, q = np.linalg.eigh(a)
    if w[0] >= 0.0:
        return CorrelationMatrix(values=a, provenance="plugin")
    clipped = (q * np.maximum(w, 0.0)) @ q.T
    diag = np.diag(clipped).copy()
    if np.min(diag) <= 1e-14:
        raise DegenerateInputError(
            "PSD clipping removed all mass from some diagonal entry; "
            "cannot rescale to a correlation matrix"
        )
    scale = 1.0 / np.sqrt(diag)
    out = clipped * scale[:, None] * scale[None, :]
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    out = _clip_unit(out, "projected matrix", tol=1e-9)
    np.fill_diagonal(out, 1.0)
    return CorrelationMatrix(values=out, provenance="plugin")

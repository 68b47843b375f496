"""Tangent-space projectors, dual-certificate construction and norm checks.

For an orthonormal basis ``U`` (d x r) of the column space of a symmetric
low-rank matrix, the tangent space of the low-rank variety at that matrix
is projected onto by

    P_T(N)    = U U^T N + N U U^T - U U^T N U U^T,
    P_Tperp(N) = (I - U U^T) N (I - U U^T),

while ``P_Omega`` keeps only the diagonal.  The coherence
``gamma = max_i (U U^T)_{ii}`` controls how much these projectors can blow
up entrywise norms: ``P_T`` contracts diagonal matrices at rate
``3 gamma`` in the max norm, which is what makes the certificate fixed
point below solvable whenever ``gamma < 1/3``.

`construct_certificate` realises the dual certificate for the nuclear-norm
program: it solves

    Phi = P_T P_Omega Phi + P_T E - mu U U^T

and reports whether ``-Phi_o + E`` behaves as a valid dual attestation
(tangent equality, orthogonal norm at most ``mu / c``, and
``||Phi||_2 <= (2/c + 1) mu``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .transforms import operator_norm

__all__ = [
    "TangentSpace",
    "off_diagonal",
    "p_omega",
    "p_tangent",
    "p_tangent_perp",
    "CertificateReport",
    "construct_certificate",
    "ContractionReport",
    "contraction_check",
]


@dataclass(frozen=True)
class TangentSpace:
    """Tangent space at a symmetric rank-``r`` matrix, held as its basis.

    Attributes
    ----------
    basis : ndarray, shape (d, r)
        Orthonormal columns spanning the column space.
    gamma : float
        Coherence ``max_i (U U^T)_{ii}`` -- also the largest absolute entry
        of ``U U^T`` since that matrix is PSD.  Satisfies
        ``r/d <= gamma <= 1`` for nonempty bases.
    """

    basis: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.basis, dtype=np.float64)
        if u.ndim != 2:
            raise ValueError(f"basis must be d x r, got shape {u.shape}")
        d, r = u.shape
        if r > d:
            raise ValueError(f"rank {r} exceeds dimension {d}")
        if r and np.max(np.abs(u.T @ u - np.eye(r))) > 1e-12:
            raise ValueError("basis columns are not orthonormal within 1e-12")
        object.__setattr__(self, "basis", u)

    @classmethod
    def from_matrix(cls, m, rank: int | None = None, tol: float = 1e-10) -> "TangentSpace":
        """Tangent space at a symmetric matrix, basis from its eigenvectors.

        Keeps the ``rank`` leading eigenvectors by absolute eigenvalue, or
        all with ``|lambda| > tol * max|lambda|`` when ``rank`` is None.
        """
        a = np.asarray(m, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if np.max(np.abs(a - a.T), initial=0.0) > 1e-10:
            raise ValueError("matrix is not symmetric")
        w, q = np.linalg.eigh((a + a.T) / 2.0)
        order = np.argsort(-np.abs(w))
        if rank is None:
            scale = np.abs(w[order[0]]) if w.size else 0.0
            rank = int(np.sum(np.abs(w) > tol * max(scale, 1.0)))
        if not 0 <= rank <= a.shape[0]:
            raise ValueError(f"rank must lie in [0, {a.shape[0]}], got {rank}")
        return cls(basis=q[:, order[:rank]])

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]

    @property
    def gamma(self) -> float:
        if self.r == 0:
            return 0.0
        return float(np.max(np.sum(self.basis**2, axis=1)))

    def projector(self) -> np.ndarray:
        """The d x d column-space projector ``U U^T``."""
        return self.basis @ self.basis.T


def off_diagonal(m) -> np.ndarray:
    """``M`` with its diagonal zeroed: ``M - I o M``."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    out = a.copy()
    np.fill_diagonal(out, 0.0)
    return out


def p_omega(m) -> np.ndarray:
    """Diagonal part of ``M`` as a full matrix: ``I o M``."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return np.diag(np.diag(a).copy())


def _conformal(ts: TangentSpace, m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.shape != (ts.d, ts.d):
        raise ValueError(f"matrix shape {a.shape} does not match tangent space d={ts.d}")
    return a


def p_tangent(ts: TangentSpace, m) -> np.ndarray:
    """Project onto the tangent space: ``PN + NP - PNP`` with ``P = UU^T``."""
    a = _conformal(ts, m)
    u = ts.basis
    if ts.r == 0:
        return np.zeros_like(a)
    un = u @ (u.T @ a)          # P N
    nu = (a @ u) @ u.T          # N P
    unu = (un @ u) @ u.T        # P N P
    return un + nu - unu


def p_tangent_perp(ts: TangentSpace, m) -> np.ndarray:
    """Project onto the orthogonal complement: ``(I-P) N (I-P)``."""
    a = _conformal(ts, m)
    return a - p_tangent(ts, a)


@dataclass(frozen=True)
class CertificateReport:
    """Verification of the four dual-certificate properties.

    ``tangent_membership``: ``Phi`` lies in the tangent space
    (``||P_Tperp Phi||_F <= 1e-8``).
    ``tangent_equality``: ``P_T(-Phi_o + E) = mu U U^T`` within 1e-8
    in Frobenius norm.
    ``orthogonal_norm``: ``||P_Tperp(-Phi_o + E)||_2 <= mu/c + 1e-8``.
    ``certificate_norm``: ``||Phi||_2 <= (2/c + 1) mu + 1e-8``.
    """

    gamma: float
    mu: float
    c: float
    mu_threshold: float
    iterations: int
    tangent_membership: bool
    tangent_equality: bool
    orthogonal_norm: bool
    certificate_norm: bool
    residual_tangent_membership: float
    residual_tangent_equality: float
    value_orthogonal_norm: float
    value_certificate_norm: float

    @property
    def all_ok(self) -> bool:
        return (
            self.tangent_membership
            and self.tangent_equality
            and self.orthogonal_norm
            and self.certificate_norm
        )


def certificate_mu_threshold(gamma: float, c: float, e_norm: float) -> float:
    """Smallest ``mu`` for which the certificate bound is guaranteed:
    ``(1/c - g/(1-3g))^{-1} (2 sqrt(g)/(1-3g) + 1) ||E||_2``.

    Requires ``gamma < 1/(c+3)`` so the leading factor is positive.  At
    ``c = 2`` and ``gamma = 1/9`` the prefactor evaluates to 6.
    """
    if not (0.0 <= gamma < 1.0 / (c + 3.0)):
        raise ValueError(f"gamma={gamma!r} must lie in [0, 1/(c+3)) for c={c!r}")
    lead = 1.0 / c - gamma / (1.0 - 3.0 * gamma)
    return (2.0 * math.sqrt(gamma) / (1.0 - 3.0 * gamma) + 1.0) * e_norm / lead


def construct_certificate(
    ts: TangentSpace, e, mu: float, c: float = 2.0, *, tol: float = 1e-12
) -> tuple[np.ndarray, CertificateReport]:
    """Build and verify the dual certificate for one noise instance.

    Solves ``Phi = P_T P_Omega Phi + P_T E - mu U U^T`` by fixed-point
    iteration, which contracts in the entrywise max norm at rate
    ``3 gamma`` (hence the ``gamma`` precondition), then evaluates the
    four certificate checks.  A ``mu`` below `certificate_mu_threshold`
    is allowed: the construction still runs, and the report simply
    records which checks failed.

    Parameters
    ----------
    ts : TangentSpace
    e : array_like, shape (d, d)
        Symmetric noise matrix.
    mu : float
        Penalty level, > 0.
    c : float
        Dual-norm margin parameter, >= 1.  The orthogonal check is
        ``||P_Tperp(-Phi_o + E)||_2 <= mu / c``.
    tol : float
        Fixed-point stopping tolerance in the max norm.

    Returns
    -------
    (Phi, CertificateReport)

    Raises
    ------
    ValueError
        If ``gamma >= 1/(c+3)`` ("gamma too large").
    NumericalError
        If the fixed point fails to contract within the iteration cap.
    """
    a = _conformal(ts, e)
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10:
        raise ValueError("E must be symmetric")
    if not (mu > 0.0) or not np.isfinite(mu):
        raise ValueError(f"mu must be positive and finite, got {mu!r}")
    if c < 1.0:
        raise ValueError(f"c must be >= 1, got {c!r}")
    gamma = ts.gamma
    if gamma >= 1.0 / (c + 3.0):
        raise ValueError(
            f"gamma too large: {gamma:.6f} >= 1/(c+3) = {1.0 / (c + 3.0):.6f}"
        )
    proj = ts.projector()
    constant = p_tangent(ts, a) - mu * proj
    phi = constant.copy()
    # Contraction rate is 3*gamma; the cap allows the full tolerance decay
    # plus headroom even at the worst admissible gamma.
    max_iter = int(math.ceil(10.0 * (1.0 - math.log10(tol)) / (1.0 - 3.0 * gamma)))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = p_tangent(ts, p_omega(phi)) + constant
        delta = float(np.max(np.abs(nxt - phi)))
        phi = nxt
        if delta < tol:
            break
    else:
        raise NumericalError(
            f"certificate fixed point did not contract below {tol:.1e} in "
            f"{max_iter} iterations (gamma={gamma:.6f}; rate 3*gamma={3 * gamma:.6f})"
        )

    g_c = -off_diagonal(phi) + a
    res_member = float(np.linalg.norm(p_tangent_perp(ts, phi), "fro"))
    res_equal = float(np.linalg.norm(p_tangent(ts, g_c) - mu * proj, "fro"))
    val_orth = operator_norm(p_tangent_perp(ts, g_c))
    val_norm = operator_norm((phi + phi.T) / 2.0)
    e_norm = operator_norm(a)
    report = CertificateReport(
        gamma=gamma,
        mu=float(mu),
        c=float(c),
        mu_threshold=certificate_mu_threshold(gamma, c, e_norm),
        iterations=iterations,
        tangent_membership=res_member <= 1e-8,
        tangent_equality=res_equal <= 1e-8,
        orthogonal_norm=val_orth <= mu / c + 1e-8,
        certificate_norm=val_norm <= (2.0 / c + 1.0) * mu + 1e-8,
        residual_tangent_membership=res_member,
        residual_tangent_equality=res_equal,
        value_orthogonal_norm=val_orth,
        value_certificate_norm=val_norm,
    )
    return phi, report


@dataclass(frozen=True)
class ContractionReport:
    """Max observed ratio (lhs / rhs) for each projector norm inequality.

    All four ratios are at most ``1 + 1e-10`` when the inequalities hold:

    1. ``||P_T D||_inf  <= 3 gamma ||D||_inf`` for diagonal ``D``;
    2. ``||P_T M||_inf  <= 2 sqrt(gamma) ||M||_2``;
    3. ``||P_Omega P_T M||_1 <= 3 gamma ||M||_1`` (entrywise sums);
    4. ``||A C B||_inf <= sqrt(||A A^T||_inf ||B^T B||_inf) ||C||_2``.
    """

    trials: int
    max_ratio_diag_inf: float
    max_ratio_spectral_inf: float
    max_ratio_one_norm: float
    max_ratio_sandwich_inf: float
    all_ok: bool


def contraction_check(
    ts: TangentSpace, trials: int, rng=None, *, slack: float = 1e-10
) -> ContractionReport:
    """Stress the projector norm inequalities on random inputs.

    Parameters
    ----------
    ts : TangentSpace
    trials : int
        Number of random draws, >= 1.
    rng : numpy Generator, optional
        Defaults to a fixed seed for reproducibility.
    slack : float
        Tolerance on each ratio.

    Returns
    -------
    ContractionReport
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    d = ts.d
    gamma = ts.gamma
    tiny = np.finfo(np.float64).tiny
    r1 = r2 = r3 = r4 = 0.0
    for _ in range(trials):
        dv = rng.standard_normal(d)
        dm = np.diag(dv)
        m = rng.standard_normal((d, d))
        lhs1 = np.max(np.abs(p_tangent(ts, dm)))
        rhs1 = 3.0 * gamma * np.max(np.abs(dv))
        r1 = max(r1, lhs1 / max(rhs1, tiny) if lhs1 > 0 else 0.0)

        lhs2 = np.max(np.abs(p_tangent(ts, m)))
        rhs2 = 2.0 * math.sqrt(gamma) * np.linalg.norm(m, 2)
        r2 = max(r2, lhs2 / max(rhs2, tiny) if lhs2 > 0 else 0.0)

        lhs3 = np.sum(np.abs(p_omega(p_tangent(ts, m))))
        rhs3 = 3.0 * gamma * np.sum(np.abs(m))
        r3 = max(r3, lhs3 / max(rhs3, tiny) if lhs3 > 0 else 0.0)

        av = rng.standard_normal((d, d))
        bv = rng.standard_normal((d, d))
        cv = rng.standard_normal((d, d))
        lhs4 = np.max(np.abs(av @ cv @ bv))
        rhs4 = math.sqrt(
            np.max(np.abs(av @ av.T)) * np.max(np.abs(bv.T @ bv))
        ) * np.linalg.norm(cv, 2)
        r4 = max(r4, lhs4 / max(rhs4, tiny))
    ok = max(r1, r2, r3, r4) <= 1.0 + slack
    return ContractionReport(
        trials=trials,
        max_ratio_diag_inf=r1,
        max_ratio_spectral_inf=r2,
        max_ratio_one_norm=r3,
        max_ratio_sandwich_inf=r4,
        all_ok=ok,
    )

"""Sampling from semiparametric elliptical copula models with known truth.

A draw consists of an elliptical latent vector -- Gaussian, or Student-t
obtained by dividing a Gaussian by an independent chi factor -- with
copula correlation matrix ``Sigma``, pushed through strictly increasing
marginal transforms column by column.  Neither the generator choice nor
the marginals move the population Kendall matrix, which stays
``T = (2/pi) arcsin(Sigma)`` entrywise; that invariance is the whole point
of rank-based estimation and is exercised directly in the tests.

Ground truths with factor structure ``Sigma = Theta* + diag(v*)`` are
built by `make_factor_truth`.  For the isotropic ("elementary") case the
eigenvectors must make ``diag(Theta*)`` exactly constant, which a Haar
draw cannot do; we use flat orthogonal designs instead (Hadamard columns
when ``d`` is a power of two, trigonometric pairs otherwise -- the latter
requiring equal eigenvalues within each pair).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard
from scipy.special import expit

from .exceptions import InfeasibleSpecError, NumericalError
from .factor_model import FactorDecomposition
from .rank_stats import SampleMatrix
from .transforms import CorrelationMatrix

__all__ = [
    "MARGINAL_TRANSFORMS",
    "CopulaSpec",
    "FactorSpec",
    "make_factor_truth",
    "sample",
    "replicate_rng",
]

MARGINAL_TRANSFORMS = {
    "identity": lambda z: z,
    "exp": np.exp,
    "logit_normal": expit,
    "cube": lambda z: z**3,
}


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for replicate ``index``.

    Streams are derived by seed-sequence mixing of ``(master_seed,
    index)``, so replicates can run in parallel and in any order while
    reproducing bit-for-bit.
    """
    if index < 0:
        raise ValueError(f"replicate index must be nonnegative, got {index!r}")
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


@dataclass(frozen=True)
class CopulaSpec:
    """Population description of one sampling configuration.

    Attributes
    ----------
    sigma : CorrelationMatrix or array_like
        Copula correlation matrix; must be PSD to 1e-8 tolerance.
    generator : {"gaussian", "student_t"}
    df : float
        Degrees of freedom for the Student-t generator (default 3;
        heavy tails are harmless, rank statistics are moment-free).
    marginals : str or sequence of str
        Strictly increasing transform per column, from
        ``MARGINAL_TRANSFORMS``; a single name applies to all columns.
    seed : int
        64-bit unsigned master seed used when no generator is passed to
        `sample`.
    """

    sigma: CorrelationMatrix
    generator: str = "gaussian"
    df: float = 3.0
    marginals: object = "identity"
    seed: int = 0

    def __post_init__(self):
        sig = self.sigma
        if not isinstance(sig, CorrelationMatrix):
            sig = CorrelationMatrix(values=np.asarray(sig), provenance="population")
        if float(np.linalg.eigvalsh(sig.values)[0]) < -1e-8:
            raise ValueError("sigma must be PSD within 1e-8")
        object.__setattr__(self, "sigma", sig)
        if self.generator not in ("gaussian", "student_t"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.generator == "student_t" and not (self.df > 0.0):
            raise ValueError(f"student_t requires df > 0, got {self.df!r}")
        names = self.column_marginals()
        for name in names:
            if name not in MARGINAL_TRANSFORMS:
                raise ValueError(
                    f"unknown marginal {name!r}; choose from "
                    f"{sorted(MARGINAL_TRANSFORMS)}"
                )
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")

    @property
    def d(self) -> int:
        return self.sigma.d

    def column_marginals(self) -> list:
        """Marginal transform name per column, expanded from shorthand."""
        if isinstance(self.marginals, str):
            return [self.marginals] * self.d
        names = list(self.marginals)
        if len(names) != self.d:
            raise ValueError(
                f"got {len(names)} marginals for d={self.d} columns"
            )
        return names


@dataclass(frozen=True)
class FactorSpec:
    """Recipe for a synthetic low-rank-plus-diagonal truth.

    ``elementary=True`` forces ``v* = sigma^2 * ones`` with
    ``sigma^2 = 1 - sum(lambda)/d``, which requires eigenvectors with
    exactly constant diagonal; `make_factor_truth` then uses a flat
    orthogonal design and ``eigenvector_style`` is ignored.
    """

    d: int
    r: int
    factor_eigenvalues: tuple = ()
    eigenvector_style: str = "delocalized_haar"
    elementary: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d!r}")
        if not 0 <= self.r <= self.d:
            raise ValueError(f"r must lie in [0, {self.d}], got {self.r!r}")
        lam = tuple(float(x) for x in self.factor_eigenvalues)
        if len(lam) != self.r:
            raise ValueError(
                f"expected {self.r} eigenvalues, got {len(lam)}"
            )
        if any(x <= 0.0 for x in lam):
            raise ValueError("factor eigenvalues must be positive")
        if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
            raise ValueError("factor eigenvalues must be non-increasing")
        if self.eigenvector_style not in ("delocalized_haar", "spiked"):
            raise ValueError(f"unknown eigenvector_style {self.eigenvector_style!r}")
        object.__setattr__(self, "factor_eigenvalues", lam)


def _haar_columns(d: int, r: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, r))
    q, rr = np.linalg.qr(g)
    # Fix the sign convention so the draw is Haar and deterministic.
    return q * np.sign(np.diag(rr))


def _flat_design(d: int, lam: tuple) -> np.ndarray:
    """Orthonormal columns making ``diag(U diag(lam) U^T)`` exactly constant.

    Power-of-two ``d``: normalized Hadamard columns (any eigenvalues).
    Otherwise: the flat ones-vector plus cosine/sine pairs, which have
    constant *pairwise* squared rows -- the two eigenvalues within each
    pair must then coincide.
    """
    r = len(lam)
    if d & (d - 1) == 0:
        return hadamard(d).astype(np.float64)[:, :r] / np.sqrt(d)
    cols = []
    idx = 0
    if r % 2 == 1:
        cols.append(np.full(d, 1.0 / np.sqrt(d)))
        idx = 1
    i = np.arange(d)
    k = 1
    while idx < r:
        if lam[idx] != lam[idx + 1]:
            raise InfeasibleSpecError(
                f"elementary design at d={d} (not a power of two) needs "
                f"pairwise-equal eigenvalues; got {lam[idx]} != {lam[idx + 1]} "
                "at positions "
                f"{idx}, {idx + 1}"
            )
        if k >= (d + 1) // 2:
            raise InfeasibleSpecError(
                f"rank {r} exceeds the available flat design size at d={d}"
            )
        angle = 2.0 * np.pi * k * i / d
        cols.append(np.sqrt(2.0 / d) * np.cos(angle))
        cols.append(np.sqrt(2.0 / d) * np.sin(angle))
        idx += 2
        k += 1
    return np.column_stack(cols)


def make_factor_truth(spec: FactorSpec, rng: np.random.Generator | None = None) -> FactorDecomposition:
    """Construct the ground-truth decomposition for a `FactorSpec`.

    Parameters
    ----------
    spec : FactorSpec
    rng : numpy Generator, optional
        Source of randomness for the Haar eigenvector style; a fixed
        default seed is used when omitted.  Spiked and elementary designs
        are deterministic.

    Returns
    -------
    FactorDecomposition

    Raises
    ------
    InfeasibleSpecError
        If ``diag(Theta*)`` would exceed 1 somewhere, or the elementary
        flat design cannot be realised for (d, r, eigenvalues).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    d, r = spec.d, spec.r
    lam = np.asarray(spec.factor_eigenvalues, dtype=np.float64)
    if r == 0:
        return FactorDecomposition(
            theta_star=np.zeros((d, d)),
            v_star=np.ones(d),
            r_star=0,
            eigenvalues=np.empty(0),
            eigenvectors=np.empty((d, 0)),
        )
    if spec.elementary:
        noise = 1.0 - float(np.sum(lam)) / d
        if noise < -1e-12:
            raise InfeasibleSpecError(
                f"elementary model needs sum(lambda) <= d; got "
                f"{float(np.sum(lam))} > {d}"
            )
        u = _flat_design(d, spec.factor_eigenvalues)
    elif spec.eigenvector_style == "spiked":
        u = np.eye(d)[:, :r]
    else:
        u = _haar_columns(d, r, rng)
    theta = (u * lam) @ u.T
    theta = (theta + theta.T) / 2.0
    diag = np.diag(theta).copy()
    if np.max(diag) > 1.0 + 1e-12:
        raise InfeasibleSpecError(
            f"diag(Theta*) reaches {np.max(diag):.6f} > 1; shrink the "
            "factor eigenvalues"
        )
    v = np.clip(1.0 - diag, 0.0, None)
    return FactorDecomposition(
        theta_star=theta,
        v_star=v,
        r_star=r,
        eigenvalues=lam,
        eigenvectors=u,
    )


def _psd_factor(sigma: np.ndarray) -> np.ndarray:
    """Matrix ``A`` with ``A A^T = Sigma``, tolerating exact singularity.

    Cholesky when possible; otherwise an eigenvalue square root with
    eigenvalues below floating-point scale snapped to exact zero, so
    comonotone blocks yield bitwise-identical sample columns.
    """
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    w, q = np.linalg.eigh(sigma)
    if w[0] < -1e-8:
        raise NumericalError(
            f"sigma is not PSD (min eigenvalue {w[0]:.3e}); cannot sample"
        )
    w = np.where(w < 1e-12 * max(1.0, float(w[-1])), 0.0, w)
    a = q * np.sqrt(w)
    a[:, w == 0.0] = 0.0
    return a


def sample(spec: CopulaSpec, n: int, rng: np.random.Generator | None = None) -> SampleMatrix:
    """Draw ``n`` observations from the copula model.

    Parameters
    ----------
    spec : CopulaSpec
    n : int
        Number of rows, >= 2.
    rng : numpy Generator, optional
        Overrides the stream derived from ``spec.seed`` (used by the
        experiment harness for per-replicate streams).

    Returns
    -------
    SampleMatrix
        The population Kendall matrix of the draw is
        ``(2/pi) arcsin(sigma)`` regardless of generator and marginals.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n!r}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed)]))
    a = _psd_factor(spec.sigma.values)
    z = rng.standard_normal((n, spec.d)) @ a.T
    if spec.generator == "student_t":
        w = rng.chisquare(spec.df, size=n)
        z = z / np.sqrt(w / spec.df)[:, None]
    names = spec.column_marginals()
    for j, name in enumerate(names):
        if name != "identity":
            z[:, j] = MARGINAL_TRANSFORMS[name](z[:, j])
    return SampleMatrix(data=z)

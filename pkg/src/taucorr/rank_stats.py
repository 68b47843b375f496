"""Pairwise Kendall rank correlation and the empirical Kendall matrix.

The core statistic for a pair of length-``n`` vectors is

    tau = 2 / (n (n - 1)) * sum_{i < j} sgn(x_i - x_j) * sgn(y_i - y_j),

with ``sgn(0) = 0``, i.e. the untied-pair normalisation is *not* applied:
tied pairs simply contribute zero.  Under this convention the matrix of
pairwise statistics is an average of rank-one outer products
``s_ij s_ij^T`` with ``s_ij = sgn(x^i - x^j)`` and is therefore positive
semi-definite by construction, tied data included.

Two routes to the same number are provided: a quadratic enumeration over
all sample pairs (`kendall_tau_pair_naive`) that serves as the reference
oracle, and an O(n log n) merge-counting implementation
(`kendall_tau_pair_fast`) used by `kendall_tau_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SampleMatrix",
    "KendallMatrix",
    "kendall_tau_pair_naive",
    "kendall_tau_pair_fast",
    "kendall_tau_matrix",
]

# Below this size the inversion counter switches to a vectorised
# quadratic count; recursion overhead dominates for tiny blocks.
_BLOCK = 128


def _validate_vector(v, name: str) -> np.ndarray:
    a = np.asarray(v)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {a.shape}")
    if a.size < 2:
        raise ValueError(f"{name} needs at least two observations, got {a.size}")
    if not np.issubdtype(a.dtype, np.number):
        raise ValueError(f"{name} must be numeric, got dtype {a.dtype}")
    if np.issubdtype(a.dtype, np.inexact) and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class SampleMatrix:
    """An ``n x d`` data matrix, one observation per row.

    Parameters
    ----------
    data : ndarray, shape (n, d)
        Observations.  ``n >= 2`` and all entries finite.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise ValueError(f"sample must be two-dimensional, got shape {a.shape}")
        n, d = a.shape
        if n < 2:
            raise ValueError(f"sample needs at least two rows, got {n}")
        if d < 1:
            raise ValueError("sample needs at least one column")
        if not np.issubdtype(a.dtype, np.number):
            raise ValueError(f"sample must be numeric, got dtype {a.dtype}")
        if np.issubdtype(a.dtype, np.inexact) and not np.all(np.isfinite(a)):
            raise ValueError("sample contains non-finite entries")
        object.__setattr__(self, "data", a)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None):
        return np.asarray(self.data, dtype=dtype)


@dataclass(frozen=True)
class KendallMatrix:
    """A ``d x d`` matrix of pairwise Kendall statistics.

    Attributes
    ----------
    values : ndarray, shape (d, d)
        Symmetric, entries in [-1, 1].  Diagonal entries equal 1 unless a
        column contains duplicated values, in which case they drop below 1
        (tied pairs contribute zero).
    kind : {"empirical", "population"}
        Whether the matrix came from data or from an arcsine transform of
        a population correlation matrix.  Both kinds are positive
        semi-definite up to eigensolver tolerance.
    """

    values: np.ndarray
    kind: str = "empirical"

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"Kendall matrix must be square, got shape {a.shape}")
        if self.kind not in ("empirical", "population"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not np.all(np.isfinite(a)):
            raise ValueError("Kendall matrix contains non-finite entries")
        if not np.array_equal(a, a.T):
            if np.max(np.abs(a - a.T)) > 1e-12:
                raise ValueError("Kendall matrix is not symmetric")
            a = (a + a.T) / 2.0
        if np.max(np.abs(a)) > 1.0 + 1e-12:
            raise ValueError("Kendall matrix entries must lie in [-1, 1]")
        object.__setattr__(self, "values", a)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue (symmetric solver)."""
        return float(np.linalg.eigvalsh(self.values)[0])


def kendall_tau_pair_naive(x, y) -> float:
    """Kendall tau by explicit enumeration of all sample pairs.

    Quadratic in ``n``; intended as the reference oracle against which the
    merge-counting implementation is verified, and for small inputs.

    Parameters
    ----------
    x, y : array_like, shape (n,)
        Paired observations, ``n >= 2``, finite.

    Returns
    -------
    float
        ``2 / (n (n-1)) * sum_{i<j} sgn(x_i - x_j) sgn(y_i - y_j)``.
    """
    xa = _validate_vector(x, "x")
    ya = _validate_vector(y, "y")
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    n = xa.size
    sx = np.sign(xa[:, None] - xa[None, :])
    sy = np.sign(ya[:, None] - ya[None, :])
    numerator = float(np.triu(sx * sy, k=1).sum())
    n0 = n * (n - 1) // 2
    return numerator / float(n0)


def _sorted_with_inversions(a: np.ndarray) -> tuple[np.ndarray, int]:
    """Sort ``a`` and count inversions (pairs i < j with a_i > a_j).

    Merge-count recursion; cross-block inversions are counted with a
    single ``searchsorted`` per merge, so everything stays vectorised.
    Equal elements are never counted as inversions.
    """
    n = a.size
    if n <= _BLOCK:
        gt = a[:, None] > a[None, :]
        inv = int(np.triu(gt, k=1).sum())
        return np.sort(a), inv
    mid = n // 2
    left, inv_left = _sorted_with_inversions(a[:mid])
    right, inv_right = _sorted_with_inversions(a[mid:])
    # For each element of the right half, every strictly larger element of
    # the left half sits at a smaller original index: one inversion each.
    pos = np.searchsorted(left, right, side="right")
    cross = int((left.size - pos).sum())
    merged = np.concatenate((left, right))
    merged.sort(kind="mergesort")
    return merged, inv_left + inv_right + cross


def _tied_pair_count(new_run: np.ndarray, n: int) -> int:
    """Sum of m*(m-1)/2 over runs delimited by the boolean change mask."""
    boundaries = np.flatnonzero(new_run)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries + 1, [n]))
    m = ends - starts
    return int((m * (m - 1) // 2).sum())


def kendall_tau_pair_fast(x, y) -> float:
    """Kendall tau in O(n log n) via merge counting.

    The sample is sorted lexicographically by ``(x, y)``; discordant pairs
    are exactly the inversions of the reordered ``y`` sequence, and tied
    pairs are counted from run lengths.  With ``n0 = n(n-1)/2``, ``v`` the
    pairs tied in ``x``, ``u`` the pairs tied in ``y`` and ``t`` the pairs
    tied in both,

        C - D = n0 - u - v + t - 2 * D,

    and tau is ``(C - D) / n0``.  All counts are integers, so the result
    matches `kendall_tau_pair_naive` exactly.

    Parameters
    ----------
    x, y : array_like, shape (n,)
        Paired observations, ``n >= 2``, finite.

    Returns
    -------
    float
    """
    xa = _validate_vector(x, "x")
    ya = _validate_vector(y, "y")
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    n = xa.size
    order = np.lexsort((ya, xa))
    xs = xa[order]
    ys = ya[order]

    x_change = np.diff(xs) != 0
    v = _tied_pair_count(x_change, n)
    t = _tied_pair_count(x_change | (np.diff(ys) != 0), n)
    u = _tied_pair_count(np.diff(np.sort(ya)) != 0, n)

    _, discordant = _sorted_with_inversions(ys)

    n0 = n * (n - 1) // 2
    numerator = n0 - u - v + t - 2 * discordant
    return numerator / float(n0)


def _tau_self(x: np.ndarray) -> float:
    """tau(x, x): every untied pair is concordant, so (n0 - v) / n0."""
    n = x.size
    n0 = n * (n - 1) // 2
    v = _tied_pair_count(np.diff(np.sort(x)) != 0, n)
    return (n0 - v) / float(n0)


def kendall_tau_matrix(sample) -> KendallMatrix:
    """Empirical Kendall matrix of an ``n x d`` sample.

    Entry ``(k, l)`` is `kendall_tau_pair_fast` applied to columns ``k``
    and ``l``; each unordered pair is computed once and mirrored, so the
    output is exactly symmetric.  Diagonal entries are computed under the
    same tie convention and equal 1 precisely when the column has no
    duplicated values.

    Parameters
    ----------
    sample : SampleMatrix or array_like, shape (n, d)

    Returns
    -------
    KendallMatrix
        With ``kind="empirical"``.  Positive semi-definite by
        construction (it is an average of outer products of sign
        vectors), up to eigensolver tolerance.
    """
    if not isinstance(sample, SampleMatrix):
        sample = SampleMatrix(np.asarray(sample))
    X = sample.data
    d = sample.d
    T = np.empty((d, d), dtype=np.float64)
    for k in range(d):
        T[k, k] = _tau_self(X[:, k])
        for l in range(k + 1, d):
            T[k, l] = T[l, k] = kendall_tau_pair_fast(X[:, k], X[:, l])
    return KendallMatrix(values=T, kind="empirical")

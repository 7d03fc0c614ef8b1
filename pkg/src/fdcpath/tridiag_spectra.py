"""Eigenvalues and eigenvectors of symmetric tridiagonal matrices.

Eigenvalues come from bisection on Sturm counts inside the Gershgorin
interval; eigenvectors from shifted inverse iteration. No dense
eigensolver is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .path_model import TridiagonalMatrix, check_node_count, weight_matrix

DEFAULT_TOL = 1e-12
# as a bisection tolerance: refine until brackets stop shrinking in float64
MACHINE_TOL = float(np.finfo(np.float64).tiny)
SHIFT_PERTURBATION = 1e-12
MAX_INVERSE_ITERS = 50

# eigenvalues closer than this (relative to ||T||) share an invariant subspace
# and get their inverse-iteration vectors orthogonalized against each other
CLUSTER_GAP = 1e-3

_START_SEED = 0x5EED


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    eigenvalues: np.ndarray
    slem: float

    @property
    def second(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def smallest(self) -> float:
        return float(self.eigenvalues[-1])


def _parts(T: TridiagonalMatrix):
    d = np.ascontiguousarray(T.diag)
    e = np.ascontiguousarray(T.offdiag)
    return d, e, e * e


def gershgorin_bounds(T: TridiagonalMatrix) -> tuple[float, float]:
    """Interval guaranteed to contain the whole spectrum of ``T``.

    The raw Gershgorin disc union is widened by a round-off margin so the
    Sturm count is exactly 0 at the lower end and n at the upper end.
    """
    d, e, e2 = _parts(T)
    lo, hi = _kernels.gershgorin(d, e, _kernels.pivot_floor(e2))
    return float(lo), float(hi)


def char_poly_sturm(T: TridiagonalMatrix, x: float) -> tuple[float, int]:
    """Characteristic polynomial value det(T - xI) and the Sturm count at ``x``.

    The count is the number of eigenvalues strictly less than ``x``. The
    polynomial is evaluated with a rescaled three-term recurrence, so it only
    overflows when the determinant itself lies outside the float64 range.
    """
    d, _, e2 = _parts(T)
    x = float(x)
    mantissa, expo = _kernels.char_poly(d, e2, x)
    try:
        value = math.ldexp(mantissa, expo)
    except OverflowError:
        value = math.copysign(math.inf, mantissa)
    count = int(_kernels.sturm_count(d, e2, x, _kernels.pivot_floor(e2)))
    return value, count


def _bisect(T: TridiagonalMatrix, ks, tol) -> np.ndarray:
    if not tol > 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    d, _, e2 = _parts(T)
    lo, hi = gershgorin_bounds(T)
    ks = np.asarray(ks, dtype=np.int64)
    return _kernels.bisect_eigenvalues(d, e2, ks, lo, hi, float(tol), _kernels.pivot_floor(e2))


def _slem_of(desc: np.ndarray) -> float:
    if desc.size < 2:
        raise ValidationError("SLEM needs at least two eigenvalues")
    return float(max(desc[1], -desc[-1]))


def eigenvalues(T: TridiagonalMatrix, tol=DEFAULT_TOL) -> SpectralSummary:
    """All eigenvalues, sorted descending, each bracketed to width ``tol``."""
    asc = _bisect(T, np.arange(T.n), tol)
    # brackets are independent, so round-off can invert a near-tie; sort
    desc = np.sort(asc)[::-1].copy()
    desc.setflags(write=False)
    return SpectralSummary(desc, _slem_of(desc) if T.n >= 2 else float("nan"))


def selected_eigenvalues(T: TridiagonalMatrix, positions, tol=DEFAULT_TOL) -> np.ndarray:
    """Eigenvalues at the given 0-based positions of the descending order."""
    positions = np.asarray(positions, dtype=np.int64)
    if np.any(positions < 0) or np.any(positions >= T.n):
        raise ValidationError(f"eigenvalue positions must lie in 0..{T.n - 1}")
    return _bisect(T, T.n - 1 - positions, tol)


def slem_pair(n, w, tol=DEFAULT_TOL) -> tuple[float, float]:
    """Second-largest and smallest eigenvalue of the weight matrix."""
    n = check_node_count(n)
    T = weight_matrix(n, w)
    lam2, lamn = selected_eigenvalues(T, [1, n - 1], tol)
    return float(lam2), float(lamn)


def slem(n, w, tol=DEFAULT_TOL) -> float:
    lam2, lamn = slem_pair(n, w, tol)
    return max(lam2, -lamn)


def uniform_spectrum(n) -> np.ndarray:
    """Spectrum of the weight matrix with every weight 1/2, descending."""
    n = check_node_count(n)
    return np.cos(np.arange(n) * np.pi / n)


def _start_vector(n, rng=None) -> np.ndarray:
    rng = np.random.default_rng(_START_SEED) if rng is None else rng
    return rng.uniform(-1.0, 1.0, n)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    return -v if v[k] < 0 else v


def eigenvector(T: TridiagonalMatrix, lam: float, tol=DEFAULT_TOL, rng=None) -> np.ndarray:
    """Unit eigenvector for an eigenvalue ``lam`` known to within ``tol``.

    The sign is fixed so that the largest-magnitude entry is positive.
    Raises NumericalError if the residual ||Tv - lam v|| has not dropped to
    ``100 * tol * ||T||`` after the iteration budget (``tol`` is floored at
    machine epsilon for this test).
    """
    return _eigvec(T, lam, tol, np.zeros((T.n, 0)), rng)


def _eigvec(T, lam, tol, against, rng):
    d, e, e2 = _parts(T)
    scale = max(T.norm_bound(), np.finfo(float).tiny)
    target = 100.0 * max(tol, np.finfo(float).eps) * scale
    shift = float(lam) + SHIFT_PERTURBATION * max(scale, 1.0)
    v, res, _ = _kernels.inverse_iteration(
        d, e, float(lam), shift, _start_vector(T.n, rng),
        np.ascontiguousarray(against), MAX_INVERSE_ITERS, target,
        _kernels.pivot_floor(e2),
    )
    if not res <= target:
        raise NumericalError(
            f"inverse iteration did not converge for eigenvalue {lam!r}: "
            f"residual {res:.3e} > {target:.3e}",
            residual=res,
        )
    return _canonical_sign(v)


def eigenpairs(T: TridiagonalMatrix, tol=DEFAULT_TOL, rng=None):
    """Full eigensystem: descending eigenvalues and matching unit eigenvectors
    as the columns of an ``n x n`` matrix.

    Vectors inside a cluster of close eigenvalues are orthogonalized against
    the cluster members already computed.
    """
    vals = eigenvalues(T, tol).eigenvalues
    n = T.n
    vecs = np.zeros((n, n))
    gap = CLUSTER_GAP * max(T.norm_bound(), 1.0)
    start = 0
    for k in range(n):
        if k > 0 and vals[k - 1] - vals[k] > gap:
            start = k
        vecs[:, k] = _eigvec(T, vals[k], tol, vecs[:, start:k], rng)
    return vals, vecs

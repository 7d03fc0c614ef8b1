"""Path networks, per-edge weights and the two weight-matrix constructions.

Nodes are numbered ``1..n`` and edge ``i`` joins nodes ``i`` and ``i + 1``.
Public functions that take an edge index use the same 1-based numbering;
arrays are ordinary 0-based numpy arrays.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ValidationError

INV_SQRT2 = math.sqrt(0.5)

# off-tridiagonal entries of the dense expansion must vanish to this level
TRIDIAGONAL_TOL = 1e-14


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def check_node_count(n) -> int:
    if isinstance(n, PathNetwork):
        return n.n
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ValidationError(f"node count must be an integer, got {n!r}")
    if n < 2:
        raise ValidationError(f"a path network needs n >= 2 nodes, got {n}")
    return int(n)


@dataclass(frozen=True)
class PathNetwork:
    n: int

    def __post_init__(self):
        check_node_count(self.n)

    @property
    def num_edges(self) -> int:
        return self.n - 1

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, i + 1) for i in range(1, self.n))


@dataclass(frozen=True, eq=False)
class WeightAssignment:
    """Edge weights ``w[i]`` for edge ``(i+1, i+2)`` (0-based storage)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise ValidationError("weight vector is empty")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("weights must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size + 1

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, WeightAssignment):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    @classmethod
    def uniform(cls, n, value=0.5) -> "WeightAssignment":
        n = check_node_count(n)
        return cls(np.full(n - 1, float(value)))


def as_weights(w, n=None) -> np.ndarray:
    """Validate ``w`` and return it as a float64 array of length ``n - 1``."""
    if isinstance(w, WeightAssignment):
        arr = w.values
    else:
        if np.isscalar(w):
            w = [w]
        arr = WeightAssignment(w).values
    if n is not None:
        n = check_node_count(n)
        if arr.size != n - 1:
            raise ValidationError(
                f"expected {n - 1} weights for a path with {n} nodes, got {arr.size}"
            )
    return arr


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix stored as its diagonal and one off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = _frozen(self.diag).reshape(-1)
        e = _frozen(self.offdiag).reshape(-1)
        if d.size < 1 or e.size != d.size - 1:
            raise ValidationError(
                f"need len(offdiag) == len(diag) - 1, got {d.size} and {e.size}"
            )
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def trace(self) -> float:
        return float(self.diag.sum())

    def norm_bound(self) -> float:
        """Maximum absolute row sum; an upper bound on the spectral norm."""
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.offdiag)
        row[1:] += np.abs(self.offdiag)
        return float(row.max())

    def leading(self, k) -> "TridiagonalMatrix":
        """Leading ``k x k`` principal submatrix."""
        return TridiagonalMatrix(self.diag[:k], self.offdiag[: k - 1])

    @classmethod
    def from_dense(cls, A, tol=TRIDIAGONAL_TOL) -> "TridiagonalMatrix":
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {A.shape}")
        outside = np.triu(A, 2)
        asym = np.abs(np.diag(A, 1) - np.diag(A, -1))
        residual = max(
            float(np.abs(outside).max(initial=0.0)),
            float(np.abs(np.tril(A, -2)).max(initial=0.0)),
            float(asym.max(initial=0.0)),
        )
        if residual > tol:
            raise ConsistencyError(
                f"matrix is not symmetric tridiagonal (residual {residual:.3e})", residual
            )
        return cls(np.diag(A).copy(), np.diag(A, 1).copy())


def build_path(n) -> PathNetwork:
    return PathNetwork(check_node_count(n))


def weight_matrix(net, w) -> TridiagonalMatrix:
    """Weight matrix with off-diagonal ``w`` and rows summing to one."""
    n = check_node_count(net)
    w = as_weights(w, n)
    diag = np.ones(n)
    diag[:-1] -= w
    diag[1:] -= w
    return TridiagonalMatrix(diag, w)


def basis_vector(n, i) -> np.ndarray:
    """Edge-difference unit vector of edge ``i`` (1-based)."""
    n = check_node_count(n)
    if isinstance(i, bool) or not isinstance(i, numbers.Integral) or not 1 <= i <= n - 1:
        raise ValidationError(f"edge index must lie in 1..{n - 1}, got {i!r}")
    v = np.zeros(n)
    v[i - 1] = INV_SQRT2
    v[i] = -INV_SQRT2
    return v


def basis_matrix(n) -> np.ndarray:
    """``n x (n-1)`` matrix whose columns are the edge basis vectors."""
    n = check_node_count(n)
    A = np.zeros((n, n - 1))
    idx = np.arange(n - 1)
    A[idx, idx] = INV_SQRT2
    A[idx + 1, idx] = -INV_SQRT2
    return A


def edge_projections(z) -> np.ndarray:
    """Inner products of ``z`` with every edge basis vector, in O(n)."""
    z = np.asarray(z, dtype=np.float64)
    return (z[:-1] - z[1:]) * INV_SQRT2


def matrix_from_expansion(n, w) -> TridiagonalMatrix:
    """Identity minus the rank-one edge terms ``2 w_i a_i a_i^T``, built densely."""
    n = check_node_count(n)
    w = as_weights(w, n)
    A = basis_matrix(n)
    dense = np.eye(n) - (A * (2.0 * w)) @ A.T
    return TridiagonalMatrix.from_dense(dense)


def gram_matrix(n) -> np.ndarray:
    A = basis_matrix(n)
    return A.T @ A

"""Standard-form SDP data for the path consensus problem.

The primal variable is ``x = (2 w_1, ..., 2 w_{n-1}, s)`` and the constraint
``F(x) = F0 + sum_i x_i F_i`` is PSD. ``kron(SIGMA_Z, A)`` is the block
diagonal ``(A, -A)``, so ``F(x)`` splits into the two n x n LMI blocks
returned by :func:`lmi_blocks`.

Dense 2n x 2n matrices are only built up to ``DENSE_LIMIT`` nodes; the
factored helpers below cover larger n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .path_model import basis_matrix, check_node_count, as_weights, weight_matrix

SIGMA_Z = np.diag([1.0, -1.0])
DENSE_LIMIT = 64


@dataclass(frozen=True, eq=False)
class SdpInstance:
    n: int
    F0: np.ndarray
    F: tuple
    c: np.ndarray

    def F_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValidationError(f"x must have length {self.n}, got shape {x.shape}")
        return self.F0 + np.tensordot(x, np.stack(self.F), axes=1)

    def dual_constraints(self, Z) -> np.ndarray:
        """Tr[F_i Z] for i = 1..n."""
        Z = np.asarray(Z, dtype=np.float64)
        return np.array([np.sum(Fi * Z) for Fi in self.F])


def _centering(n) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def build_sdp_instance(n) -> SdpInstance:
    n = check_node_count(n)
    if n > DENSE_LIMIT:
        raise ValidationError(
            f"dense SDP data is only materialized for n <= {DENSE_LIMIT}; "
            "use the factored helpers for larger paths"
        )
    A = basis_matrix(n)
    F0 = -np.kron(SIGMA_Z, _centering(n))
    F = [np.kron(SIGMA_Z, np.outer(A[:, i], A[:, i])) for i in range(n - 1)]
    F.append(np.eye(2 * n))
    c = np.zeros(n)
    c[-1] = 1.0
    for M in (F0, *F, c):
        M.setflags(write=False)
    return SdpInstance(n, F0, tuple(F), c)


def assemble_x(w, s) -> np.ndarray:
    w = as_weights(w)
    return np.append(2.0 * w, float(s))


def split_x(x) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64)
    return x[:-1] / 2.0, float(x[-1])


def lmi_blocks(n, w, s) -> tuple[np.ndarray, np.ndarray]:
    """The two n x n diagonal blocks of F(x): ``sI + J/n - W`` and ``sI - J/n + W``."""
    n = check_node_count(n)
    W = weight_matrix(n, w).to_dense()
    J = np.full((n, n), 1.0 / n)
    sI = float(s) * np.eye(n)
    return sI + J - W, sI - J + W


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    upper_min: float
    lower_min: float

    @property
    def margin(self) -> float:
        return min(self.upper_min, self.lower_min)

    def __bool__(self):
        return self.feasible


def primal_feasible(n, w, s, tol=1e-12) -> FeasibilityReport:
    """Check ``-sI <= W - J/n <= sI`` through the smallest eigenvalue of each block."""
    if not tol >= 0:
        raise ValidationError(f"tolerance must be non-negative, got {tol}")
    upper, lower = lmi_blocks(n, w, s)
    # dense symmetric eigensolver: kept independent of the Sturm bisection path
    up = float(np.linalg.eigvalsh(upper)[0])
    lo = float(np.linalg.eigvalsh(lower)[0])
    return FeasibilityReport(up >= -tol and lo >= -tol, up, lo)


def minimal_feasible_s(n, w, tol=1e-12, precision=1e-12) -> float:
    """Smallest s passing :func:`primal_feasible`, by bisection on s."""
    lo, hi = 0.0, 1.0
    while not primal_feasible(n, w, hi, tol):
        lo, hi = hi, 2.0 * hi
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if primal_feasible(n, w, mid, tol):
            hi = mid
        else:
            lo = mid
    return hi


def dual_matrix(z1, z2) -> np.ndarray:
    """Rank-one dual variable ``[z1; z2][z1; z2]^T``."""
    z = np.concatenate([np.asarray(z1, float), np.asarray(z2, float)])
    return np.outer(z, z)


def duality_gap(instance: SdpInstance, x, Z) -> float:
    """Primal minus dual objective: ``c^T x + Tr[F0 Z]``."""
    x = np.asarray(x, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    m = 2 * instance.n
    if x.shape != (instance.n,) or Z.shape != (m, m):
        raise ValidationError(
            f"shape mismatch: x {x.shape}, Z {Z.shape} for n={instance.n}"
        )
    return float(instance.c @ x + np.sum(instance.F0 * Z))


def duality_gap_factored(x, z1, z2) -> float:
    """:func:`duality_gap` for rank-one ``Z`` without building any 2n x 2n matrix."""
    x = np.asarray(x, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    n = z1.size

    def centered_sq(z):
        return float(z @ z - z.sum() ** 2 / n)

    return float(x[-1] - centered_sq(z1) + centered_sq(z2))


def dual_constraints_factored(z1, z2) -> np.ndarray:
    """Tr[F_i Z] for rank-one ``Z``: edge-projection differences, then the norm."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    p1 = (z1[:-1] - z1[1:]) ** 2 / 2.0
    p2 = (z2[:-1] - z2[1:]) ** 2 / 2.0
    return np.append(p1 - p2, z1 @ z1 + z2 @ z2)

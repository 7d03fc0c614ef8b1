"""Closed-form dual certificate for uniform weights and its verification.

With ``theta = pi/n`` and ``s = cos(theta)`` the dual vectors are expanded in
the edge basis, ``z1 = sum_i a_i alpha_i`` and ``z2 = sum_i a'_i alpha_i``, with

    a_i  = sin(i theta) / sin(theta) * (1 + cos theta) / sqrt(n)
    a'_i = sin(i (pi - theta)) / sin(pi - theta) * (1 - cos theta) / sqrt(n)

The leading coefficients are the square roots of ``(1 +- cos theta)^2 / n``.
Only with the square root do the two vectors satisfy the normalization
``|z1|^2 + |z2|^2 = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ValidationError
from .path_model import (
    as_weights,
    basis_matrix,
    check_node_count,
    edge_projections,
    gram_matrix,
    weight_matrix,
)
from .sdp_forms import (
    DENSE_LIMIT,
    assemble_x,
    build_sdp_instance,
    dual_matrix,
    duality_gap,
    duality_gap_factored,
)

BUILD_TOL = 1e-12

RESIDUAL_NAMES = (
    "slack_upper",
    "slack_lower",
    "dual_feas_max",
    "normalization",
    "orthogonality",
    "strong_duality",
    "gap",
)


def default_tolerance(n) -> float:
    """Round-off budget for an n-node certificate: one rounding per row."""
    return 1e-12 * n


def leading_coordinates(n) -> tuple[float, float]:
    n = check_node_count(n)
    c = math.cos(math.pi / n)
    return (1.0 + c) / math.sqrt(n), (1.0 - c) / math.sqrt(n)


def certificate_coordinates(n, leading=None) -> tuple[np.ndarray, np.ndarray]:
    """Basis coordinates ``(a, a')`` of ``z1`` and ``z2``.

    ``leading`` overrides ``(a_1, a'_1)``; the recurrence in the index is
    unchanged.
    """
    n = check_node_count(n)
    theta = math.pi / n
    a1, a1p = leading_coordinates(n) if leading is None else map(float, leading)
    i = np.arange(1, n)
    a = np.sin(i * theta) / math.sin(theta) * a1
    phi = math.pi - theta
    a_prime = np.sin(i * phi) / math.sin(phi) * a1p
    return a, a_prime


@dataclass(frozen=True, eq=False)
class DualCertificate:
    n: int
    theta: float
    s: float
    a: np.ndarray
    a_prime: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    def Z(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValidationError(
                f"Z is only materialized for n <= {DENSE_LIMIT}, got n={self.n}"
            )
        return dual_matrix(self.z1, self.z2)

    def quadratic_form(self, v1, v2) -> float:
        """``[v1; v2]^T Z [v1; v2]`` from the factors; never negative."""
        return float((self.z1 @ v1 + self.z2 @ v2) ** 2)


def _invariant_residuals(cert: DualCertificate) -> dict:
    s = cert.s
    return {
        "norm_z1": abs(cert.z1 @ cert.z1 - (1.0 + s) / 2.0),
        "norm_z2": abs(cert.z2 @ cert.z2 - (1.0 - s) / 2.0),
        "sum_z1": abs(cert.z1.sum()),
        "sum_z2": abs(cert.z2.sum()),
    }


def build_certificate(n, leading=None, check=True) -> DualCertificate:
    """Assemble the certificate; with ``check`` the norm and zero-sum invariants
    are enforced to ``BUILD_TOL`` and a violation raises ConsistencyError."""
    n = check_node_count(n)
    theta = math.pi / n
    a, a_prime = certificate_coordinates(n, leading)
    A = basis_matrix(n) if n <= DENSE_LIMIT else None
    if A is not None:
        z1, z2 = A @ a, A @ a_prime
    else:
        z1, z2 = _expand(a), _expand(a_prime)
    for arr in (a, a_prime, z1, z2):
        arr.setflags(write=False)
    cert = DualCertificate(n, theta, math.cos(theta), a, a_prime, z1, z2)
    if check:
        bad = {k: v for k, v in _invariant_residuals(cert).items() if not v <= BUILD_TOL}
        if bad:
            name, value = max(bad.items(), key=lambda kv: kv[1])
            raise ConsistencyError(
                f"certificate invariant {name} violated at n={n}: residual {value:.3e}",
                residual=value,
            )
    return cert


def _expand(coords) -> np.ndarray:
    # sum_i c_i alpha_i, entry j is (c_j - c_{j-1}) / sqrt(2)
    padded = np.concatenate([[0.0], coords, [0.0]])
    return np.diff(padded) * math.sqrt(0.5)


@dataclass(frozen=True)
class CertificateReport:
    residuals: dict
    tolerances: dict
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = all(self.residuals[k] <= self.tolerances[k] for k in self.residuals)
        object.__setattr__(self, "passed", bool(ok))

    def failures(self) -> list[str]:
        return [k for k in self.residuals if not self.residuals[k] <= self.tolerances[k]]


def certificate_residuals(cert: DualCertificate, w) -> dict:
    """Residual of every optimality condition for the primal point ``(w, cert.s)``."""
    n = cert.n
    w = as_weights(w, n)
    W = weight_matrix(n, w)
    s = cert.s
    z1, z2 = cert.z1, cert.z2
    # (sI + J/n - W) z1 and (sI - J/n + W) z2 in O(n)
    upper = s * z1 + z1.sum() / n - W.matvec(z1)
    lower = s * z2 - z2.sum() / n + W.matvec(z2)
    p1 = edge_projections(z1)
    p2 = edge_projections(z2)
    n1, n2 = float(z1 @ z1), float(z2 @ z2)
    x = assemble_x(w, s)
    if n <= DENSE_LIMIT:
        gap = duality_gap(build_sdp_instance(n), x, cert.Z())
    else:
        gap = duality_gap_factored(x, z1, z2)
    return {
        "slack_upper": float(np.abs(upper).max()),
        "slack_lower": float(np.abs(lower).max()),
        "dual_feas_max": float(np.abs(p1**2 - p2**2).max()),
        "normalization": abs(n1 + n2 - 1.0),
        "orthogonality": max(abs(float(z1.sum())), abs(float(z2.sum()))),
        "strong_duality": abs(s - (n1 - n2)),
        "gap": abs(gap),
    }


def verify_certificate(cert: DualCertificate, w, tol=None) -> CertificateReport:
    """Check complementary slackness, dual feasibility, orthogonality to the
    all-ones vector and zero duality gap. Failures are reported, not raised.

    ``tol`` applies to every condition; by default it is
    :func:`default_tolerance` of ``n``.
    """
    residuals = certificate_residuals(cert, w)
    t = default_tolerance(cert.n) if tol is None else float(tol)
    if not t >= 0:
        raise ValidationError(f"tolerance must be non-negative, got {tol}")
    return CertificateReport(residuals, {k: t for k in residuals})


def slackness_recurrence_residuals(n) -> dict:
    """Residuals of the coordinate recurrences at the uniform optimum.

    ``boundary``/``interior`` are the first, last and middle rows of
    ``(1 -+ s - 2w_i) a_i = -w_i (a_{i-1} + a_{i+1})`` for both coordinate
    sets; ``projection`` checks ``(1 -+ s) a_i = 2 w_i alpha_i^T z`` with the
    projections taken through the Gram matrix.
    """
    n = check_node_count(n)
    if n < 3:
        raise ValidationError(f"the recurrence check needs n >= 3, got {n}")
    s = math.cos(math.pi / n)
    w = np.full(n - 1, 0.5)
    a, ap = certificate_coordinates(n)
    out = {}
    for tag, coords, sign in (("", a, -1.0), ("_prime", ap, 1.0)):
        diag_coef = sign * s + 1.0 - 2.0 * w
        lhs = diag_coef * coords
        nb = np.zeros_like(coords)
        nb[1:] += coords[:-1]
        nb[:-1] += coords[1:]
        rhs = -w * nb
        r = np.abs(lhs - rhs)
        out["boundary" + tag] = float(max(r[0], r[-1]))
        out["interior" + tag] = float(r[1:-1].max(initial=0.0))
        proj = gram_matrix(n) @ coords
        out["projection" + tag] = float(np.abs((sign * s + 1.0) * coords - 2.0 * w * proj).max())
    return out


def slackness_recurrence_check(n, tol=1e-12) -> bool:
    return all(v <= tol for v in slackness_recurrence_residuals(n).values())

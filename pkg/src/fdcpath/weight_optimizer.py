"""Numerical minimization of the SLEM over path edge weights.

``optimize_weights`` runs two phases:

1. Subgradient descent with step ``step_scale / sqrt(k)``, keeping the best
   iterate. It stops early once zero lies in the convex hull of the two
   branch gradients.
2. A second-order polish. Damped Newton first minimizes the smooth convex
   surrogate ``sum_k lambda_k^p`` (consensus eigenvalue excluded) for
   ``p = 2, 4, ..., 64``, each solve warm-started from the last. Newton on
   the optimality conditions of the two active branches ``lambda_2`` and
   ``-lambda_n`` then converges quadratically from there.

Phase 1 alone gets the SLEM close to optimal but leaves weights near the
path ends far from their optimum, because the objective barely depends on
them. Phase 2 is what pins the weights down.

``grid_oracle`` is an exhaustive search for tiny paths that uses a dense
eigensolver, so it shares no code with the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NumericalError, ValidationError
from .path_model import WeightAssignment, as_weights, check_node_count, edge_projections, weight_matrix
from .tridiag_spectra import (
    DEFAULT_TOL,
    MACHINE_TOL,
    MAX_INVERSE_ITERS,
    SHIFT_PERTURBATION,
    eigenpairs,
    eigenvalues,
    slem,
)

# both branches count as active when lambda_2 and -lambda_n differ by less
TIE_GAP = 1e-8
# zero-in-hull test for early stopping of the subgradient phase; eigenvalues
# bracketed to 1e-12 perturb the branch gradients by up to ~1e-10 at n = 50
STATIONARY_TOL = 1e-9

# powers 2, 4, ..., SMOOTH_MAX_POWER of the surrogate before the KKT polish
SMOOTH_MAX_POWER = 64
SMOOTH_MAX_ITERS = 30
# relative Newton decrement at which a surrogate solve counts as done
SMOOTH_TOL = 1e-10
MAX_REFINE_ITERS = 50
KKT_TOL = 1e-14
GRID_MAX_CELLS = 200
GRID_CHUNK = 65536


@dataclass(frozen=True)
class OptimizerParams:
    max_iters: int = 20000
    step_scale: float = 0.1
    eig_tol: float = DEFAULT_TOL
    seed: int = 0
    refine: bool = True

    def __post_init__(self):
        if isinstance(self.max_iters, bool) or int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not self.step_scale > 0 or not math.isfinite(self.step_scale):
            raise ValidationError(f"step_scale must be positive, got {self.step_scale!r}")
        if not self.eig_tol > 0:
            raise ValidationError(f"eig_tol must be positive, got {self.eig_tol!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")


@dataclass(frozen=True)
class OptimizationResult:
    weights: WeightAssignment
    slem: float
    iterations: int
    history: tuple = field(repr=False)
    subgradient_iterations: int = 0
    refine_iterations: int = 0


def closed_form_weights(n) -> tuple[WeightAssignment, float]:
    """Optimal weights (all 1/2) and optimal SLEM ``cos(pi/n)``."""
    n = check_node_count(n)
    return WeightAssignment.uniform(n, 0.5), math.cos(math.pi / n)


@dataclass
class _Branches:
    lam2: float
    lamn: float
    g_second: np.ndarray
    g_smallest: np.ndarray

    @property
    def value(self) -> float:
        return max(self.lam2, -self.lamn)

    @property
    def tied(self) -> bool:
        return abs(self.lam2 + self.lamn) <= TIE_GAP

    def subgradient(self) -> np.ndarray:
        if self.tied:
            return 0.5 * (self.g_second + self.g_smallest)
        return self.g_second if self.lam2 > -self.lamn else self.g_smallest

    def hull_distance(self) -> float:
        """Distance from zero to the segment between the two branch gradients."""
        a, b = self.g_second, self.g_smallest
        diff = a - b
        dd = float(diff @ diff)
        t = 0.0 if dd == 0.0 else min(1.0, max(0.0, -float(b @ diff) / dd))
        return float(np.linalg.norm(t * a + (1.0 - t) * b))


def _branches(w: np.ndarray, tol: float, start: np.ndarray) -> _Branches:
    lam2, lamn, u, v, res, target = _kernels.slem_branches(
        w, float(tol), start, SHIFT_PERTURBATION, MAX_INVERSE_ITERS
    )
    if not res <= target:
        raise NumericalError(
            f"eigenvector for the SLEM branches did not converge (residual {res:.3e})",
            residual=res,
        )
    # d lambda / d w_i = -2 (alpha_i^T u)^2 since dW/dw_i = -2 alpha_i alpha_i^T
    return _Branches(
        float(lam2),
        float(lamn),
        -2.0 * edge_projections(u) ** 2,
        2.0 * edge_projections(v) ** 2,
    )


def _start_vector(n, seed) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, n)


def slem_subgradient(n, w, tol=DEFAULT_TOL, branch=None, seed=0) -> np.ndarray:
    """A subgradient of the SLEM at ``w``.

    ``branch`` forces the ``"second"`` (lambda_2) or ``"smallest"`` (-lambda_n)
    branch gradient; by default the active branch is used, and the midpoint
    of both when they tie to within ``TIE_GAP``.
    """
    n = check_node_count(n)
    w = as_weights(w, n)
    b = _branches(np.ascontiguousarray(w), tol, _start_vector(n, seed))
    if branch is None:
        return b.subgradient()
    if branch == "second":
        return b.g_second
    if branch == "smallest":
        return b.g_smallest
    raise ValidationError(f"branch must be None, 'second' or 'smallest', got {branch!r}")


def optimize_weights(n, init, params: OptimizerParams | None = None) -> OptimizationResult:
    n = check_node_count(n)
    params = OptimizerParams() if params is None else params
    w = np.array(as_weights(init, n))
    start = _start_vector(n, params.seed)

    best_w = w.copy()
    best_f = math.inf
    history = []
    k = 0
    for k in range(1, params.max_iters + 1):
        b = _branches(w, params.eig_tol, start)
        f = b.value
        if f < best_f:
            best_f, best_w = f, w.copy()
        history.append((k, best_f))
        if b.tied and b.hull_distance() <= STATIONARY_TOL:
            break
        g = b.subgradient()
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            break
        w = w - (params.step_scale / math.sqrt(k) / gnorm) * g
    sub_iters = k

    refine_iters = 0
    if params.refine:
        best_w, refine_iters = _refine(best_w, history, sub_iters)

    weights = WeightAssignment(best_w)
    return OptimizationResult(
        weights=weights,
        slem=slem(n, weights, params.eig_tol),
        iterations=sub_iters + refine_iters,
        history=tuple(history),
        subgradient_iterations=sub_iters,
        refine_iterations=refine_iters,
    )


def _exact_slem(w) -> float:
    return slem(w.size + 1, w, MACHINE_TOL)


def _branch_models(w):
    """Values, gradients and Hessians of lambda_2 and -lambda_n at ``w``."""
    n = w.size + 1
    vals, vecs = eigenpairs(weight_matrix(n, w), MACHINE_TOL)
    D = (vecs[:-1, :] - vecs[1:, :]) * math.sqrt(0.5)

    def model(k, sign):
        g = -2.0 * D[:, k] ** 2
        gaps = vals[k] - vals
        gaps[k] = np.inf
        gaps[gaps == 0.0] = np.inf
        C = -2.0 * D[:, [k]] * D  # column m: coupling of branch k with eigenpair m
        H = 2.0 * (C / gaps) @ C.T
        return sign * vals[k], sign * g, sign * 0.5 * (H + H.T)

    return model(1, 1.0), model(n - 1, -1.0)


def _refine(w, history, offset):
    """Second-order polish of the phase-1 point; returns (weights, iterations)."""
    f_start = _exact_slem(w)
    cand = w
    iters = 0
    p = 2
    while p <= SMOOTH_MAX_POWER:
        cand, k = _power_newton(cand, p)
        iters += k
        p *= 2
    cand, k = _kkt_newton(cand)
    iters += k
    f_cand = _exact_slem(cand)
    # never hand back something worse than the subgradient phase found
    if not f_cand <= f_start + 8 * np.finfo(float).eps:
        return w, iters
    history.append((offset + iters, min(history[-1][1], f_cand) if history else f_cand))
    return cand, iters


def _spectral_parts(w):
    n = w.size + 1
    vals, vecs = eigenpairs(weight_matrix(n, w), DEFAULT_TOL)
    consensus = int(np.argmax(np.abs(vecs.sum(axis=0))))
    return vals, edge_projections(vecs), consensus


def _power_model(w, p, scale):
    """Value, gradient and Hessian of sum_k (lambda_k / scale)^p over every
    eigenvalue except the consensus one. Convex in w for even p."""
    vals, D, consensus = _spectral_parts(w)
    x = vals / scale
    x[consensus] = 0.0
    ax = np.abs(x)
    h0 = ax**p
    h1 = p * np.sign(x) * ax ** (p - 1) / scale
    h2 = p * (p - 1) * ax ** (p - 2) / scale**2
    J = -2.0 * D**2  # column k: gradient of lambda_k
    grad = J @ h1
    # Daleckii-Krein: first divided differences of h' couple eigenpairs k, m
    gaps = vals[:, None] - vals[None, :]
    close = np.abs(gaps) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (h1[:, None] - h1[None, :]) / gaps
    dd[close] = (0.5 * (h2[:, None] + h2[None, :]))[close]
    np.fill_diagonal(dd, 0.0)
    E = (D[:, :, None] * D[:, None, :]).reshape(D.shape[0], -1)
    H = (J * h2) @ J.T + 4.0 * (E * dd.ravel()) @ E.T
    return float(h0.sum()), grad, H


def _power_value(w, p, scale) -> float:
    vals = eigenvalues(weight_matrix(w.size + 1, w), DEFAULT_TOL).eigenvalues
    # the consensus eigenvalue is 1; drop one copy of the closest value
    x = np.delete(vals, int(np.argmin(np.abs(vals - 1.0)))) / scale
    return float(np.sum(np.abs(x) ** p))


def _power_newton(w, p):
    """Damped Newton on the power-sum surrogate at a fixed exponent."""
    it = 0
    for it in range(1, SMOOTH_MAX_ITERS + 1):
        scale = _exact_slem(w)
        if not scale > np.finfo(float).tiny:
            break
        f, g, H = _power_model(w, p, scale)
        ev, Q = np.linalg.eigh(H)
        if not ev[-1] > 0:
            break
        d = -Q @ ((Q.T @ g) / np.maximum(ev, 1e-12 * ev[-1]))
        decrease = -float(g @ d)
        if not decrease > SMOOTH_TOL * f:
            break
        step = 1.0
        while step > 1e-6:
            trial = w + step * d
            if _power_value(trial, p, scale) <= f - 1e-4 * step * decrease:
                break
            step *= 0.5
        else:
            break
        w = trial
    return w, it


def _kkt_newton(w):
    """Newton on the optimality system of min max(lambda_2, -lambda_n):
    ``t g1 + (1 - t) g2 = 0`` and ``f1 = f2``. Steps are kept only while the
    residual shrinks."""
    models = _branch_models(w)
    (f1, g1, _), (f2, g2, _) = models
    dg = g1 - g2
    denom = float(dg @ dg)
    t = 0.5 if denom == 0.0 else min(1.0, max(0.0, -float(g2 @ dg) / denom))

    def residual(models, t):
        (f1, g1, _), (f2, g2, _) = models
        return np.append(t * g1 + (1.0 - t) * g2, f1 - f2)

    r = float(np.abs(residual(models, t)).max())
    m = w.size
    it = 0
    for it in range(1, MAX_REFINE_ITERS + 1):
        if r <= KKT_TOL:
            break
        (f1, g1, H1), (f2, g2, H2) = models
        dg = g1 - g2
        K = np.zeros((m + 1, m + 1))
        K[:m, :m] = t * H1 + (1.0 - t) * H2
        K[:m, m] = K[m, :m] = dg
        try:
            step = np.linalg.solve(K, -residual(models, t))
        except np.linalg.LinAlgError:
            break
        w_new, t_new = w + step[:m], t + float(step[m])
        models_new = _branch_models(w_new)
        r_new = float(np.abs(residual(models_new, t_new)).max())
        if not r_new < r:
            break
        w, t, models, r = w_new, t_new, models_new, r_new
    return w, it


def grid_oracle(n, resolution) -> tuple[WeightAssignment, float]:
    """Exhaustive SLEM minimization over the grid ``{0, r, 2r, ..., 1}^(n-1)``.

    Exact ties resolve to the lexicographically smallest weight vector.
    """
    n = check_node_count(n)
    if n > 4:
        raise ValidationError(f"grid oracle is limited to n <= 4, got {n}")
    resolution = float(resolution)
    if not resolution > 0:
        raise ValidationError(f"resolution must be positive, got {resolution}")
    cells = round(1.0 / resolution)
    if cells < 1 or cells > GRID_MAX_CELLS or abs(cells * resolution - 1.0) > 1e-9:
        raise ValidationError(
            f"resolution must split [0, 1] into an integer number of cells "
            f"(at most {GRID_MAX_CELLS}), got {resolution}"
        )
    axis = np.arange(cells + 1) / cells
    m = n - 1
    total = (cells + 1) ** m
    best_f, best_idx = math.inf, -1
    # C-order flattening of the product grid is lexicographic order
    for lo in range(0, total, GRID_CHUNK):
        idx = np.arange(lo, min(lo + GRID_CHUNK, total))
        W = axis[np.stack(np.unravel_index(idx, (cells + 1,) * m), axis=1)]
        vals = np.linalg.eigvalsh(_dense_weight_matrices(W))
        f = np.maximum(vals[:, -2], -vals[:, 0])
        j = int(np.argmin(f))
        if f[j] < best_f:
            best_f, best_idx = float(f[j]), int(idx[j])
    point = axis[list(np.unravel_index(best_idx, (cells + 1,) * m))]
    return WeightAssignment(point), best_f


def _dense_weight_matrices(W: np.ndarray) -> np.ndarray:
    P, m = W.shape
    n = m + 1
    out = np.zeros((P, n, n))
    for i in range(m):
        out[:, i, i + 1] = out[:, i + 1, i] = W[:, i]
        out[:, i, i] -= W[:, i]
        out[:, i + 1, i + 1] -= W[:, i]
    out[:, range(n), range(n)] += 1.0
    return out


def random_initializations(n, count, seed=0, low=0.05, high=0.95):
    """``count`` reproducible random starting weight vectors."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(low, high, check_node_count(n) - 1) for _ in range(count)]

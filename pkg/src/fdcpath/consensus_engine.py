"""Synchronous linear averaging ``x(t+1) = W x(t)`` on a weighted path and
empirical convergence-rate measurement."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .path_model import as_weights, check_node_count, weight_matrix
from .tridiag_spectra import eigenvector, slem_pair

# above this many steps only every k-th state is stored
MAX_STORED_STATES = 10_000
UNDERFLOW = 1e-300
MIN_OVERLAP = 1e-3
MAX_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """States at ``times`` (all steps unless decimated) and the error norm
    ``||x(t) - mean||`` at every step."""

    states: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    error_norms: np.ndarray = field(repr=False)
    mean: float

    @property
    def steps(self) -> int:
        return self.error_norms.size - 1

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    burn_in: int
    last_step: int
    degenerate: bool

    def __float__(self):
        return self.rate


def _stride(steps) -> int:
    return max(1, math.ceil(steps / MAX_STORED_STATES))


def iterate(n, w, x0, steps) -> SimulationTrace:
    """Run ``steps`` synchronous averaging steps from ``x0``.

    Each step is one O(n) tridiagonal product. More than
    ``MAX_STORED_STATES`` steps keeps only every k-th state (and the last);
    error norms are always kept for every step.
    """
    n = check_node_count(n)
    T = weight_matrix(n, w)
    x0 = np.array(x0, dtype=np.float64).reshape(-1)
    if x0.size != n:
        raise ValidationError(f"x0 must have length {n}, got {x0.size}")
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be finite")
    if isinstance(steps, bool) or int(steps) != steps or steps < 0:
        raise ValidationError(f"steps must be a non-negative integer, got {steps!r}")
    steps = int(steps)
    states, times, errors = _kernels.run_iteration(
        np.ascontiguousarray(T.diag), np.ascontiguousarray(T.offdiag), x0, steps, _stride(steps)
    )
    for arr in (states, times, errors):
        arr.setflags(write=False)
    return SimulationTrace(states, times, errors, float(x0.mean()))


def estimate_rate(trace: SimulationTrace, burn_in, min_window=10) -> RateEstimate:
    """Geometric-mean contraction ``(e_T / e_b)^(1 / (T - b))`` after ``burn_in``.

    Error norms at or below ``UNDERFLOW`` end the usable window; a shortened
    window is flagged ``degenerate`` and an empty one gives ``nan``.
    """
    burn_in = int(burn_in)
    if burn_in < 0:
        raise ValidationError(f"burn_in must be non-negative, got {burn_in}")
    if trace.steps < burn_in + min_window:
        raise ValidationError(
            f"need at least burn_in + {min_window} = {burn_in + min_window} steps, "
            f"trace has {trace.steps}"
        )
    tail = trace.error_norms[burn_in:]
    bad = np.flatnonzero(~(tail > UNDERFLOW))
    usable = tail.size if bad.size == 0 else int(bad[0])
    if usable < 2:
        return RateEstimate(math.nan, burn_in, burn_in, True)
    last = burn_in + usable - 1
    rate = (tail[usable - 1] / tail[0]) ** (1.0 / (usable - 1))
    return RateEstimate(float(rate), burn_in, last, usable < tail.size)


def running_rates(trace: SimulationTrace) -> np.ndarray:
    """``(e_t / e_0)^(1/t)`` for every t >= 1; ``nan`` at t = 0 or when e_0 is 0."""
    e = np.asarray(trace.error_norms)
    out = np.full(e.size, math.nan)
    if e.size > 1 and e[0] > 0:
        t = np.arange(1, e.size)
        out[1:] = (e[1:] / e[0]) ** (1.0 / t)
    return out


def generic_start(n, w, seed=0, min_overlap=MIN_OVERLAP) -> np.ndarray:
    """Random start with a component of at least ``min_overlap`` (relative to
    its deviation from the mean) along every eigenvector attaining the SLEM.

    Draws are repeated from the same seeded stream until the check passes.
    """
    n = check_node_count(n)
    w = as_weights(w, n)
    T = weight_matrix(n, w)
    lam2, lamn = slem_pair(n, w)
    targets = []
    if lam2 >= -lamn - 1e-12:
        targets.append(lam2)
    if -lamn >= lam2 - 1e-12:
        targets.append(lamn)
    vecs = [eigenvector(T, lam) for lam in targets]
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        x0 = rng.standard_normal(n)
        dev = x0 - x0.mean()
        norm = float(np.linalg.norm(dev))
        if norm > 0 and all(abs(v @ dev) >= min_overlap * norm for v in vecs):
            return x0
    raise ValidationError(f"no start with overlap >= {min_overlap} after {MAX_REDRAWS} draws")


@dataclass(frozen=True)
class SweepCase:
    n: int
    w: tuple
    steps: int
    burn_in: int


def _run_case(case: SweepCase, seed) -> RateEstimate:
    x0 = generic_start(case.n, case.w, seed)
    return estimate_rate(iterate(case.n, case.w, x0, case.steps), case.burn_in)


def rate_sweep(cases, seed=0, workers=None) -> list[RateEstimate]:
    """Rate estimates for independent cases, run concurrently.

    Case k draws its start from child k of ``SeedSequence(seed)``, so results
    do not depend on scheduling or worker count.
    """
    cases = list(cases)
    children = np.random.SeedSequence(seed).spawn(len(cases))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_case, cases, children))

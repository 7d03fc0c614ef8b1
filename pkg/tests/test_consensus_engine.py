import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdcpath.consensus_engine import (
    MAX_STORED_STATES,
    SweepCase,
    estimate_rate,
    generic_start,
    iterate,
    rate_sweep,
    running_rates,
)
from fdcpath.errors import ValidationError
from fdcpath.path_model import weight_matrix
from fdcpath.tridiag_spectra import eigenvector, slem


def half(n):
    return np.full(n - 1, 0.5)


def schedule(n):
    """Burn-in and total steps scaled to the decay rate, far from underflow."""
    decay = -math.log(math.cos(math.pi / n))
    burn_in = math.ceil(20 / decay)
    return burn_in, burn_in + math.ceil(100 / decay)


class TestIterate:
    def test_three_nodes_by_hand(self):
        tr = iterate(3, [0.5, 0.5], [1.0, 0.0, 0.0], 2)
        np.testing.assert_allclose(tr.states, [[1, 0, 0], [0.5, 0.5, 0], [0.5, 0.25, 0.25]], rtol=0, atol=1e-16)
        np.testing.assert_array_equal(tr.times, [0, 1, 2])
        assert tr.mean == pytest.approx(1 / 3)

    def test_two_nodes_one_step(self):
        tr = iterate(2, [0.5], [1.0, 0.0], 1)
        np.testing.assert_array_equal(tr.final_state, [0.5, 0.5])
        assert tr.error_norms[1] <= 1e-16

    @pytest.mark.parametrize("n", [2, 5, 40])
    def test_constant_start_is_fixed(self, n):
        w = np.random.default_rng(n).uniform(0.0, 0.5, n - 1)
        tr = iterate(n, w, np.full(n, 2.5), 20)
        np.testing.assert_allclose(tr.states, 2.5, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(tr.error_norms, 0.0)

    def test_zero_steps(self):
        tr = iterate(3, half(3), [1.0, 2.0, 3.0], 0)
        assert tr.steps == 0
        np.testing.assert_array_equal(tr.final_state, [1, 2, 3])

    def test_matches_dense_products(self):
        rng = np.random.default_rng(4)
        n = 7
        w = rng.uniform(-0.2, 1.0, n - 1)
        x = rng.normal(size=n)
        tr = iterate(n, w, x, 15)
        D = weight_matrix(n, w).to_dense()
        for t in range(16):
            np.testing.assert_allclose(tr.states[t], x, rtol=1e-13, atol=1e-13)
            x = D @ x

    def test_error_norm_definition(self):
        x = np.array([3.0, -1.0, 0.5, 2.0])
        tr = iterate(4, [0.2, 0.6, 0.3], x, 30)
        ref = np.linalg.norm(tr.states - tr.mean, axis=1)
        np.testing.assert_allclose(tr.error_norms, ref, rtol=1e-10, atol=1e-15)

    def test_decimation(self):
        steps = 3 * MAX_STORED_STATES + 7
        tr = iterate(4, half(4), [1.0, 0, 0, 0], steps)
        assert tr.error_norms.size == steps + 1
        assert tr.states.shape[0] <= MAX_STORED_STATES + 2
        assert tr.times[0] == 0 and tr.times[-1] == steps
        assert np.all(np.diff(tr.times) > 0)
        np.testing.assert_allclose(tr.final_state, 0.25, atol=1e-14)

    def test_no_decimation_at_limit(self):
        tr = iterate(3, half(3), [1.0, 0, 0], MAX_STORED_STATES)
        np.testing.assert_array_equal(tr.times, np.arange(MAX_STORED_STATES + 1))

    def test_read_only(self):
        tr = iterate(3, half(3), [1.0, 0, 0], 3)
        with pytest.raises(ValueError):
            tr.states[0, 0] = 5.0

    @pytest.mark.parametrize(
        "x0,steps",
        [([1.0, 0.0], 3), ([1.0, np.nan, 0.0], 3), ([1.0, np.inf, 0.0], 3), ([1, 0, 0], -1),
         ([1, 0, 0], 2.5), ([1, 0, 0], True)],
    )
    def test_validation(self, x0, steps):
        with pytest.raises(ValidationError):
            iterate(3, half(3), x0, steps)

    def test_bad_weights(self):
        with pytest.raises(ValidationError):
            iterate(3, [0.5, np.nan], [1, 0, 0], 3)


class TestInvariants:
    @pytest.mark.parametrize("n", [2, 3, 50, 1000])
    def test_average_preserved(self, n):
        rng = np.random.default_rng(n)
        # weights at most 1/2 keep the spectrum inside [-1, 1]
        w = rng.uniform(0.0, 0.5, n - 1)
        x0 = rng.normal(size=n)
        tr = iterate(n, w, x0, 10_000)
        assert np.abs(tr.states.mean(axis=1) - x0.mean()).max() <= 1e-12

    @settings(max_examples=40)
    @given(st.integers(2, 60), st.integers(0, 2**32 - 1))
    def test_contraction_bound(self, n, seed):
        x0 = np.random.default_rng(seed).normal(size=n)
        s = slem(n, half(n))
        e = iterate(n, half(n), x0, 200).error_norms
        t = np.arange(e.size)
        assert np.all(e <= (s + 1e-9) ** t * e[0] + 1e-15)

    @settings(max_examples=40)
    @given(st.integers(2, 30), st.integers(0, 2**32 - 1))
    def test_errors_monotone(self, n, seed):
        rng = np.random.default_rng(seed)
        w = rng.uniform(0.0, 1.0, n - 1)
        if slem(n, w) >= 1.0 - 1e-12:
            return
        e = iterate(n, w, rng.normal(size=n), 300).error_norms
        assert np.all(np.diff(e) <= 1e-14)


class TestEstimateRate:
    def test_three_nodes(self):
        tr = iterate(3, half(3), [1.0, 0.0, 0.0], 200)
        est = estimate_rate(tr, 50)
        assert est.rate == pytest.approx(0.5, abs=0.005)
        assert float(est) == est.rate

    def test_ten_nodes(self):
        x0 = generic_start(10, half(10), seed=10)
        est = estimate_rate(iterate(10, half(10), x0, 2000), 500)
        assert est.rate == pytest.approx(math.cos(math.pi / 10), rel=0.01)
        assert not est.degenerate

    @pytest.mark.parametrize("n", [3, 5, 10, 25])
    def test_matches_slem(self, n):
        x0 = generic_start(n, half(n), seed=n)
        burn_in, steps = schedule(n)
        est = estimate_rate(iterate(n, half(n), x0, steps), burn_in)
        assert not est.degenerate
        assert est.rate == pytest.approx(math.cos(math.pi / n), rel=0.01)

    def test_consensus_start_degenerate(self):
        est = estimate_rate(iterate(4, half(4), np.ones(4), 50), 10)
        assert est.degenerate
        assert math.isnan(est.rate)

    def test_underflow_truncates_window(self):
        # n = 2 reaches consensus after one step
        est = estimate_rate(iterate(2, [0.5], [1.0, 0.0], 20), 0)
        assert est.degenerate
        assert math.isnan(est.rate)
        # geometric decay until underflow: only the usable prefix counts
        est = estimate_rate(iterate(3, half(3), [1.0, 0.0, 0.0], 1200), 0)
        assert est.degenerate
        assert est.last_step < 1200
        assert est.rate == pytest.approx(0.5, abs=1e-3)

    def test_trace_too_short(self):
        tr = iterate(3, half(3), [1.0, 0, 0], 59)
        with pytest.raises(ValidationError):
            estimate_rate(tr, 50)
        estimate_rate(iterate(3, half(3), [1.0, 0, 0], 60), 50)

    def test_negative_burn_in(self):
        with pytest.raises(ValidationError):
            estimate_rate(iterate(3, half(3), [1.0, 0, 0], 60), -1)

    def test_running_rates(self):
        tr = iterate(3, half(3), [1.0, 0.0, 0.0], 40)
        r = running_rates(tr)
        assert math.isnan(r[0])
        e = tr.error_norms
        assert r[10] == pytest.approx((e[10] / e[0]) ** 0.1)
        assert r[-1] == pytest.approx(0.5, abs=0.05)


class TestGenericStart:
    @pytest.mark.parametrize("n", [2, 3, 10, 25])
    def test_overlap(self, n):
        w = half(n)
        x0 = generic_start(n, w, seed=1)
        dev = x0 - x0.mean()
        T = weight_matrix(n, w)
        s = slem(n, w)
        for lam in (s, -s) if n > 2 else (0.0,):
            v = eigenvector(T, lam)
            assert abs(v @ dev) >= 1e-3 * np.linalg.norm(dev)

    def test_deterministic(self):
        np.testing.assert_array_equal(generic_start(8, half(8), 3), generic_start(8, half(8), 3))

    def test_unreachable_overlap(self):
        with pytest.raises(ValidationError):
            generic_start(5, half(5), seed=0, min_overlap=2.0)


class TestSweep:
    def cases(self):
        return [SweepCase(n, tuple(half(n)), 2000, 500) for n in (3, 5, 10)]

    def test_matches_theory(self):
        for case, est in zip(self.cases(), rate_sweep(self.cases(), seed=7)):
            assert est.rate == pytest.approx(math.cos(math.pi / case.n), rel=0.01)

    def test_independent_of_workers(self):
        a = rate_sweep(self.cases(), seed=7, workers=1)
        b = rate_sweep(self.cases(), seed=7, workers=3)
        assert a == b

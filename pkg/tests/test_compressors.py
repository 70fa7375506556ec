import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecsgd.compressors import (
    Identity,
    RandCoordinate,
    RandDrop,
    TopK,
    compress,
    declared_delta,
    estimate_delta,
    probe_vectors,
    relative_errors,
)
from ecsgd.errors import InvalidParameterError
from ecsgd.numerics import RngStream


class TestIdentity:
    def test_returns_input(self):
        rng = RngStream(31, 0).generator()
        x = rng.normal(size=8)
        assert np.array_equal(compress(Identity(), x, rng), x)

    def test_delta_is_one(self):
        assert declared_delta(Identity(), 8) == 1.0
        assert estimate_delta(Identity(), 8, trials=100, seed=0) == 1.0


class TestRandDrop:
    def test_tau_one_always_keeps(self):
        c = RandDrop(1)
        rng = RngStream(31, 1).generator()
        x = np.arange(5.0)
        for _ in range(10):
            assert np.array_equal(compress(c, x, rng), x)
        assert declared_delta(c, 5) == 1.0

    def test_two_outcome_support(self):
        c = RandDrop(4)
        rng = RngStream(31, 2).generator()
        x = np.arange(1.0, 6.0)
        seen = set()
        for _ in range(200):
            out = compress(c, x, rng)
            if np.array_equal(out, x):
                seen.add("keep")
            elif np.array_equal(out, np.zeros(5)):
                seen.add("drop")
            else:
                raise AssertionError("rand-drop produced a third outcome")
        assert seen == {"keep", "drop"}

    def test_exact_two_outcome_law(self):
        # E||x - C(x)||^2 = (1/tau)*0 + (1 - 1/tau)*||x||^2, no MC needed
        x = np.array([3.0, -1.0, 2.0])
        for tau in (1, 2, 4, 8):
            expected = (1.0 - 1.0 / tau) * float(x @ x)
            keep_term = (1.0 / tau) * 0.0
            drop_term = (1.0 - 1.0 / tau) * float(x @ x)
            assert keep_term + drop_term == pytest.approx(expected)
            assert 1.0 - declared_delta(RandDrop(tau), 3) == pytest.approx(1.0 - 1.0 / tau)

    def test_mc_ratio_in_spec_interval(self):
        c = RandDrop(4)
        rng = RngStream(31, 3).generator()
        x = np.array([1.0, 2.0, -3.0, 0.5])
        errs = relative_errors(c, x, 100_000, rng)
        assert 0.74 <= float(errs.mean()) <= 0.76

    def test_invalid_tau(self):
        with pytest.raises(InvalidParameterError):
            RandDrop(0)


class TestRandCoordinate:
    def test_keeps_coordinates_independently(self):
        c = RandCoordinate(0.5)
        rng = RngStream(31, 4).generator()
        x = np.ones(2000)
        out = compress(c, x, rng)
        kept = int(out.sum())
        assert 880 <= kept <= 1120  # ~5 sigma around 1000
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_exact_per_coordinate_law(self):
        # E||x - C(x)||^2 = (1-delta)||x||^2 with equality for Bernoulli masks
        c = RandCoordinate(0.25)
        rng = RngStream(31, 5).generator()
        x = np.array([1.0, -2.0, 3.0, 4.0])
        errs = relative_errors(c, x, 200_000, rng)
        assert float(errs.mean()) == pytest.approx(0.75, abs=0.01)

    def test_keep_prob_one_is_identity(self):
        c = RandCoordinate(1.0)
        rng = RngStream(31, 6).generator()
        x = np.arange(6.0)
        assert np.array_equal(compress(c, x, rng), x)

    def test_invalid_keep_prob(self):
        with pytest.raises(InvalidParameterError):
            RandCoordinate(0.0)
        with pytest.raises(InvalidParameterError):
            RandCoordinate(1.5)


class TestTopK:
    def test_hand_example(self):
        c = TopK(1)
        rng = RngStream(31, 7).generator()
        x = np.array([3.0, -1.0, 2.0])
        out = compress(c, x, rng)
        assert np.array_equal(out, np.array([3.0, 0.0, 0.0]))
        resid = float(((x - out) ** 2).sum())
        assert resid == 5.0
        assert resid <= (1.0 - 1.0 / 3.0) * float(x @ x)

    def test_lowest_index_tie_break(self):
        c = TopK(2)
        rng = RngStream(31, 8).generator()
        x = np.array([1.0, -1.0, 1.0, -1.0])
        out = compress(c, x, rng)
        assert np.array_equal(out, np.array([1.0, -1.0, 0.0, 0.0]))

    def test_equal_magnitude_tightness_witness(self):
        # for equal-magnitude coordinates the contract is met with equality
        d = 12
        x = np.ones(d)
        rng = RngStream(31, 9).generator()
        for k in (1, 3, 6, 12):
            out = compress(TopK(k), x, rng)
            resid = float(((x - out) ** 2).sum())
            assert resid == pytest.approx((1.0 - k / d) * float(x @ x), rel=1e-12)

    def test_deterministic(self):
        c = TopK(3)
        rng = RngStream(31, 10).generator()
        x = np.array([0.1, -5.0, 2.0, 2.0, -0.3, 4.0])
        a = compress(c, x, rng)
        b = compress(c, x, rng)
        assert np.array_equal(a, b)

    def test_k_equals_d_is_identity(self):
        rng = RngStream(31, 11).generator()
        x = np.arange(5.0)
        assert np.array_equal(compress(TopK(5), x, rng), x)
        assert estimate_delta(TopK(5), 5, trials=10, seed=0) == 1.0

    def test_k_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            TopK(0)
        rng = RngStream(31, 12).generator()
        with pytest.raises(InvalidParameterError):
            compress(TopK(9), np.ones(4), rng)


class TestEstimateDelta:
    def test_rand_coordinate_spec_interval(self):
        est = estimate_delta(RandCoordinate(0.25), 16, trials=20_000, seed=0)
        assert 0.23 <= est <= 0.27

    def test_rand_drop_near_declared(self):
        est = estimate_delta(RandDrop(4), 8, trials=100_000, seed=0)
        assert abs(est - 0.25) <= 0.02

    def test_top_k_near_declared(self):
        est = estimate_delta(TopK(4), 16, trials=100, seed=0)
        # deterministic worst probe: equal magnitudes give exactly k/d
        assert est == pytest.approx(0.25, abs=1e-12)

    def test_probe_set_contains_basis_ones_and_spike(self):
        rng = RngStream(31, 13).generator()
        probes = probe_vectors(4, rng)
        arr = np.array(probes)
        for i in range(4):
            basis = np.zeros(4)
            basis[i] = 1.0
            assert any(np.array_equal(p, basis) for p in probes)
        assert any(np.array_equal(p, np.ones(4)) for p in probes)
        spikes = [p for p in probes if abs(p[0]) >= 1e3]
        assert spikes, f"no spike probe in {arr}"


class TestBatchFaithfulness:
    @pytest.mark.parametrize(
        "comp", [Identity(), RandDrop(3), RandCoordinate(0.4), TopK(2)]
    )
    def test_relative_errors_matches_sequential_compress(self, comp):
        x = np.array([1.0, -2.0, 0.5, 3.0])
        batch = relative_errors(comp, x, 64, RngStream(32, 0).generator())
        rng = RngStream(32, 0).generator()
        norm_sq = float(x @ x)
        seq = np.array(
            [float(((x - compress(comp, x, rng)) ** 2).sum()) / norm_sq for _ in range(64)]
        )
        assert np.array_equal(batch, seq)


class TestContractProperty:
    @given(
        st.integers(min_value=1, max_value=8),
        st.lists(
            st.floats(min_value=-100, max_value=100, allow_nan=False),
            min_size=8,
            max_size=8,
        ),
    )
    @settings(max_examples=50, deadline=None)
    def test_topk_contract_exactly(self, k, entries):
        x = np.array(entries)
        rng = RngStream(33, 0).generator()
        out = compress(TopK(k), x, rng)
        resid = float(((x - out) ** 2).sum())
        assert resid <= (1.0 - k / 8.0) * float(x @ x) + 1e-9

    @given(st.integers(min_value=1, max_value=20))
    @settings(max_examples=20, deadline=None)
    def test_rand_drop_closed_form_contract(self, tau):
        # exact law: two outcomes with probabilities 1/tau and 1 - 1/tau
        x = np.array([1.0, 2.0, 3.0])
        expected = (1.0 - 1.0 / tau) * float(x @ x)
        assert expected <= (1.0 - declared_delta(RandDrop(tau), 3)) * float(x @ x) + 1e-12

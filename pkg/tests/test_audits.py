import numpy as np
import pytest

from ecsgd.audits import (
    AUDIT_SUITES,
    audit_compressor_contract,
    audit_descent_nonconvex,
    audit_descent_quasiconvex,
    audit_dsgd_error_bound,
    audit_ecsgd_error_bound,
    audit_local_dispersion_bound,
    run_audit_suite,
)
from ecsgd.compressors import RandDrop, TopK
from ecsgd.engine import AlgorithmSpec
from ecsgd.errors import ConfigurationError, InvalidParameterError
from ecsgd.objectives import make_quadratic
from ecsgd.oracles import additive_noise_oracle, deterministic_oracle
from ecsgd.schedules import constant_stepsize, inverse_time_stepsize

SEEDS = 25
T = 100


def quad():
    return make_quadratic(20, 0.1, 1.0)


def dsgd_spec(obj, gamma=None, tau=4):
    gamma = gamma if gamma is not None else 1.0 / (10.0 * obj.L * tau)
    return AlgorithmSpec(
        kind="d-sgd",
        oracle=additive_noise_oracle(obj, 1.0),
        stepsize=constant_stepsize(gamma),
        tau=tau,
    )


class TestLemmaAuditorsPass:
    def test_dsgd_error_bound(self):
        obj = quad()
        result = audit_dsgd_error_bound(dsgd_spec(obj), obj, T, SEEDS)
        assert result.passed
        assert result.seeds == SEEDS and result.T == T
        assert result.min_margin >= 0.0

    def test_dsgd_with_decreasing_stepsizes(self):
        obj = quad()
        tau = 4
        kappa = 40.0 * obj.L * tau / obj.mu
        spec = AlgorithmSpec(
            kind="d-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=inverse_time_stepsize(obj.mu, kappa),
            tau=tau,
        )
        assert audit_dsgd_error_bound(spec, obj, T, SEEDS).passed

    def test_ecsgd_error_bound(self):
        obj = quad()
        comp = RandDrop(8)
        spec = AlgorithmSpec(
            kind="ec-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(1.0 / (10.0 * obj.L * 16.0)),
            compressor=comp,
        )
        result = audit_ecsgd_error_bound(spec, obj, T, SEEDS)
        assert result.passed

    def test_local_dispersion_bound(self):
        obj = quad()
        spec = AlgorithmSpec(
            kind="local-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(1.0 / (10.0 * obj.L * 16.0)),
            tau=4,
            workers=4,
        )
        assert audit_local_dispersion_bound(spec, obj, T, SEEDS).passed

    def test_descent_quasiconvex(self):
        obj = quad()
        assert audit_descent_quasiconvex(dsgd_spec(obj), obj, T, SEEDS).passed

    def test_descent_nonconvex(self):
        obj = quad()
        assert audit_descent_nonconvex(dsgd_spec(obj), obj, T, SEEDS).passed

    def test_result_dict_shape(self):
        obj = quad()
        d = audit_dsgd_error_bound(dsgd_spec(obj), obj, 20, 5).to_dict()
        assert set(d) == {
            "name", "passed", "seeds", "T",
            "worst_iteration", "worst_mean_slack", "worst_se", "min_margin",
        }


class TestCapGuards:
    def test_dsgd_cap_rejected_before_running(self):
        obj = quad()
        spec = dsgd_spec(obj, gamma=1.0 / (10.0 * obj.L * 4) * 1.5)
        with pytest.raises(ConfigurationError, match="configuration rejected"):
            audit_dsgd_error_bound(spec, obj, T, SEEDS)

    def test_dsgd_fast_decaying_stepsizes_rejected(self):
        obj = quad()
        # gamma_0 = 4/160 sits exactly at the cap, but kappa = 1 halves the
        # stepsize after one iteration, far faster than tau-slow for tau = 4
        spec = AlgorithmSpec(
            kind="d-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=inverse_time_stepsize(160.0, 1.0),
            tau=4,
        )
        with pytest.raises(ConfigurationError, match="tau-slow"):
            audit_dsgd_error_bound(spec, obj, T, SEEDS)

    def test_ecsgd_cap_rejected(self):
        obj = quad()
        spec = AlgorithmSpec(
            kind="ec-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(1.0 / (10.0 * obj.L * 16.0) * 2.0),
            compressor=RandDrop(8),
        )
        with pytest.raises(ConfigurationError, match="configuration rejected"):
            audit_ecsgd_error_bound(spec, obj, T, SEEDS)

    def test_local_cap_rejected(self):
        obj = quad()
        spec = AlgorithmSpec(
            kind="local-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(1.0),
            tau=4,
            workers=4,
        )
        with pytest.raises(ConfigurationError, match="configuration rejected"):
            audit_local_dispersion_bound(spec, obj, T, SEEDS)

    def test_descent_cap_rejected(self):
        obj = quad()
        spec = dsgd_spec(obj, gamma=0.3)  # above 1/(4 L (1+M)) = 0.25 at M = 0
        with pytest.raises(ConfigurationError, match="configuration rejected"):
            audit_descent_quasiconvex(spec, obj, T, SEEDS)


class TestKindGuards:
    def test_dsgd_bound_rejects_other_kinds(self):
        obj = quad()
        plain = AlgorithmSpec(
            kind="plain-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(0.01),
        )
        with pytest.raises(InvalidParameterError):
            audit_dsgd_error_bound(plain, obj, T, SEEDS)

    def test_dsgd_bound_rejects_random_delays(self):
        obj = quad()
        spec = AlgorithmSpec(
            kind="d-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(0.01),
            tau=4,
            delay_model="iid-bounded",
        )
        with pytest.raises(InvalidParameterError):
            audit_dsgd_error_bound(spec, obj, T, SEEDS)

    def test_ecsgd_bound_rejects_other_kinds(self):
        obj = quad()
        with pytest.raises(InvalidParameterError):
            audit_ecsgd_error_bound(dsgd_spec(obj), obj, T, SEEDS)

    def test_local_bound_rejects_other_kinds(self):
        obj = quad()
        with pytest.raises(InvalidParameterError):
            audit_local_dispersion_bound(dsgd_spec(obj), obj, T, SEEDS)

    def test_descent_rejects_local(self):
        obj = quad()
        spec = AlgorithmSpec(
            kind="local-sgd",
            oracle=additive_noise_oracle(obj, 1.0),
            stepsize=constant_stepsize(0.001),
            tau=4,
            workers=4,
        )
        with pytest.raises(InvalidParameterError):
            audit_descent_quasiconvex(spec, obj, T, SEEDS)
        with pytest.raises(InvalidParameterError):
            audit_descent_nonconvex(spec, obj, T, SEEDS)

    def test_quasiconvex_descent_rejects_nonconvex_class(self):
        obj = quad()

        class Proxy:
            convexity_class = "non-convex"

            def __getattr__(self, name):
                return getattr(obj, name)

        with pytest.raises(InvalidParameterError):
            audit_descent_quasiconvex(dsgd_spec(obj), Proxy(), T, SEEDS)


class _OverclaimingDrop:
    """Acts like rand-drop(4) (true delta 0.25) but declares delta = 0.9."""

    name = "overclaiming-drop"
    delta = 0.9

    def compress(self, x, rng):
        if rng.random() < 0.25:
            return x
        return np.zeros_like(x)


class TestCompressorAudit:
    def test_honest_compressors_pass(self):
        for comp in (RandDrop(4), TopK(3)):
            result = audit_compressor_contract(comp, 16, trials=4000, seed=0)
            assert result.passed, result.to_dict()

    def test_overclaiming_compressor_flagged(self):
        result = audit_compressor_contract(_OverclaimingDrop(), 16, trials=4000, seed=0)
        assert not result.passed
        assert any(r["violated"] for r in result.probe_rows)
        assert result.estimated_delta < 0.5  # nowhere near the claimed 0.9

    def test_estimate_tolerance_scales_with_trials(self):
        r_small = audit_compressor_contract(RandDrop(2), 8, trials=100, seed=0)
        r_big = audit_compressor_contract(RandDrop(2), 8, trials=10_000, seed=0)
        assert r_small.estimate_tolerance > r_big.estimate_tolerance


class TestSuiteRunner:
    def test_unknown_suite_raises(self):
        with pytest.raises(InvalidParameterError, match="unknown audit suite"):
            run_audit_suite("lemma-frobnicate")

    @pytest.mark.parametrize("suite", AUDIT_SUITES)
    def test_all_suites_pass_at_small_budget(self, suite):
        budget = 2000 if suite in ("compressor", "noise") else 25
        out = run_audit_suite(suite, budget=budget, seed=0)
        assert out["suite"] == suite
        assert out["passed"] is True
        assert isinstance(out["results"], list) and out["results"]

    def test_suite_results_are_json_ready(self):
        import json

        out = run_audit_suite("lemma-dsgd", budget=5, seed=0)
        json.dumps(out)

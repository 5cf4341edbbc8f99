import numpy as np
import pytest

from chasm.bias import BiasExperiment, marginal_equivalence_demo, run_bias
from chasm.synthetic import NoiseSpec, VarModel, rotation_transition


class TestBiasExperiment:
    def test_defaults_resolve(self):
        exp = BiasExperiment()
        model = exp.resolved_model()
        assert model.dim == 2
        assert model.tau is None
        assert model.length == exp.checkpoints[-1] + 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"checkpoints": ()},
            {"checkpoints": (0, 10)},
            {"checkpoints": (10, 10)},
            {"checkpoints": (20, 10)},
            {"n_mc": 10},
            {"rhos": (1.2,)},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            BiasExperiment(**kwargs)

    def test_rejects_change_model(self):
        theta = rotation_transition(0.5, 0.0)
        model = VarModel(
            2, theta, theta, NoiseSpec("gaussian", covariance=np.eye(2)), 150, 500
        )
        with pytest.raises(ValueError):
            BiasExperiment(checkpoints=(100,), model=model)


class TestRunBias:
    def test_table_shape_and_determinism(self):
        exp = BiasExperiment(rhos=(1.0, 0.9), checkpoints=(50, 100), n_mc=120, seed=5)
        first = run_bias(exp, jobs=1)
        second = run_bias(exp, jobs=2)
        assert len(first) == 4
        assert [(p.rho, p.n) for p in first] == [(1.0, 50), (1.0, 100), (0.9, 50), (0.9, 100)]
        for a, b in zip(first, second):
            assert a == b
        assert all(p.bias_norm > 0 and p.stderr > 0 for p in first)

    def test_unweighted_bias_shrinks_with_horizon(self):
        exp = BiasExperiment(rhos=(1.0,), checkpoints=(50, 400), n_mc=400, seed=6)
        points = run_bias(exp, jobs=1)
        assert points[0].bias_norm > points[1].bias_norm


class TestMarginalEquivalence:
    def test_matched_marginals_distinct_spectra(self):
        report = marginal_equivalence_demo(theta=0.7, length=100_000, seed=7)
        expected = report.expected_variance * np.eye(2)
        assert report.expected_variance == pytest.approx(1.0 / 0.51)
        assert np.abs(report.cov_diag - expected).max() <= 0.05 * report.expected_variance
        assert np.abs(report.cov_rotation - expected).max() <= 0.05 * report.expected_variance
        assert np.allclose(report.eig_diag, [0.7, 0.7], atol=0.05)
        assert np.allclose(
            np.sort_complex(report.eig_rotation), np.sort_complex([0.7j, -0.7j]), atol=0.05
        )
        assert report.spectral_separation > 0.5

    def test_white_noise_case(self):
        report = marginal_equivalence_demo(theta=0.0, length=50_000, seed=8)
        assert np.abs(report.cov_diag - np.eye(2)).max() <= 0.05
        assert np.abs(report.cov_rotation - np.eye(2)).max() <= 0.05

    def test_rejects_unstable_theta(self):
        with pytest.raises(ValueError):
            marginal_equivalence_demo(theta=1.0)

"""Tests for emulator assembly, queries, and serialization."""

import json
import math

import numpy as np
import pytest

from stochemu.basis import InputModel, MultiIndexSet, Uniform
from stochemu.dist import JointDistModel, MarginalModel, VineCopula
from stochemu.emulator import (
    PceKdeBaseline,
    StochasticEmulator,
    compress_trajectories,
    emulator_from_compression,
    fit_emulator,
    fit_pce_kde_baseline,
)
from stochemu.errors import SchemaError, StageError
from stochemu.kle import KleModel, build_kle_model, eigendecompose, JointBasisResult
from stochemu.pce import FitConfig, PceModel
from stochemu.testbeds import (
    StochasticBorehole,
    StochasticIshigami,
    Trajectory,
    TrajectorySet,
    generate_dataset,
)

IM1 = InputModel([Uniform(-1, 1)])
ISHIGAMI_CFG = FitConfig(max_degree=10, q_candidates=(0.75, 1.0), degree_candidates=(4, 6, 8, 10))


@pytest.fixture(scope="module")
def ishigami_emulator():
    data = generate_dataset(StochasticIshigami(), 120, 60, seed=101)
    return fit_emulator(data, ISHIGAMI_CFG, epsilon=0.001, inference_option=2, seed=0)


@pytest.fixture(scope="module")
def borehole_emulator():
    data = generate_dataset(StochasticBorehole(), 60, 100, seed=55)
    cfg = FitConfig(max_degree=6, q_candidates=(0.75, 1.0))
    return fit_emulator(data, cfg, epsilon=0.001, inference_option=1, seed=0)


def constant_mode_emulator(lam=2.0, option=1):
    """K = 1 with a constant eigenfunction: every trajectory is a level shift."""
    A = MultiIndexSet([(0,), (1,)])
    kle = KleModel(
        input_model=IM1,
        indices=A,
        mean_coeffs=np.array([1.0, 0.5]),
        eigenvalues=np.array([lam]),
        modes=np.array([[1.0], [0.0]]),
        xi=np.zeros((1, 4)),
        explained_fraction=1.0,
        total_variance=lam,
    )
    dist = JointDistModel(
        (MarginalModel(kind="gaussian_std"),), VineCopula.independence(1), option
    )
    return StochasticEmulator(kle=kle, dist=dist, input_model=IM1)


class TestFitEmulator:
    def test_pipeline_smoke_and_report(self, ishigami_emulator):
        e = ishigami_emulator
        assert e.n_modes >= 1
        report = e.fit_report
        assert len(report["per_trajectory_loo"]) == 60
        assert report["n_regressors"] <= 60  # P <= N/2
        assert 0.999 < report["explained_fraction"] <= 1.0
        assert set(report["timings_s"]) == {"pce", "joint-basis", "kle", "inference"}

    def test_deterministic_serialization(self):
        data = generate_dataset(StochasticIshigami(), 60, 8, seed=7)
        cfg = FitConfig(max_degree=6, q_candidates=(1.0,))
        a = fit_emulator(data, cfg, 0.001, 1, seed=3)
        b = fit_emulator(data, cfg, 0.001, 1, seed=3)
        assert a.to_json() == b.to_json()

    def test_stage_error_tagging(self):
        # identical trajectories have a rank-zero coefficient covariance
        im = IM1
        X = im.sample(np.random.default_rng(0), 30)
        y = np.sin(X[:, 0])
        data = TrajectorySet(im, [Trajectory(X, y, 0), Trajectory(X, y, 1)])
        with pytest.raises(StageError) as err:
            fit_emulator(data, FitConfig(max_degree=3), 0.001, 1)
        assert err.value.stage == "kle"

    def test_option_shared_compression(self):
        data = generate_dataset(StochasticIshigami(), 60, 10, seed=17)
        comp = compress_trajectories(data, FitConfig(max_degree=6, q_candidates=(1.0,)), 0.001)
        gauss = emulator_from_compression(comp, 1)
        kde = emulator_from_compression(comp, 3)
        np.testing.assert_array_equal(gauss.kle.eigenvalues, kde.kle.eigenvalues)
        assert gauss.dist.option == 1 and kde.dist.option == 3


class TestMeanFunction:
    def test_identical_trajectories_unsupported_but_mirrored_center(self):
        # +g and -g trajectories: the ensemble mean PCE vanishes
        im = IM1
        rng = np.random.default_rng(5)
        trajs = []
        for r in range(6):
            X = im.sample(rng, 40)
            g = 2.0 * X[:, 0] ** 3 - X[:, 0]
            trajs.append(Trajectory(X, g if r % 2 == 0 else -g, r))
        data = TrajectorySet(im, trajs)
        comp = compress_trajectories(data, FitConfig(max_degree=5, q_candidates=(1.0,)), 0.5)
        np.testing.assert_allclose(comp.kle.mean_coeffs, 0.0, atol=1e-10)

    def test_mean_matches_monte_carlo(self, ishigami_emulator):
        x = np.array([[-math.pi / 2, math.pi / 2, -math.pi / 2]])
        bench = StochasticIshigami()
        values = np.empty(10_000)
        for i in range(10_000):
            event = bench.sample_event(np.random.default_rng((3, i)))
            values[i] = bench.evaluate(x, event)[0]
        # the emulator mean averages R = 60 latent draws, the oracle 10^4;
        # both sampling errors enter the comparison
        sd = values.std(ddof=1)
        se = math.hypot(sd / 100.0, sd / math.sqrt(60))
        assert abs(float(ishigami_emulator.mean(x)[0]) - values.mean()) < 3 * se


class TestCovariance:
    def test_constant_mode_gives_flat_covariance(self):
        e = constant_mode_emulator(lam=2.0)
        X = IM1.sample(np.random.default_rng(1), 6)
        np.testing.assert_allclose(e.covariance(X), 2.0, atol=1e-12)

    def test_diagonal_nonnegative(self, ishigami_emulator):
        X = ishigami_emulator.input_model.sample(np.random.default_rng(2), 50)
        assert np.all(np.diag(ishigami_emulator.covariance(X)) >= -1e-12)

    def test_truncation_only_removes_variance(self):
        data = generate_dataset(StochasticIshigami(), 80, 30, seed=23)
        comp_full = compress_trajectories(
            data, FitConfig(max_degree=8, q_candidates=(1.0,), degree_candidates=(8,)), 1e-12
        )
        jb = JointBasisResult(
            comp_full.kle.indices,
            comp_full.refit_coeffs - comp_full.refit_coeffs.mean(axis=1, keepdims=True),
            comp_full.refit_coeffs.mean(axis=1),
            data.input_model,
        )
        kle_trunc = build_kle_model(jb, 0.001)
        X = data.input_model.sample(np.random.default_rng(3), 100)
        var_full = np.diag(comp_full.kle.covariance(X))
        var_trunc = np.diag(kle_trunc.covariance(X))
        assert np.all(var_trunc <= var_full + 1e-10)

    def test_borehole_covariance_close_to_monte_carlo(self, borehole_emulator):
        bench = StochasticBorehole()
        rng = np.random.default_rng(4)
        X = bench.input_model.sample(rng, 5)
        reps = 10_000
        values = np.empty((reps, 5))
        for r in range(reps):
            event = bench.sample_event(np.random.default_rng((11, r)))
            values[r] = bench.evaluate(X, event)
        c_emp = np.cov(values, rowvar=False)
        c_mercer = borehole_emulator.covariance(X)
        rel = np.abs(c_mercer - c_emp) / np.abs(c_emp)
        assert np.all(rel < 0.15)


class TestSampling:
    def test_zero_draw_equals_mean(self):
        e = constant_mode_emulator()
        coeffs = e.kle.trajectory_coeffs(np.zeros((1, 1)))
        np.testing.assert_array_equal(coeffs[:, 0], e.kle.mean_coeffs)

    def test_sampled_variance_matches_mercer(self, ishigami_emulator):
        e_gauss = StochasticEmulator(
            kle=ishigami_emulator.kle,
            dist=JointDistModel(
                tuple(
                    MarginalModel(kind="gaussian_std") for _ in range(ishigami_emulator.n_modes)
                ),
                VineCopula.independence(ishigami_emulator.n_modes),
                1,
            ),
            input_model=ishigami_emulator.input_model,
        )
        x = np.array([[0.5, -1.0, 2.0]])
        samples = e_gauss.marginal_samples(x, 10_000, seed=8)
        expected = float(e_gauss.covariance(x)[0, 0])
        assert samples.var(ddof=1) == pytest.approx(expected, rel=0.05)

    def test_kl_coordinate_unit_variance(self, ishigami_emulator):
        from stochemu.dist import sample_joint

        z = sample_joint(ishigami_emulator.dist, 10_000, seed=9)
        np.testing.assert_allclose(z.var(axis=0, ddof=1), 1.0, atol=0.05)

    def test_trajectories_are_pce_models(self, ishigami_emulator):
        trajs = ishigami_emulator.sample_trajectories(3, seed=10)
        X = ishigami_emulator.input_model.sample(np.random.default_rng(6), 5)
        for t in trajs:
            assert isinstance(t, PceModel)
            assert np.all(np.isfinite(t.predict(X)))

    def test_marginal_samples_match_trajectory_evaluations(self, ishigami_emulator):
        x = np.array([0.3, 0.7, -2.0])
        samples = ishigami_emulator.marginal_samples(x, 7, seed=11)
        trajs = ishigami_emulator.sample_trajectories(7, seed=11)
        direct = np.array([t.predict(x[None, :])[0] for t in trajs])
        np.testing.assert_allclose(samples, direct, rtol=1e-12)

    def test_vanishing_eigenfunction_point_gives_constant_samples(self):
        e = StochasticEmulator(
            kle=KleModel(
                input_model=IM1,
                indices=MultiIndexSet([(0,), (1,)]),
                mean_coeffs=np.array([3.0, 0.0]),
                eigenvalues=np.array([1.5]),
                modes=np.array([[0.0], [1.0]]),  # phi = sqrt(3) x, vanishes at 0
                xi=np.zeros((1, 2)),
                explained_fraction=1.0,
                total_variance=1.5,
            ),
            dist=JointDistModel(
                (MarginalModel(kind="gaussian_std"),), VineCopula.independence(1), 1
            ),
            input_model=IM1,
        )
        samples = e.marginal_samples(np.array([0.0]), 50, seed=12)
        np.testing.assert_allclose(samples, 3.0, atol=1e-12)

    def test_same_seed_identical_samples(self, ishigami_emulator):
        x = np.array([0.1, 0.2, 0.3])
        a = ishigami_emulator.marginal_samples(x, 100, seed=13)
        b = ishigami_emulator.marginal_samples(x, 100, seed=13)
        np.testing.assert_array_equal(a, b)

    def test_sample_prefix_independent_of_n(self, ishigami_emulator):
        small = ishigami_emulator.sample_trajectories(3, seed=14)
        big = ishigami_emulator.sample_trajectories(20, seed=14)
        for a, b in zip(small, big[:3]):
            np.testing.assert_array_equal(a.coeffs, b.coeffs)


class TestSerialization:
    def test_round_trip_bitwise_predictions(self, ishigami_emulator):
        e = ishigami_emulator
        again = StochasticEmulator.from_json(e.to_json())
        X = e.input_model.sample(np.random.default_rng(7), 20)
        np.testing.assert_array_equal(e.mean(X), again.mean(X))
        np.testing.assert_array_equal(e.covariance(X), again.covariance(X))
        x = X[0]
        np.testing.assert_array_equal(
            e.marginal_samples(x, 200, seed=15), again.marginal_samples(x, 200, seed=15)
        )

    def test_unknown_version_rejected(self, ishigami_emulator):
        payload = ishigami_emulator.to_dict()
        payload["version"] = "99"
        with pytest.raises(SchemaError):
            StochasticEmulator.from_dict(payload)

    def test_missing_field_rejected(self, ishigami_emulator):
        payload = ishigami_emulator.to_dict()
        del payload["kle"]
        with pytest.raises(SchemaError):
            StochasticEmulator.from_dict(payload)

    def test_corrupt_json_rejected(self):
        with pytest.raises(SchemaError):
            StochasticEmulator.from_json("{not json")

    def test_file_round_trip(self, tmp_path, ishigami_emulator):
        path = tmp_path / "emulator.json"
        ishigami_emulator.save(path)
        again = StochasticEmulator.load(path)
        assert again.to_json() == ishigami_emulator.to_json()


class TestPceKdeBaseline:
    def test_values_equal_model_predictions(self):
        data = generate_dataset(StochasticIshigami(), 60, 8, seed=31)
        comp = compress_trajectories(data, FitConfig(max_degree=6, q_candidates=(1.0,)), 0.001)
        baseline = fit_pce_kde_baseline(comp)
        x = np.array([0.4, -0.9, 1.3])
        values = baseline.predict_values(x)
        direct = np.array([m.predict(x[None, :])[0] for m in baseline.models])
        np.testing.assert_allclose(values, direct, rtol=1e-12)
        assert values.shape == (8,)

    def test_identical_trajectories_give_identical_values(self):
        A = MultiIndexSet([(0,), (1,)])
        models = [PceModel(IM1, A, np.array([1.0, 2.0]), 0.0) for _ in range(5)]
        baseline = PceKdeBaseline(models)
        values = baseline.predict_values(np.array([0.25]))
        assert np.ptp(values) == 0.0

    def test_shared_basis_enforced(self):
        a = PceModel(IM1, MultiIndexSet([(0,)]), np.array([1.0]), 0.0)
        b = PceModel(IM1, MultiIndexSet([(1,)]), np.array([1.0]), 0.0)
        with pytest.raises(SchemaError):
            PceKdeBaseline([a, b])

import numpy as np
import pytest

from vino.fno import FnoConfig, FnoModel
from vino.grids import Field, Grid1D, Grid2D
from vino.grf import GrfSampler, GrfSpec
from vino.losses import LossKind, ProblemSpec
from vino.solvers import solve_antiderivative_1d
from vino.tensor import RngStream, Tensor
from vino.training import (Adam, History, TrainConfig, TrainingAborted,
                           assemble_model_inputs, evaluate, train)


class TestAdam:
    def test_zero_gradient_from_fresh_state_is_noop(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        p.grad = np.zeros(2)
        opt = Adam([p])
        opt.step(lr=0.1)
        assert np.array_equal(p.data, [1.0, -2.0])
        assert np.all(opt.m[0] == 0.0) and np.all(opt.v[0] == 0.0)

    def test_first_step_size_is_lr_times_sign(self):
        p = Tensor(np.array([0.0, 0.0]), requires_grad=True)
        g = np.array([3.0, -0.5])
        p.grad = g.copy()
        opt = Adam([p])
        opt.step(lr=1e-3)
        # bias correction makes the first update ~ lr * sign(g) (eps-small slack)
        assert np.abs(p.data + 1e-3 * np.sign(g)).max() < 1e-3 * 1e-4

    def test_moments_decay_on_zero_gradients(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam([p])
        p.grad = np.array([2.0])
        opt.step(1e-3)
        m1 = abs(opt.m[0][0])
        p.grad = np.array([0.0])
        opt.step(1e-3)
        assert abs(opt.m[0][0]) < m1

    def test_complex_parameters_update_componentwise(self):
        p = Tensor(np.array([1.0 + 1.0j]), requires_grad=True)
        p.grad = np.array([2.0 - 4.0j])
        opt = Adam([p])
        opt.step(lr=1e-3)
        # both components move by ~lr against the gradient sign
        assert abs(p.data[0].real - (1.0 - 1e-3)) < 1e-7
        assert abs(p.data[0].imag - (1.0 + 1e-3)) < 1e-7

    def test_unused_parameter_stays_put(self):
        p = Tensor(np.array([5.0]), requires_grad=True)
        opt = Adam([p])
        opt.step(1e-3)  # grad never set -> treated as zero
        assert np.array_equal(p.data, [5.0])


def _tiny_1d_problem(n_samples=8, nodes=33, seed=0):
    grid = Grid1D(nodes)
    problem = ProblemSpec("antiderivative1d", grid)
    sampler = GrfSampler(GrfSpec(0.1, 0.0, grid))
    p = sampler.sample_batch(seed, n_samples)
    targets = np.stack([solve_antiderivative_1d(Field(grid, p[i])).values
                        for i in range(n_samples)])[:, None]
    return problem, {"input": p}, targets


class TestTrain:
    def test_zero_iterations_is_noop(self):
        problem, inputs, _ = _tiny_1d_problem()
        model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=1), seed=0)
        before = {k: v.copy() for k, v in model.state_dict().items()}
        hist = train(model, problem, TrainConfig(iterations=0, batch_size=4), inputs)
        assert len(hist) == 0
        after = model.state_dict()
        assert all(np.array_equal(before[k], after[k]) for k in before)

    def test_vino_descent_smoke(self):
        problem, inputs, _ = _tiny_1d_problem()
        model = FnoModel(FnoConfig(1, 1, 1, width=8, modes=6, layers=2), seed=1)
        config = TrainConfig(iterations=60, batch_size=4, seed=2,
                             loss=LossKind("vino"), eval_every=0)
        hist = train(model, problem, config, inputs)
        assert len(hist) == 60
        assert hist.train_loss[-1] < hist.train_loss[0]

    def test_data_loss_stays_near_zero_on_own_outputs(self):
        problem, inputs, _ = _tiny_1d_problem()
        model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=1), seed=3)
        from vino.training import predict
        targets = predict(model, problem, inputs).data.copy()
        config = TrainConfig(iterations=20, batch_size=4, seed=4,
                             loss=LossKind("data"), eval_every=0)
        hist = train(model, problem, config, inputs, targets)
        assert all(l < 1e-8 for l in hist.train_loss)

    def test_trajectory_deterministic(self):
        problem, inputs, targets = _tiny_1d_problem()
        losses = []
        for _ in range(2):
            model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=2), seed=5)
            config = TrainConfig(iterations=15, batch_size=4, seed=6,
                                 loss=LossKind("vino"), eval_every=0)
            hist = train(model, problem, config, inputs, targets)
            losses.append(hist.train_loss)
        assert losses[0] == losses[1]

    def test_batch_size_larger_than_dataset_rejected(self):
        problem, inputs, _ = _tiny_1d_problem(n_samples=4)
        model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=1), seed=0)
        with pytest.raises(ValueError, match="batch_size"):
            train(model, problem, TrainConfig(iterations=1, batch_size=8), inputs)

    def test_data_loss_without_targets_rejected(self):
        problem, inputs, _ = _tiny_1d_problem()
        model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=1), seed=0)
        with pytest.raises(ValueError, match="targets"):
            train(model, problem, TrainConfig(iterations=1, batch_size=4,
                                              loss=LossKind("data")), inputs)

    def test_nonfinite_gradient_aborts_with_iteration(self):
        problem, inputs, targets = _tiny_1d_problem()
        inputs = {"input": inputs["input"].copy()}
        inputs["input"][0, 5] = np.nan
        model = FnoModel(FnoConfig(1, 1, 1, width=4, modes=4, layers=1), seed=0)
        config = TrainConfig(iterations=5, batch_size=8, seed=0, loss=LossKind("vino"))
        with pytest.raises(TrainingAborted, match="iteration 1"):
            train(model, problem, config, inputs, targets)

    def test_lr_schedule_steps(self):
        config = TrainConfig(learning_rate=1e-3, lr_gamma=0.5, lr_every=200)
        assert config.lr_at(1) == 1e-3
        assert config.lr_at(200) == 1e-3
        assert config.lr_at(201) == 5e-4
        assert config.lr_at(401) == 2.5e-4

    def test_history_csv_round_trip(self, tmp_path):
        hist = History([0.5, 0.25], [None, 0.4], [0.01, 0.02])
        path = tmp_path / "h.csv"
        hist.to_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "iteration,train_loss,test_loss,seconds"
        assert lines[1].startswith("1,0.5,,")
        assert lines[2].startswith("2,0.25,0.4,")


class _ScriptedModel:
    """Returns pre-baked outputs in evaluation order."""

    def __init__(self, outs):
        self.outs = outs
        self.ptr = 0

    def __call__(self, x):
        b = x.shape[0]
        out = self.outs[self.ptr:self.ptr + b]
        self.ptr += b
        return Tensor(out)


def _zero_boundary(arr):
    arr[..., 0, :] = arr[..., -1, :] = 0.0
    arr[..., :, 0] = arr[..., :, -1] = 0.0
    return arr


class TestEvaluate:
    GRID = Grid2D(9, 9)

    def _problem(self):
        return ProblemSpec("poisson2d", self.GRID)

    def test_exact_prediction_zero_error(self):
        rng = np.random.default_rng(0)
        targets = _zero_boundary(rng.standard_normal((5, 1, 9, 9)))
        model = _ScriptedModel(targets.copy())
        res = evaluate(model, self._problem(), {"input": np.zeros((5, 9, 9))}, targets)
        assert np.all(res.errors == 0.0)

    def test_zero_prediction_gives_full_error(self):
        rng = np.random.default_rng(1)
        targets = _zero_boundary(rng.standard_normal((3, 1, 9, 9)))
        model = _ScriptedModel(np.zeros_like(targets))
        res = evaluate(model, self._problem(), {"input": np.zeros((3, 9, 9))}, targets)
        assert np.abs(res.errors - 1.0).max() < 1e-14

    def test_scaled_prediction(self):
        rng = np.random.default_rng(2)
        targets = _zero_boundary(rng.standard_normal((2, 1, 9, 9)))
        model = _ScriptedModel(1.01 * targets)
        res = evaluate(model, self._problem(), {"input": np.zeros((2, 9, 9))}, targets)
        assert np.abs(res.errors - 0.01).max() < 1e-12

    def test_zero_norm_target_excluded_and_counted(self):
        rng = np.random.default_rng(3)
        targets = _zero_boundary(rng.standard_normal((4, 1, 9, 9)))
        targets[2] = 0.0
        model = _ScriptedModel(targets.copy())
        res = evaluate(model, self._problem(), {"input": np.zeros((4, 9, 9))}, targets)
        assert res.excluded == 1
        assert res.count == 3

    def test_summary_stats_and_format(self):
        errors = np.array([0.01, 0.02, 0.03, 0.06])
        from vino.training import EvalSummary
        stats = EvalSummary(errors, excluded=0).stats()
        assert abs(stats["mean"] - errors.mean()) < 1e-15
        assert abs(stats["std"] - errors.std()) < 1e-15
        assert abs(stats["median"] - 0.025) < 1e-15
        assert stats["q1"] == pytest.approx(np.percentile(errors, 25))
        assert stats["mean_pm_std"] == "3.00% ± 1.87%"


class TestAssembleInputs:
    def test_1d_shape(self):
        problem = ProblemSpec("antiderivative1d", Grid1D(17))
        x = assemble_model_inputs(problem, {"input": np.zeros((3, 17))})
        assert x.shape == (3, 1, 17)

    def test_darcy_shape(self):
        problem = ProblemSpec("darcy2d", Grid2D(9, 7))
        x = assemble_model_inputs(problem, {"coefficient": np.zeros((2, 7, 9))})
        assert x.shape == (2, 1, 7, 9)

    def test_elasticity_channels_and_scaling(self):
        problem = ProblemSpec("elasticity2d", Grid2D(9, 5, 0, 1, 0, 0.1))
        inputs = {"coefficient": np.full((2, 5, 9), 380.0),
                  "traction": np.full((2, 9), 0.25)}
        x = assemble_model_inputs(problem, inputs)
        assert x.shape == (2, 2, 5, 9)
        assert np.all(x[:, 0] == 1.0)     # modulus normalized by the upper bound
        assert np.all(x[:, 1] == 0.25)    # traction broadcast down the columns

    def test_hyperelastic_broadcast(self):
        problem = ProblemSpec("hyperelastic2d", Grid2D(9, 5, 0, 4, 0, 1))
        x = assemble_model_inputs(problem, {"traction": np.arange(10.0).reshape(2, 5)})
        assert x.shape == (2, 1, 5, 9)
        assert np.all(x[0, 0, :, 3] == np.arange(5.0))

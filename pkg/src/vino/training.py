"""Adam minibatch training over any loss kind, with relative-L2 evaluation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grids import Grid1D, Grid2D
from .grf import MODULUS_SCALE
from .losses import (InvalidLossError, LossKind, ProblemSpec, apply_dirichlet,
                     combined_loss, data_loss, physics_loss)
from .tensor import Tensor, RngStream


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    # defaults calibrated on the 1-D benchmark: 3e-3 with halving every 300
    # iterations reaches the discrete minimum far closer in 1000 steps than
    # 1e-3 with halving every 200
    learning_rate: float = 3e-3
    iterations: int = 1000
    batch_size: int = 20
    seed: int = 0
    loss: LossKind = field(default_factory=lambda: LossKind("vino"))
    lr_gamma: float = 0.5
    lr_every: int = 300     # 0 disables the step schedule
    eval_every: int = 10

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def lr_at(self, iteration: int) -> float:
        if self.lr_every <= 0:
            return self.learning_rate
        return self.learning_rate * self.lr_gamma ** ((iteration - 1) // self.lr_every)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float | None] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,train_loss,test_loss,seconds\n")
            for i, (tr, te, sec) in enumerate(zip(self.train_loss, self.test_loss,
                                                  self.seconds), start=1):
                te_s = "" if te is None else repr(te)
                fh.write(f"{i},{tr!r},{te_s},{sec!r}\n")


class Adam:
    """Standard Adam with bias correction; complex parameters are updated as
    independent real/imaginary components."""

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros(self._view(p.data).shape) for p in self.params]
        self.v = [np.zeros(self._view(p.data).shape) for p in self.params]

    @staticmethod
    def _view(arr: np.ndarray) -> np.ndarray:
        if not np.iscomplexobj(arr):
            return arr
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)  # gradients may arrive as views
        return arr.view(np.float64)

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = self._view(p.grad_array())
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            view = self._view(p.data)
            view -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def assemble_model_inputs(problem: ProblemSpec, inputs: dict[str, np.ndarray],
                          idx: np.ndarray | None = None) -> np.ndarray:
    """Stack the per-role parameter fields into [batch, channels, grid...]."""
    pick = (lambda a: a) if idx is None else (lambda a: a[idx])
    if problem.pde in ("antiderivative1d", "poisson2d"):
        return pick(inputs["input"])[:, None]
    if problem.pde == "darcy2d":
        return pick(inputs["coefficient"])[:, None]
    grid = problem.grid
    if problem.pde == "elasticity2d":
        # modulus scaled to O(1); top-edge traction broadcast down the columns
        e = pick(inputs["coefficient"]) / MODULUS_SCALE
        t = pick(inputs["traction"])
        t2 = np.broadcast_to(t[:, None, :], e.shape)
        return np.stack([e, t2], axis=1)
    t = pick(inputs["traction"])  # right-edge traction, a function of y
    t2 = np.broadcast_to(t[:, :, None], (t.shape[0], grid.ny, grid.nx))
    return np.ascontiguousarray(t2[:, None])


def predict(model, problem: ProblemSpec, inputs: dict[str, np.ndarray],
            idx: np.ndarray | None = None) -> Tensor:
    """Model output with hard Dirichlet enforcement applied."""
    x = Tensor(assemble_model_inputs(problem, inputs, idx))
    return apply_dirichlet(model(x), problem.bc())


def _batch_loss(model, problem, kind: LossKind, inputs, targets, idx) -> Tensor:
    pred = predict(model, problem, inputs, idx)
    batch_inputs = {k: v[idx] for k, v in inputs.items()}
    physics = physics_loss(problem, kind, pred, batch_inputs) if kind.has_physics else None
    data = None
    if kind.needs_targets:
        if targets is None:
            raise ValueError(f"loss {kind.tag!r} needs targets, but the dataset has none")
        data = data_loss(pred, targets[idx], problem.grid.measure)
    return combined_loss(kind, physics, data)


def dataset_loss(model, problem, kind: LossKind, inputs, targets,
                 batch_size: int = 20) -> float:
    """Loss of `kind` over a whole dataset, evaluated in minibatches."""
    n = next(iter(inputs.values())).shape[0]
    total, seen = 0.0, 0
    for lo in range(0, n, batch_size):
        idx = np.arange(lo, min(lo + batch_size, n))
        total += _batch_loss(model, problem, kind, inputs, targets, idx).item() * len(idx)
        seen += len(idx)
    return total / seen


def train(model, problem: ProblemSpec, config: TrainConfig,
          inputs: dict[str, np.ndarray], targets: np.ndarray | None = None,
          test_inputs: dict[str, np.ndarray] | None = None,
          test_targets: np.ndarray | None = None) -> History:
    """Seeded minibatch training; one iteration is one Adam step."""
    n = next(iter(inputs.values())).shape[0]
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds dataset size {n}")
    if config.loss.needs_targets and targets is None:
        raise ValueError(f"loss {config.loss.tag!r} needs targets, but the dataset has none")
    opt = Adam(model.parameters())
    shuffle = RngStream(config.seed, stream=0x5348)
    history = History()
    order = np.arange(0)
    ptr = 0
    for it in range(1, config.iterations + 1):
        t0 = time.perf_counter()
        if ptr + config.batch_size > len(order):
            order = shuffle.permutation(n)
            ptr = 0
        idx = order[ptr:ptr + config.batch_size]
        ptr += config.batch_size
        opt.zero_grad()
        try:
            loss = _batch_loss(model, problem, config.loss, inputs, targets, idx)
        except InvalidLossError as exc:
            raise TrainingAborted(f"iteration {it}: {exc}") from exc
        loss.backward()
        for p in model.parameters():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise TrainingAborted(f"non-finite gradient at iteration {it}")
        opt.step(config.lr_at(it))
        history.train_loss.append(loss.item())
        test_val = None
        if test_inputs is not None and config.eval_every > 0 and it % config.eval_every == 0:
            test_val = dataset_loss(model, problem, config.loss, test_inputs,
                                    test_targets, config.batch_size)
        history.test_loss.append(test_val)
        history.seconds.append(time.perf_counter() - t0)
    return history


# -- evaluation ----------------------------------------------------------------

@dataclass
class EvalSummary:
    errors: np.ndarray
    excluded: int

    @property
    def count(self) -> int:
        return int(self.errors.size)

    def stats(self) -> dict:
        e = self.errors
        if e.size == 0:
            return {"count": 0, "excluded": self.excluded}
        q1, med, q3 = np.percentile(e, [25, 50, 75])
        mean, std = float(e.mean()), float(e.std())
        return {
            "count": int(e.size),
            "excluded": self.excluded,
            "mean": mean,
            "std": std,
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "mean_pm_std": f"{100 * mean:.2f}% ± {100 * std:.2f}%",
        }


def evaluate(model, problem: ProblemSpec, inputs: dict[str, np.ndarray],
             targets: np.ndarray, batch_size: int = 20) -> EvalSummary:
    """Per-sample relative L2 error over nodal values."""
    if targets is None:
        raise ValueError("evaluation requires targets")
    n = targets.shape[0]
    errors, excluded = [], 0
    for lo in range(0, n, batch_size):
        idx = np.arange(lo, min(lo + batch_size, n))
        pred = predict(model, problem, inputs, idx).data
        for k, i in enumerate(idx):
            t = targets[i].reshape(-1)
            norm = np.linalg.norm(t)
            if norm == 0.0:
                excluded += 1
                continue
            errors.append(np.linalg.norm(pred[k].reshape(-1) - t) / norm)
    return EvalSummary(np.asarray(errors), excluded)

"""Command-line driver: dataset generation, training, evaluation, and the
integration-scheme and mesh-convergence studies.

Every command is deterministic given its seed; rerunning with identical
arguments reproduces outputs bit for bit.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .fno import FnoConfig, FnoModel
from .grf import (GrfSampler, GrfSpec, cached_sampler, darcy_coefficient,
                  traction_and_modulus)
from .grids import Field, Grid1D, Grid2D
from .losses import LossKind, ProblemSpec
from .solvers import (solve_antiderivative_1d, solve_darcy_2d,
                      solve_elasticity_2d, solve_poisson_2d)
from .tensor import RngStream
from .training import TrainConfig, TrainingAborted, evaluate, train

LOSS_FLAGS = {
    "data": LossKind("data"),
    "strong": LossKind("strong"),
    "vino": LossKind("vino"),
    "strong+data": LossKind("strong_plus_data"),
    "vino+data": LossKind("vino_plus_data"),
}

DEFAULT_GRF_LENGTH_SCALE = 0.1
DEFAULT_GRIDS = {
    "antiderivative1d": (256,),
    "poisson2d": (64, 64),
    "darcy2d": (64, 64),
    "elasticity2d": (64, 32),
    "hyperelastic2d": (64, 16),
}
MESH_STUDY_SOFT_CAP = 64


def make_grid(problem_tag: str, shape: tuple[int, ...]):
    if problem_tag == "antiderivative1d":
        return Grid1D(shape[0])
    nx, ny = shape
    if problem_tag == "elasticity2d":
        return Grid2D(nx, ny, 0.0, 1.0, 0.0, 0.1)
    if problem_tag == "hyperelastic2d":
        return Grid2D(nx, ny, 0.0, 4.0, 0.0, 1.0)
    return Grid2D(nx, ny)


def default_model_config(problem: ProblemSpec, width=None, modes=None,
                         layers=None) -> FnoConfig:
    if isinstance(problem.grid, Grid1D):
        return FnoConfig(1, problem.in_channels, problem.out_channels,
                         width=width or 64, modes=modes or 16, layers=layers or 4)
    return FnoConfig(2, problem.in_channels, problem.out_channels,
                     width=width or 32, modes=modes or 12, layers=layers or 4)


# -- generate --------------------------------------------------------------------

def _generate_sample(problem: ProblemSpec, sampler, stream: RngStream,
                     with_target: bool):
    grid = problem.grid
    if problem.pde == "antiderivative1d":
        p = sampler.sample(stream)
        target = solve_antiderivative_1d(p).values if with_target else None
        return {"input": p.values}, target
    if problem.pde == "poisson2d":
        f = sampler.sample(stream)
        target = solve_poisson_2d(f).values if with_target else None
        return {"input": f.values}, target
    if problem.pde == "darcy2d":
        g = sampler.sample(stream)
        p = darcy_coefficient(g)
        target = solve_darcy_2d(p).values if with_target else None
        return {"coefficient": p.values}, target
    if problem.pde == "elasticity2d":
        traction, modulus = traction_and_modulus(grid, stream)
        target = None
        if with_target:
            target = solve_elasticity_2d(modulus, traction, problem.nu)
        return {"coefficient": modulus.values, "traction": traction.values}, target
    # hyperelastic2d: right-edge traction only; no linear reference solver exists
    edge = Grid1D(grid.ny, grid.y0, grid.y1)
    t_raw = cached_sampler(GrfSpec(DEFAULT_GRF_LENGTH_SCALE, 0.0, edge)).sample(stream)
    return {"traction": 0.15 * t_raw.values + 0.2}, None


def cmd_generate(problem_tag: str, n_train: int, n_test: int,
                 grid_shape: tuple[int, ...] | None, seed: int, out_dir,
                 length_scale: float = DEFAULT_GRF_LENGTH_SCALE) -> dict:
    """Write a dataset directory: one tensor file per sample and role, plus a
    manifest that fully determines regeneration."""
    if problem_tag not in DEFAULT_GRIDS:
        raise ValueError(f"unknown problem {problem_tag!r}")
    shape = grid_shape or DEFAULT_GRIDS[problem_tag]
    grid = make_grid(problem_tag, shape)
    problem = ProblemSpec(problem_tag, grid)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sampler = None
    if problem_tag in ("antiderivative1d", "poisson2d", "darcy2d"):
        sampler = GrfSampler(GrfSpec(length_scale, 0.0, grid))
    with_target = problem_tag != "hyperelastic2d"

    files = []
    for split, count, offset in (("train", n_train, 0), ("test", n_test, n_train)):
        for k in range(count):
            index = offset + k
            stream = RngStream(seed, index)
            inputs, target = _generate_sample(problem, sampler, stream, with_target)
            for role, values in inputs.items():
                name = f"{split}_{k:04d}.{role}.vt"
                io.write_tensor(out_dir / name, values)
                files.append({"path": name, "role": role, "split": split, "index": k})
            if target is not None:
                name = f"{split}_{k:04d}.target.vt"
                io.write_tensor(out_dir / name, target)
                files.append({"path": name, "role": "target", "split": split, "index": k})

    manifest = {
        "problem": problem_tag,
        "generator_version": io.GENERATOR_VERSION,
        "grid": io.grid_to_dict(grid),
        "counts": {"train": n_train, "test": n_test},
        "seed": seed,
        "grf": {"length_scale": length_scale, "mean": 0.0, "jitter": 1e-8},
        "files": sorted(files, key=lambda f: f["path"]),
    }
    if problem_tag == "darcy2d":
        manifest["darcy"] = {"low": 3.0, "high": 12.0, "threshold": 0.0,
                             "ratio": 4.0}
    if problem_tag == "elasticity2d":
        manifest["material"] = {"nu": problem.nu}
        manifest["grf"] = {"traction": {"length_scale": 0.1, "std": 0.15, "mean": 0.2},
                           "modulus": {"length_scale": 0.025, "range": [20.0, 380.0]},
                           "jitter": 1e-8}
    if problem_tag == "hyperelastic2d":
        manifest["material"] = {"nu": problem.nu,
                                "mooney": {"c": problem.mooney.c, "c1": problem.mooney.c1,
                                           "c2": problem.mooney.c2}}
    io.write_manifest(out_dir, manifest)
    return manifest


# -- train / eval ------------------------------------------------------------------

def cmd_train(dataset_dir, kind: LossKind, train_config: TrainConfig,
              out_checkpoint, width=None, modes=None, layers=None,
              model_seed: int | None = None):
    """Train one model on a dataset directory; writes checkpoint + history CSV."""
    ds = io.load_dataset(dataset_dir, "train", need_targets=kind.needs_targets)
    if kind.needs_targets and ds.targets is None:
        raise ValueError(f"loss {kind.tag!r} needs targets, but dataset "
                         f"{dataset_dir} provides none")
    try:
        ds_test = io.load_dataset(dataset_dir, "test", need_targets=kind.needs_targets)
        test_inputs, test_targets = ds_test.inputs, ds_test.targets
    except ValueError:
        test_inputs, test_targets = None, None
    config = default_model_config(ds.problem, width, modes, layers)
    model = FnoModel(config, seed=train_config.seed if model_seed is None else model_seed)
    history = train(model, ds.problem, train_config, ds.inputs, ds.targets,
                    test_inputs, test_targets)
    out_checkpoint = Path(out_checkpoint)
    out_checkpoint.parent.mkdir(parents=True, exist_ok=True)
    io.save_checkpoint(out_checkpoint, model, meta={
        "dataset": str(dataset_dir),
        "problem": ds.problem.pde,
        "loss": {"tag": kind.tag, "data_weight": kind.data_weight, "scheme": kind.scheme},
        "iterations": train_config.iterations,
        "train_seed": train_config.seed,
    })
    history.to_csv(str(out_checkpoint) + ".history.csv")
    return model, history


def cmd_eval(checkpoint, dataset_dir, report_path) -> dict:
    """Per-sample relative-L2 CSV plus a JSON summary, on both dataset splits."""
    model, header = io.load_checkpoint(checkpoint)
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    summary = {}
    rows = []
    for split in ("train", "test"):
        ds = io.load_dataset(dataset_dir, split, need_targets=True)
        if ds.targets is None:
            raise ValueError(f"dataset split {split!r} has no targets to evaluate against")
        if model.config.in_channels != ds.problem.in_channels \
                or model.config.out_channels != ds.problem.out_channels:
            raise ValueError(
                f"checkpoint/dataset mismatch: model has {model.config.in_channels} in / "
                f"{model.config.out_channels} out channels, problem {ds.problem.pde} needs "
                f"{ds.problem.in_channels} in / {ds.problem.out_channels} out")
        result = evaluate(model, ds.problem, ds.inputs, ds.targets)
        summary[split] = result.stats()
        rows.extend((split, i, float(err)) for i, err in enumerate(result.errors))
    with open(str(report_path) + ".csv", "w") as fh:
        fh.write("split,index,rel_l2\n")
        for split, i, err in rows:
            fh.write(f"{split},{i},{err!r}\n")
    Path(str(report_path) + ".json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# -- studies -----------------------------------------------------------------------

def cmd_compare_integration(grid: int = 16, seed: int = 0, out=None,
                            n_train: int = 300, n_test: int = 50,
                            iterations: int = 1000, width: int = 32,
                            modes: int = 6, batch_size: int = 20) -> dict:
    """Train the three quadrature+FD baselines and the element-wise variational
    loss on one coarse Poisson problem with identical configs and seeds.

    `grid` counts elements per axis; nodes are grid+1 so Simpson's odd-count
    precondition holds.
    """
    out = Path(out) if out else Path("integration_study")
    out.mkdir(parents=True, exist_ok=True)
    nodes = grid + 1
    data_dir = out / "dataset"
    cmd_generate("poisson2d", n_train, n_test, (nodes, nodes), seed, data_dir)
    methods = (("midpoint", LossKind("quadrature_baseline", scheme="midpoint")),
               ("trapezoid", LossKind("quadrature_baseline", scheme="trapezoid")),
               ("simpson", LossKind("quadrature_baseline", scheme="simpson")),
               ("vino", LossKind("vino")))
    results = {}
    for name, kind in methods:
        tc = TrainConfig(iterations=iterations, seed=seed, loss=kind,
                         batch_size=batch_size)
        model, _ = cmd_train(data_dir, kind, tc, out / f"model_{name}.ckpt",
                             width=width, modes=modes)
        ds_test = io.load_dataset(data_dir, "test")
        results[name] = evaluate(model, ds_test.problem, ds_test.inputs,
                                 ds_test.targets).stats()
    vino_mean = results["vino"]["mean"]
    report = {"grid_elements": grid, "nodes": nodes, "seed": seed,
              "iterations": iterations, "methods": {}}
    for name, _ in methods:
        report["methods"][name] = dict(results[name],
                                       ratio_vs_vino=results[name]["mean"] / vino_mean)
    with open(out / "integration_report.csv", "w") as fh:
        fh.write("method,mean_rel_l2,std,median,ratio_vs_vino\n")
        for name, _ in methods:
            r = report["methods"][name]
            fh.write(f"{name},{r['mean']!r},{r['std']!r},{r['median']!r},"
                     f"{r['ratio_vs_vino']!r}\n")
    (out / "integration_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_mesh_study(sizes=(16, 32, 64), methods=("fno", "strong", "vino"),
                   seed: int = 0, out=None, n_train: int = 200, n_test: int = 50,
                   iterations: int = 1000, width: int = 32, modes: int = 8,
                   batch_size: int = 10, allow_large: bool = False) -> dict:
    """Darcy-flow error vs mesh size, identical hyperparameters at every size."""
    if any(s < 8 for s in sizes):
        raise ValueError("mesh-study sizes must be at least 8")
    for s in sizes:
        if s > MESH_STUDY_SOFT_CAP:
            if not allow_large:
                raise ValueError(f"size {s} exceeds the {MESH_STUDY_SOFT_CAP}^2 "
                                 f"desk-scale cap; pass --allow-large to run it")
            print(f"warning: size {s} exceeds the default {MESH_STUDY_SOFT_CAP}^2 "
                  f"desk-scale cap; expect a long run", file=sys.stderr)
    kind_of = {"fno": LossKind("data"), "strong": LossKind("strong"),
               "vino": LossKind("vino")}
    out = Path(out) if out else Path("mesh_study")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    report = {"seed": seed, "iterations": iterations, "sizes": list(sizes),
              "methods": list(methods), "cells": {}}
    for size in sizes:
        data_dir = out / f"darcy_{size}"
        cmd_generate("darcy2d", n_train, n_test, (size, size), seed, data_dir)
        for method in methods:
            kind = kind_of[method]
            tc = TrainConfig(iterations=iterations, seed=seed, loss=kind,
                             batch_size=batch_size)
            model, _ = cmd_train(data_dir, kind, tc,
                                 out / f"model_{method}_{size}.ckpt",
                                 width=width, modes=modes)
            ds_test = io.load_dataset(data_dir, "test")
            stats = evaluate(model, ds_test.problem, ds_test.inputs,
                             ds_test.targets).stats()
            report["cells"][f"{method}@{size}"] = stats
            rows.append((size, method, stats))
    with open(out / "mesh_study.csv", "w") as fh:
        fh.write("size,method,count,mean,std,median,q1,q3\n")
        for size, method, s in rows:
            fh.write(f"{size},{method},{s['count']},{s['mean']!r},{s['std']!r},"
                     f"{s['median']!r},{s['q1']!r},{s['q3']!r}\n")
    (out / "mesh_study.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


# -- argument parsing ---------------------------------------------------------------

def _parse_grid(text: str) -> tuple[int, ...]:
    parts = text.lower().split("x")
    return tuple(int(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vino",
                                     description="Variational neural-operator benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample input functions and reference solutions")
    g.add_argument("--problem", required=True, choices=sorted(DEFAULT_GRIDS))
    g.add_argument("--n-train", type=int, default=1000)
    g.add_argument("--n-test", type=int, default=100)
    g.add_argument("--grid", type=_parse_grid, default=None,
                   help="e.g. 256 or 64x64 (defaults per problem)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--length-scale", type=float, default=DEFAULT_GRF_LENGTH_SCALE)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train one model on a dataset directory")
    t.add_argument("dataset")
    t.add_argument("--loss", required=True, choices=sorted(LOSS_FLAGS))
    t.add_argument("--data-weight", type=float, default=1.0)
    t.add_argument("--lr", type=float, default=3e-3)
    t.add_argument("--iters", type=int, default=1000)
    t.add_argument("--batch", type=int, default=20)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--width", type=int, default=None)
    t.add_argument("--modes", type=int, default=None)
    t.add_argument("--layers", type=int, default=None)
    t.add_argument("--out", required=True, help="checkpoint path")

    e = sub.add_parser("eval", help="relative-L2 report for a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("dataset")
    e.add_argument("--out", required=True, help="report path (writes .json and .csv)")

    c = sub.add_parser("compare-integration",
                       help="quadrature+FD baselines vs element-wise variational loss")
    c.add_argument("--grid", type=int, default=16, help="elements per axis")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--n-train", type=int, default=300)
    c.add_argument("--n-test", type=int, default=50)
    c.add_argument("--iters", type=int, default=1000)
    c.add_argument("--out", required=True)

    m = sub.add_parser("mesh-study", help="error vs mesh size on Darcy flow")
    m.add_argument("--sizes", type=lambda s: tuple(int(x) for x in s.split(",")),
                   default=(16, 32, 64))
    m.add_argument("--methods", type=lambda s: tuple(s.split(",")),
                   default=("fno", "strong", "vino"))
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--n-train", type=int, default=200)
    m.add_argument("--n-test", type=int, default=50)
    m.add_argument("--iters", type=int, default=1000)
    m.add_argument("--allow-large", action="store_true",
                   help="permit sizes beyond 64 per axis (long runs)")
    m.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            cmd_generate(args.problem, args.n_train, args.n_test, args.grid,
                         args.seed, args.out, args.length_scale)
        elif args.command == "train":
            kind = LOSS_FLAGS[args.loss]
            if kind.needs_targets:
                kind = LossKind(kind.tag, data_weight=args.data_weight)
            tc = TrainConfig(learning_rate=args.lr, iterations=args.iters,
                             batch_size=args.batch, seed=args.seed, loss=kind)
            cmd_train(args.dataset, kind, tc, args.out, width=args.width,
                      modes=args.modes, layers=args.layers)
        elif args.command == "eval":
            summary = cmd_eval(args.checkpoint, args.dataset, args.out)
            print(json.dumps(summary, indent=2, sort_keys=True))
        elif args.command == "compare-integration":
            report = cmd_compare_integration(args.grid, args.seed, args.out,
                                             args.n_train, args.n_test, args.iters)
            for name, r in report["methods"].items():
                print(f"{name}: mean rel L2 {r['mean']:.4f} (x{r['ratio_vs_vino']:.1f} vs vino)")
        elif args.command == "mesh-study":
            report = cmd_mesh_study(args.sizes, args.methods, args.seed, args.out,
                                    args.n_train, args.n_test, args.iters,
                                    allow_large=args.allow_large)
            for key, stats in report["cells"].items():
                print(f"{key}: median rel L2 {stats['median']:.4f}")
    except (ValueError, OSError, TrainingAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

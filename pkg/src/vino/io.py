"""Bit-exact binary tensor files, dataset manifests, and model checkpoints.

TensorFile layout (little-endian):

    magic "VINO" | version u8 (0x01) | dtype u8 (0x01 = float64) |
    ndim u8 | extents u64 * ndim | row-major float64 payload
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fno import FnoConfig, FnoModel
from .grids import Grid1D, Grid2D
from .losses import MooneyRivlin, ProblemSpec

MAGIC = b"VINO"
VERSION = 1
DTYPE_FLOAT64 = 1
CHECKPOINT_MAGIC = b"VINOCKPT"
GENERATOR_VERSION = "0.1.0"


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_FLOAT64, arr.ndim)
    extents = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return header + extents + arr.tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    if buf[offset:offset + 4] != MAGIC:
        raise ValueError(f"bad tensor magic {buf[offset:offset + 4]!r}")
    version, dtype, ndim = struct.unpack_from("<BBB", buf, offset + 4)
    if version != VERSION:
        raise ValueError(f"unsupported tensor file version {version}")
    if dtype != DTYPE_FLOAT64:
        raise ValueError(f"unsupported dtype code {dtype:#x}")
    pos = offset + 7
    shape = struct.unpack_from(f"<{ndim}Q", buf, pos) if ndim else ()
    pos += 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape)
    return arr.astype(np.float64), pos + 8 * count


def write_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_to_bytes(arr))


def read_tensor(path) -> np.ndarray:
    arr, _ = tensor_from_bytes(Path(path).read_bytes())
    return arr


# -- manifests and datasets ------------------------------------------------------

def grid_to_dict(grid) -> dict:
    if isinstance(grid, Grid1D):
        return {"dim": 1, "n": grid.n, "extent": [grid.x0, grid.x1]}
    return {"dim": 2, "nx": grid.nx, "ny": grid.ny,
            "extent_x": [grid.x0, grid.x1], "extent_y": [grid.y0, grid.y1]}


def grid_from_dict(d: dict):
    if d["dim"] == 1:
        return Grid1D(d["n"], *d["extent"])
    return Grid2D(d["nx"], d["ny"], *d["extent_x"], *d["extent_y"])


def problem_from_manifest(manifest: dict) -> ProblemSpec:
    grid = grid_from_dict(manifest["grid"])
    mat = manifest.get("material", {})
    mooney = MooneyRivlin(**mat["mooney"]) if "mooney" in mat else MooneyRivlin()
    return ProblemSpec(manifest["problem"], grid, nu=mat.get("nu", 1.0 / 3.0),
                       mooney=mooney)


def write_manifest(out_dir, manifest: dict) -> None:
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json in {dataset_dir}")
    return json.loads(path.read_text())


@dataclass
class Dataset:
    problem: ProblemSpec
    manifest: dict
    inputs: dict[str, np.ndarray]      # role -> [N, ...]
    targets: np.ndarray | None         # [N, channels, grid...]

    @property
    def n(self) -> int:
        return next(iter(self.inputs.values())).shape[0]


def load_dataset(dataset_dir, split: str = "train", need_targets: bool = True) -> Dataset:
    """Read one split; target files are only opened when need_targets is set."""
    dataset_dir = Path(dataset_dir)
    manifest = read_manifest(dataset_dir)
    problem = problem_from_manifest(manifest)
    records = [f for f in manifest["files"] if f["split"] == split]
    if not records:
        raise ValueError(f"dataset {dataset_dir} has no {split!r} split")
    by_index: dict[int, dict[str, str]] = {}
    for rec in records:
        by_index.setdefault(rec["index"], {})[rec["role"]] = rec["path"]
    roles = sorted({rec["role"] for rec in records if rec["role"] != "target"})
    inputs = {role: [] for role in roles}
    targets = []
    have_targets = True
    for index in sorted(by_index):
        paths = by_index[index]
        for role in roles:
            inputs[role].append(read_tensor(dataset_dir / paths[role]))
        if need_targets:
            if "target" not in paths:
                have_targets = False
            else:
                targets.append(read_tensor(dataset_dir / paths["target"]))
    stacked = {role: np.stack(vals) for role, vals in inputs.items()}
    target_arr = None
    if need_targets and have_targets and targets:
        target_arr = np.stack(targets)
        scalar_ndim = 2 if isinstance(problem.grid, Grid1D) else 3
        if target_arr.ndim == scalar_ndim:  # scalar fields: add the channel axis
            target_arr = target_arr[:, None]
    return Dataset(problem, manifest, stacked, target_arr)


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(path, model: FnoModel, meta: dict | None = None) -> None:
    state = model.state_dict()
    names = sorted(state)
    header = {
        "format": 1,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "params": names,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(tensor_to_bytes(state[name]))


def load_checkpoint(path) -> tuple[FnoModel, dict]:
    buf = Path(path).read_bytes()
    if buf[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack_from("<I", buf, 8)
    header = json.loads(buf[12:12 + hlen].decode())
    model = FnoModel(FnoConfig(**header["config"]), seed=header["seed"])
    state = {}
    pos = 12 + hlen
    for name in header["params"]:
        arr, pos = tensor_from_bytes(buf, pos)
        state[name] = arr
    model.load_state_dict(state)
    return model, header

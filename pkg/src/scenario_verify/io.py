"""CSV and JSON artifacts.

Floats are written in their shortest round-trip form (Python ``repr``), so a
dumped trajectory or sample set reloads bit for bit.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .risk_core import SampleSet
from .robot_sim import SimConfig, Trajectory
from .seeding import RngSeed


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def fmt(x: float) -> str:
    return repr(float(x))


def sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# --- scalar samples ----------------------------------------------------------------


def write_samples_csv(path, samples: SampleSet) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("value\n")
        for v in samples.values:
            fh.write(fmt(v) + "\n")
    if samples.seed is not None:
        dump_json(samples.seed.to_dict(), sidecar(path, ".seed.json"))


def read_samples_csv(path) -> SampleSet:
    path = Path(path)
    values = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                if [c.strip() for c in row] != ["value"]:
                    raise FormatError(path, 1, f"expected header 'value', got {','.join(row)!r}")
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 1:
                raise FormatError(path, lineno, f"expected one column, got {len(row)}")
            try:
                v = float(row[0])
            except ValueError:
                raise FormatError(path, lineno, f"not a number: {row[0]!r}") from None
            if not np.isfinite(v):
                raise FormatError(path, lineno, f"non-finite value {row[0]!r}")
            values.append(v)
    if not values:
        raise FormatError(path, 1, "no samples")
    seed_path = sidecar(path, ".seed.json")
    seed = RngSeed.from_dict(json.loads(seed_path.read_text())) if seed_path.exists() else None
    return SampleSet(values, seed=seed)


# --- trajectories ------------------------------------------------------------------


def trajectory_header(robot_count: int) -> List[str]:
    cols = ["t"]
    for i in range(1, robot_count + 1):
        cols += [f"x{i}", f"y{i}", f"th{i}"]
    return cols


def write_trajectory(path, traj: Trajectory, cfg: SimConfig, seed: Optional[RngSeed] = None, extra=None) -> None:
    path = Path(path)
    n = traj.states.shape[1]
    with path.open("w", newline="") as fh:
        fh.write(",".join(trajectory_header(n)) + "\n")
        for k, state in enumerate(traj.states):
            fh.write(",".join([fmt(k * traj.dt)] + [fmt(v) for v in state.reshape(-1)]) + "\n")
    meta = {
        "goals": [[float(g[0]), float(g[1])] for g in traj.goals],
        "config": cfg.to_dict(),
        "seed": None if seed is None else seed.to_dict(),
        "fallback_steps": list(traj.fallback_steps),
    }
    if extra:
        meta.update(extra)
    dump_json(meta, sidecar(path, ".json"))


def read_trajectory(path) -> Tuple[Trajectory, dict]:
    path = Path(path)
    meta = json.loads(sidecar(path, ".json").read_text())
    cfg = SimConfig(**meta["config"])
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = (len(header) - 1) // 3
        if header != trajectory_header(n):
            raise FormatError(path, 1, "bad trajectory header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(path, lineno, f"expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise FormatError(path, lineno, str(exc)) from None
    states = np.array(rows).reshape(len(rows), n, 3)
    traj = Trajectory(
        states=states,
        goals=np.array(meta["goals"], dtype=np.float64),
        dt=cfg.dt,
        horizon=cfg.horizon,
        fallback_steps=list(meta.get("fallback_steps", [])),
    )
    return traj, meta


# --- robustness samples ------------------------------------------------------------


def write_robustness_csv(path, samples: Sequence) -> None:
    """``index,r,seed_stream`` plus an ``<stem>.inputs.csv`` sidecar of (x0, theta) rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("index,r,seed_stream\n")
        for i, s in enumerate(samples):
            fh.write(f"{i},{fmt(s.r)},{s.seed.stream}\n")
    if not samples:
        return
    n = np.asarray(samples[0].x0).reshape(-1, 3).shape[0]
    cols = ["index"] + trajectory_header(n)[1:] + [f"g{a}{i}" for i in range(1, n + 1) for a in "xy"]
    with sidecar(path, ".inputs.csv").open("w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i, s in enumerate(samples):
            vals = list(np.asarray(s.x0).reshape(-1)) + list(np.asarray(s.theta).reshape(-1))
            fh.write(",".join([str(i)] + [fmt(v) for v in vals]) + "\n")

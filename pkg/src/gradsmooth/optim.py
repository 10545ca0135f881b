"""Gradient descent on smoothed objectives.

Plain descent is enough to demonstrate that the smoothed gradients drive
optimization of discontinuous objectives: each step draws a fresh
perturbation plan (seeded by the step index, so runs are reproducible),
estimates the gradient, and takes a step. An optional per-step decay
factor shrinks the smoothing scale as the iterate approaches a minimum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .estimators import BlackBox, SmoothingConfig, jacobian
from .sampling import make_plan, transform

__all__ = ["TrajectoryPoint", "minimize", "format_trajectory_csv", "write_trajectory_csv"]


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    x: np.ndarray
    fx: float
    gamma: float


def minimize(
    f: BlackBox,
    cfg: SmoothingConfig,
    x0,
    steps,
    lr,
    schedule=None,
    seed=0,
):
    """Descend the smoothed gradient of a scalar black box.

    Returns the trajectory as a list of (step, x, f(x), gamma) records of
    length ``steps + 1``, starting at x0. ``schedule``, if given, must
    lie in (0, 1] and multiplies gamma after every step.
    """
    if f.m != 1:
        raise ValueError(f"minimize needs a scalar objective, got m={f.m}")
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if schedule is not None and not 0.0 < schedule <= 1.0:
        raise ValueError(f"gamma decay factor must be in (0, 1], got {schedule}")
    if cfg.is_matrix_scale:
        raise ValueError("minimize uses a scalar smoothing scale")
    x = np.asarray(x0, dtype=float).reshape(f.n).copy()
    gamma = cfg.gamma
    trajectory = [TrajectoryPoint(0, x.copy(), float(f(x)[0]), gamma)]
    for step in range(1, steps + 1):
        step_cfg = replace(cfg, gamma=gamma)
        plan_seed = int(np.random.SeedSequence([seed, step]).generate_state(1)[0])
        plan = transform(
            make_plan(cfg.strategy, cfg.samples, f.n, plan_seed), cfg.distribution
        )
        grad = jacobian(f, x, step_cfg, plan)[0]
        x = x - lr * grad
        if schedule is not None:
            gamma *= schedule
        trajectory.append(TrajectoryPoint(step, x.copy(), float(f(x)[0]), gamma))
    return trajectory


def format_trajectory_csv(trajectory, command=None) -> str:
    """CSV text: step, x..., fx, gamma, with '#' header comments."""
    buf = io.StringIO()
    buf.write("# gradsmooth optimize trajectory\n")
    if command:
        buf.write(f"# command: {command}\n")
    n = trajectory[0].x.size
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step"] + [f"x{i}" for i in range(n)] + ["fx", "gamma"])
    for point in trajectory:
        writer.writerow(
            [point.step]
            + [repr(float(v)) for v in point.x]
            + [repr(point.fx), repr(point.gamma)]
        )
    return buf.getvalue()


def write_trajectory_csv(trajectory, path, command=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trajectory_csv(trajectory, command=command))

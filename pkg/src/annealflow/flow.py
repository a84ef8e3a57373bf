"""ODE integration of flow blocks and push-forward sampling.

Each block integrates its velocity field over the local time interval
``[0, 1]`` with ``S`` classical RK4 steps of size ``1/S``.  The waypoints
``x(s/S)`` feed both the squared-displacement penalty and the trapezoid
quadrature of the divergence line integral.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .densities import as_tensor
from .errors import NumericalError, ValidationError
from .net import VelocityNet, exact_divergence, load_net, save_net

Field = Callable[[torch.Tensor, float], torch.Tensor]


def _finite(a) -> bool:
    if isinstance(a, torch.Tensor):
        return bool(torch.isfinite(a).all())
    return bool(np.all(np.isfinite(a)))


def rk4_step(field: Field, x, t: float, h: float):
    """One classical Runge-Kutta step ``x + h/6 (k1 + 2 k2 + 2 k3 + k4)``.

    Works on whatever array type ``field`` consumes and returns.
    """
    if not h > 0:
        raise ValidationError("rk4_step needs h > 0")
    k1 = field(x, t)
    k2 = field(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = field(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = field(x + h * k3, t + h)
    for i, k in enumerate((k1, k2, k3, k4), start=1):
        if not _finite(k):
            raise NumericalError(f"rk4_step: non-finite stage k{i} at t={t}")
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_with_k1(field, x, t, h):
    k1 = field(x, t)
    k2 = field(x + 0.5 * h * k1, t + 0.5 * h)
    k3 = field(x + 0.5 * h * k2, t + 0.5 * h)
    k4 = field(x + h * k3, t + h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


@dataclass
class FlowBlock:
    net: VelocityNet
    num_substeps: int = 3
    index: int = 1

    def __post_init__(self):
        if self.num_substeps < 1:
            raise ValidationError("a block needs at least one sub-step")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_substeps + 1) / self.num_substeps


@dataclass
class Trajectory:
    """Waypoints ``(S+1, n, d)``, per-row divergence integral ``(n,)`` and
    squared segment lengths ``(S, n)``.  ``velocities`` holds ``v(x_s, s/S)``
    at every waypoint when recorded."""

    waypoints: torch.Tensor
    divergence: Optional[torch.Tensor]
    displacements: torch.Tensor
    velocities: Optional[torch.Tensor] = None

    @property
    def endpoint(self) -> torch.Tensor:
        return self.waypoints[-1]


def trapezoid_weights(num_intervals: int) -> torch.Tensor:
    w = torch.full((num_intervals + 1,), 1.0 / num_intervals, dtype=torch.float64)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate_block(block: FlowBlock, x0, record: bool = False, hutchinson: Optional[dict] = None) -> Trajectory:
    """Integrate one block from ``x0`` (``(n, d)``) over local time [0, 1].

    With ``record`` the divergence line integral is accumulated by the
    trapezoid rule on the ``S + 1`` waypoints.  Passing ``hutchinson`` (a dict
    with ``sigma`` and ``eps`` of shape ``(S+1, P, n, d)``) switches the
    divergence nodes to the differentiable finite-difference Hutchinson
    estimator used in training; otherwise :func:`exact_divergence` is used.
    """
    x = as_tensor(x0)
    if not _finite(x):
        raise ValidationError("integrate_block: non-finite start point")
    S = block.num_substeps
    h = 1.0 / S
    net = block.net
    points = [x]
    vels = []
    for s in range(S):
        x, k1 = _rk4_with_k1(net, x, s * h, h)
        if not _finite(x):
            raise NumericalError(f"integrate_block: non-finite state after sub-step {s + 1}")
        points.append(x)
        vels.append(k1)
    waypoints = torch.stack(points)
    disp = ((waypoints[1:] - waypoints[:-1]) ** 2).sum(-1)
    divergence = None
    velocities = None
    if record:
        vels.append(net(x, 1.0))
        velocities = torch.stack(vels)
        times = torch.as_tensor(block.times)
        if hutchinson is not None:
            # all S+1 probe evaluations share one forward pass
            eps = hutchinson["eps"]  # (S+1, P, n, d)
            sigma = hutchinson["sigma"]
            t_nodes = times.reshape(-1, 1, 1).expand(eps.shape[:-1])
            v_pert = net(waypoints.unsqueeze(1) + sigma * eps, t_nodes)
            nodes = (((v_pert - velocities.unsqueeze(1)) * eps).sum(-1) / sigma).mean(1)
        else:
            nodes = torch.stack([exact_divergence(net, waypoints[s], float(times[s])) for s in range(S + 1)])
        divergence = (trapezoid_weights(S).unsqueeze(-1) * nodes).sum(0)
    return Trajectory(waypoints, divergence, disp, velocities)


@dataclass
class AnnealingFlowModel:
    """Ordered trained blocks plus the metadata needed to reproduce them."""

    dim: int
    blocks: list = field(default_factory=list)
    path_spec: dict = field(default_factory=dict)
    target_spec: dict = field(default_factory=dict)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def add(self, block: FlowBlock) -> None:
        if block.net.dim != self.dim:
            raise ValidationError(f"block dim {block.net.dim} does not match model dim {self.dim}")
        self.blocks.append(block)


def _block_map(block: FlowBlock, x: torch.Tensor) -> torch.Tensor:
    S = block.num_substeps
    h = 1.0 / S
    for s in range(S):
        x = rk4_step(block.net, x, s * h, h)
    return x


def push_forward(model: AnnealingFlowModel, batch, upto_block: Optional[int] = None,
                 start_block: int = 0, chunk: int = 50_000) -> np.ndarray:
    """Map rows of ``batch`` through blocks ``start_block+1 .. upto_block``."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.dim:
        raise ValidationError(f"push_forward: batch must have {model.dim} columns")
    upto = model.num_blocks if upto_block is None else upto_block
    if not 0 <= start_block <= upto <= model.num_blocks:
        raise ValidationError("push_forward: block range out of bounds")
    out = np.empty_like(batch)
    with torch.no_grad():
        for i in range(0, len(batch), chunk):
            x = torch.as_tensor(batch[i:i + chunk])
            for block in model.blocks[start_block:upto]:
                x = _block_map(block, x)
            out[i:i + chunk] = x.numpy()
    return out


def log_density_change(model: AnnealingFlowModel, x0, upto_block: Optional[int] = None,
                       quad_factor: int = 3) -> np.ndarray:
    """``log rho_end(x_end) - log pi0(x0)`` for each row of ``x0``.

    Integrates ``-div v`` along each trajectory with :func:`exact_divergence`
    and the trapezoid rule on ``quad_factor * S`` RK4 nodes per block.
    """
    x = as_tensor(np.atleast_2d(np.asarray(x0, dtype=np.float64)))
    if x.shape[1] != model.dim:
        raise ValidationError(f"log_density_change: points must have {model.dim} columns")
    upto = model.num_blocks if upto_block is None else upto_block
    total = torch.zeros(len(x), dtype=torch.float64)
    with torch.no_grad():
        for block in model.blocks[:upto]:
            fine = FlowBlock(block.net, block.num_substeps * quad_factor, block.index)
            traj = integrate_block(fine, x, record=True)
            total -= traj.divergence
            x = traj.endpoint
    return total.numpy()


# --------------------------------------------------------------------------
# persistence


def block_filename(k: int) -> str:
    return f"block_{k:03d}.aflw"


def save_model(model: AnnealingFlowModel, directory) -> Path:
    """Write ``manifest.json`` and one ``block_kkk.aflw`` per block."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, block in enumerate(model.blocks, start=1):
        save_net(block.net, directory / block_filename(i))
    manifest = {
        "format": "annealflow-model",
        "version": 1,
        "dim": model.dim,
        "num_blocks": model.num_blocks,
        "substeps": [b.num_substeps for b in model.blocks],
        "path": model.path_spec,
        "target": model.target_spec,
        "blocks": [block_filename(i) for i in range(1, model.num_blocks + 1)],
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return directory


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise ValidationError(f"{directory}: no manifest.json")
    return json.loads(path.read_text())


def load_model(directory) -> AnnealingFlowModel:
    directory = Path(directory)
    manifest = load_manifest(directory)
    model = AnnealingFlowModel(int(manifest["dim"]), [], manifest.get("path", {}), manifest.get("target", {}))
    for i, (name, S) in enumerate(zip(manifest["blocks"], manifest["substeps"]), start=1):
        net = load_net(directory / name)
        if net.dim != model.dim:
            raise ValidationError(f"{name}: block dim {net.dim} does not match manifest dim {model.dim}")
        model.add(FlowBlock(net, int(S), i))
    if model.num_blocks != int(manifest["num_blocks"]):
        raise ValidationError("manifest block count does not match block list")
    return model


__all__: Sequence[str] = [
    "FlowBlock", "Trajectory", "AnnealingFlowModel", "rk4_step", "integrate_block", "push_forward",
    "log_density_change", "save_model", "load_model",
]

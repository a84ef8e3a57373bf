"""Block-wise training of the flow under the annealed dynamic-OT objective.

For block ``k`` the per-sample objective on a point ``x`` drawn from
``f_{k-1}`` is

* ``original``:     ``-log f_k(x(1)) - int div v + alpha * sum_s |x_{s+1} - x_s|^2``
* ``alternative``:  ``-grad log f_k(x(1)) . v(x(1), 1) - int div v + alpha * (same)``

with the divergence integral taken by the trapezoid rule over the RK4
waypoints, each node a one-probe finite-difference Hutchinson estimate.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .densities import (AnnealingPath, BayesianLogisticPosterior, TruncatedNormalRelaxed, as_tensor,
                        sample_reference)
from .errors import NumericalError, ValidationError
from .flow import AnnealingFlowModel, FlowBlock, Trajectory, integrate_block, push_forward, save_model
from .net import LossGraph, VelocityNet, check_finite, init_network, save_net
from .rng import stream

log = logging.getLogger(__name__)

LOSS_VARIANTS = ("original", "alternative")

# decaying schedule shared by the GMM, funnel, truncated-normal and logistic runs
ALPHA_STANDARD = (8 / 3, 8 / 3, 4 / 3, 4 / 3, 2 / 3)
ALPHA_EXPGAUSS = (20 / 3,) * 4 + (10 / 3,) * 4 + (5 / 3,) * 4 + (1.0,) * 8


def alpha_schedule(num_blocks: int, table: Sequence[float] = ALPHA_STANDARD) -> list[float]:
    """First ``num_blocks`` entries of ``table``, repeating its last entry."""
    return [float(table[min(i, len(table) - 1)]) for i in range(num_blocks)]


def default_loss_variant(target) -> str:
    if isinstance(target, (TruncatedNormalRelaxed, BayesianLogisticPosterior)):
        return "original"
    return "alternative"


@dataclass
class LangevinConfig:
    enabled: bool = False
    eta: float = 1e-3
    steps: int = 10


@dataclass
class TrainConfig:
    alphas: list
    loss: str = "alternative"
    substeps: int = 3
    hidden: tuple = (32, 32)
    lr: float = 1e-4
    iterations: int = 1000
    batch_size: int = 1000
    pool_size: int = 100_000
    sigma: Optional[float] = None  # None -> 0.02 / sqrt(d)
    probes: int = 1
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.langevin, dict):
            self.langevin = LangevinConfig(**self.langevin)
        self.alphas = [float(a) for a in self.alphas]
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.loss not in LOSS_VARIANTS:
            raise ValidationError(f"train.loss: expected one of {LOSS_VARIANTS}, got {self.loss!r}")
        if not self.alphas or any(not a > 0 for a in self.alphas):
            raise ValidationError("train.alphas: need positive values, one per block")
        if self.substeps < 1 or self.probes < 1 or self.batch_size < 1 or self.pool_size < 1:
            raise ValidationError("train: substeps, probes, batch_size and pool_size must be >= 1")
        if self.iterations < 0 or not self.lr > 0:
            raise ValidationError("train: iterations must be >= 0 and lr > 0")
        if self.sigma is not None and not self.sigma > 0:
            raise ValidationError("train.sigma must be positive")
        if self.langevin.enabled and not self.langevin.eta > 0:
            raise ValidationError("train.langevin.eta must be positive")

    def hutchinson_sigma(self, dim: int) -> float:
        return self.sigma if self.sigma is not None else 0.02 / math.sqrt(dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class Adam:
    """Adam with bias correction, updating torch parameters in place."""

    def __init__(self, params: list, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [torch.zeros_like(p) for p in params]
        self.v = [torch.zeros_like(p) for p in params]
        self.step_count = 0

    @torch.no_grad()
    def step(self, grads) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m.mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            p.sub_(self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps))


def w2_penalty(traj: Trajectory, alpha: float) -> torch.Tensor:
    """Per-row ``alpha * sum_s |x_{s+1} - x_s|^2``."""
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    return alpha * traj.displacements.sum(0)


def assemble_loss(block: FlowBlock, path: AnnealingPath, k: int, minibatch, alpha: float, loss: str,
                  sigma: float, rng: np.random.Generator, probes: int = 1) -> LossGraph:
    """Record the block-``k`` objective averaged over ``minibatch`` (points from ``f_{k-1}``)."""
    x0 = as_tensor(minibatch)
    S = block.num_substeps
    eps = torch.as_tensor(rng.standard_normal((S + 1, probes, *x0.shape)))
    traj = integrate_block(block, x0, record=True, hutchinson={"sigma": sigma, "eps": eps})
    x_end = traj.endpoint
    if loss == "original":
        first = -path.log_prob(k, x_end)
    elif loss == "alternative":
        first = -(path.score(k, x_end) * traj.velocities[-1]).sum(-1)
    else:
        raise ValidationError(f"unknown loss variant {loss!r}")
    check_finite("terminal log-density term", first)
    w2 = w2_penalty(traj, alpha)
    per_sample = first - traj.divergence + w2
    terms = {"terminal": first, "divergence": traj.divergence, "w2": w2}
    value = per_sample.mean()
    if not torch.isfinite(value):
        for name, t in terms.items():
            check_finite(name, t)
    return LossGraph(value, block.net, terms)


def _grads(graph: LossGraph) -> list:
    params = graph.net.parameters()
    grads = torch.autograd.grad(graph.value, params, allow_unused=True)
    return [g if g is not None else torch.zeros_like(p) for g, p in zip(grads, params)]


def langevin_adjust(batch, path: AnnealingPath, k: int, eta: float, steps: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Unadjusted Langevin steps ``x += eta/2 grad log f_k(x) + sqrt(eta) eps``."""
    if not eta > 0:
        raise ValidationError("langevin eta must be positive")
    x = np.array(batch, dtype=np.float64, copy=True)
    root = math.sqrt(eta)
    with torch.no_grad():
        for _ in range(steps):
            g = path.score(k, torch.as_tensor(x)).numpy()
            x = x + 0.5 * eta * g + root * rng.standard_normal(x.shape)
    return x


@dataclass
class TraceRow:
    block: int
    iteration: int
    loss: float
    grad_norm: float
    wall_ms: float


def train_block(model: AnnealingFlowModel, k: int, path: AnnealingPath, cfg: TrainConfig,
                rng: np.random.Generator, callback: Optional[Callable[[TraceRow], None]] = None):
    """Train block ``k`` on a fresh reference pool pushed through blocks ``1..k-1``.

    Returns ``(block, trace)`` where ``trace`` is a list of :class:`TraceRow`.
    """
    if model.num_blocks < k - 1:
        raise ValidationError(f"block {k} needs blocks 1..{k - 1} trained first")
    d = model.dim
    alpha = cfg.alphas[min(k - 1, len(cfg.alphas) - 1)]
    sigma = cfg.hutchinson_sigma(d)
    net = init_network(d, cfg.hidden, seed=int(rng.integers(0, 2**32 - 1)))
    block = FlowBlock(net, cfg.substeps, k)

    pool = sample_reference(d, cfg.pool_size, rng)
    pool = push_forward(model, pool, upto_block=k - 1)
    if cfg.langevin.enabled and cfg.langevin.steps > 0:
        pool = langevin_adjust(pool, path, k - 1, cfg.langevin.eta, cfg.langevin.steps, rng)

    opt = Adam(net.parameters(), cfg.lr)
    bs = min(cfg.batch_size, cfg.pool_size)
    order = rng.permutation(cfg.pool_size)
    cursor = 0
    trace = []
    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        if cursor + bs > cfg.pool_size:
            order = rng.permutation(cfg.pool_size)
            cursor = 0
        idx = order[cursor:cursor + bs]
        cursor += bs
        try:
            graph = assemble_loss(block, path, k, pool[idx], alpha, cfg.loss, sigma, rng, cfg.probes)
        except NumericalError as e:
            raise NumericalError(f"block {k}, iteration {it}: {e}") from None
        if not torch.isfinite(graph.value):
            raise NumericalError(f"block {k}, iteration {it}: loss is not finite")
        grads = _grads(graph)
        gnorm = float(torch.sqrt(sum((g * g).sum() for g in grads)))
        if not math.isfinite(gnorm):
            raise NumericalError(f"block {k}, iteration {it}: gradient is not finite")
        opt.step(grads)
        row = TraceRow(k, it, graph.item(), gnorm, 1000.0 * (time.perf_counter() - t0))
        trace.append(row)
        if callback is not None:
            callback(row)
    return block, trace


def train_model(path: AnnealingPath, cfg: TrainConfig, out_dir=None,
                callback: Optional[Callable[[TraceRow], None]] = None):
    """Train blocks ``1..K`` in order (optionally checkpointing each one).

    Every block draws from its own stream ``train/block/<k>`` under
    ``cfg.seed``.  Returns ``(model, trace)``.
    """
    model = AnnealingFlowModel(path.dim, [], path.to_dict(), path.target.to_dict())
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    trace = []
    for k in range(1, path.num_steps + 1):
        t0 = time.perf_counter()
        block, rows = train_block(model, k, path, cfg, stream(cfg.seed, f"train/block/{k}"), callback)
        model.add(block)
        trace += rows
        if out is not None:
            save_net(block.net, out / f"block_{k:03d}.aflw")
        if rows:
            log.info("block %d/%d: final loss %.4f (%.1fs)", k, path.num_steps, rows[-1].loss,
                     time.perf_counter() - t0)
    if out is not None:
        save_model(model, out)
        write_trace(trace, out / "train_log.csv")
    return model, trace


def write_trace(trace: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "iteration", "loss", "grad_norm", "wall_ms"])
        for r in trace:
            w.writerow([r.block, r.iteration, repr(r.loss), repr(r.grad_norm), f"{r.wall_ms:.3f}"])


def smoothed(values: Sequence[float], weight: float = 0.9) -> np.ndarray:
    """Exponential moving average used for burn-in diagnostics."""
    out = np.empty(len(values))
    acc = values[0] if len(values) else 0.0
    for i, v in enumerate(values):
        acc = weight * acc + (1 - weight) * v
        out[i] = acc
    return out


__all__ = [
    "TrainConfig", "LangevinConfig", "Adam", "w2_penalty", "assemble_loss", "langevin_adjust",
    "train_block", "train_model", "alpha_schedule", "default_loss_variant", "VelocityNet",
]

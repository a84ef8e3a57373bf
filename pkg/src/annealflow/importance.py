"""Importance Flow: learned density ratios and the importance-sampling estimators.

A ratio stage is a scalar MLP ``r(x)`` fitted by logistic discrimination so
that at the optimum ``r(x) = log(p_prev(x) / p_next(x))``.  Chaining stages
along the flow telescopes into ``log(pi0 / q)``; the default is one direct
stage between reference draws and flow samples.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from .densities import as_tensor, sample_reference
from .errors import NumericalError, ValidationError
from .flow import AnnealingFlowModel, push_forward
from .net import VelocityNet, init_network, load_net, save_net, zero_network
from .rng import stream
from .training import Adam

log = logging.getLogger(__name__)

EXP_CLAMP = 700.0


@dataclass
class RatioStage:
    net: VelocityNet
    index: int = 1

    def __post_init__(self):
        if self.net.time_input or self.net.out_dim != 1:
            raise ValidationError("a ratio stage needs a time-free network with scalar output")

    @property
    def dim(self) -> int:
        return self.net.dim

    def __call__(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x).squeeze(-1)


@dataclass
class RatioChain:
    dim: int
    stages: list = field(default_factory=list)

    def add(self, stage: RatioStage) -> None:
        if stage.dim != self.dim:
            raise ValidationError(f"stage dim {stage.dim} does not match chain dim {self.dim}")
        self.stages.append(stage)


def constant_stage(dim: int, value: float, index: int = 1) -> RatioStage:
    """Stage returning ``value`` everywhere (hidden-free net with zero weights)."""
    net = zero_network(dim, (), out_dim=1, time_input=False)
    with torch.no_grad():
        net.biases[-1].fill_(float(value))
    return RatioStage(net, index)


@dataclass
class DreConfig:
    hidden: tuple = (64, 64, 64)
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 1500
    holdout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise ValidationError("dre: epochs >= 0, batch_size >= 1 and lr > 0 required")
        if not 0 <= self.holdout < 1:
            raise ValidationError("dre: holdout fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def logistic_loss(stage: RatioStage, x_prev: torch.Tensor, x_next: torch.Tensor) -> torch.Tensor:
    """``mean softplus(-r(x_prev)) + mean softplus(r(x_next))``."""
    return F.softplus(-stage(x_prev)).mean() + F.softplus(stage(x_next)).mean()


def _split(x: np.ndarray, frac: float, rng: np.random.Generator):
    idx = rng.permutation(len(x))
    n_hold = int(round(frac * len(x)))
    return x[idx[n_hold:]], x[idx[:n_hold]]


def train_ratio_stage(samples_prev, samples_next, cfg: DreConfig, index: int = 1,
                      rng: Optional[np.random.Generator] = None):
    """Fit ``r ~ log(p_prev / p_next)`` from samples of both densities.

    Returns ``(stage, history)``; ``history`` holds one dict per epoch with
    the mean training loss and the held-out loss.
    """
    a = np.asarray(samples_prev, dtype=np.float64)
    b = np.asarray(samples_next, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or len(a) == 0 or len(b) == 0:
        raise ValidationError("train_ratio_stage: both sample sets must be nonempty (n, d) arrays")
    if a.shape[1] != b.shape[1]:
        raise ValidationError("train_ratio_stage: sample sets differ in dimension")
    rng = stream(cfg.seed, f"dre/stage/{index}") if rng is None else rng
    net = init_network(a.shape[1], cfg.hidden, seed=int(rng.integers(0, 2**32 - 1)), out_dim=1,
                       time_input=False)
    stage = RatioStage(net, index)
    a_tr, a_ho = _split(a, cfg.holdout, rng)
    b_tr, b_ho = _split(b, cfg.holdout, rng)
    a_tr, b_tr = as_tensor(a_tr), as_tensor(b_tr)
    opt = Adam(net.parameters(), cfg.lr)
    n = max(len(a_tr), len(b_tr))
    steps = max(1, math.ceil(n / cfg.batch_size))
    history = []
    it = 0
    for epoch in range(cfg.epochs):
        pa, pb = rng.permutation(len(a_tr)), rng.permutation(len(b_tr))
        total = 0.0
        for s in range(steps):
            ia = pa[np.arange(s * cfg.batch_size, (s + 1) * cfg.batch_size) % len(pa)]
            ib = pb[np.arange(s * cfg.batch_size, (s + 1) * cfg.batch_size) % len(pb)]
            loss = logistic_loss(stage, a_tr[ia], b_tr[ib])
            if not torch.isfinite(loss):
                raise NumericalError(f"ratio stage {index}, iteration {it}: loss is not finite")
            opt.step(torch.autograd.grad(loss, net.parameters()))
            total += loss.item()
            it += 1
        row = {"epoch": epoch, "loss": total / steps}
        if len(a_ho) and len(b_ho):
            with torch.no_grad():
                row["holdout_loss"] = float(logistic_loss(stage, as_tensor(a_ho), as_tensor(b_ho)))
        history.append(row)
    return stage, history


def log_ratio(chain: Union[RatioChain, RatioStage], x) -> np.ndarray:
    """Sum of stage outputs at each row of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise ValidationError("log_ratio: non-finite input")
    stages = [chain] if isinstance(chain, RatioStage) else chain.stages
    total = np.zeros(len(x))
    with torch.no_grad():
        xt = torch.as_tensor(x)
        for stage in stages:
            total += stage(xt).numpy()
    return total


@dataclass
class Estimate:
    value: float
    clamped: int = 0


def _eval_h(h, x) -> np.ndarray:
    vals = h(x) if callable(h) else h
    return np.broadcast_to(np.asarray(vals, dtype=np.float64), (len(x),))


def _log_ratios(ratio, x) -> np.ndarray:
    if isinstance(ratio, (RatioChain, RatioStage)):
        return log_ratio(ratio, x)
    if callable(ratio):
        return np.asarray(ratio(x), dtype=np.float64)
    return np.asarray(ratio, dtype=np.float64)


def is_estimate(samples, h, ratio) -> Estimate:
    """``mean_i exp(r(x_i)) h(x_i)`` with exponents clipped to +-700.

    ``h`` is a callable on the sample array or precomputed values; ``ratio``
    is a chain, a callable returning log-ratios, or the log-ratios themselves.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if len(x) < 1:
        raise ValidationError("is_estimate needs at least one sample")
    hv = _eval_h(h, x)
    lr = _log_ratios(ratio, x)
    clamped = int(np.sum(np.abs(lr) > EXP_CLAMP))
    w = np.exp(np.clip(lr, -EXP_CLAMP, EXP_CLAMP))
    return Estimate(float(np.mean(w * hv)), clamped)


def normalized_is_estimate(samples, h, log_weights) -> float:
    """Self-normalized ``sum w h / sum w`` from log-weights ``log(pi0 / q)``."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.shape != (len(x),):
        raise ValidationError("normalized_is_estimate: one log-weight per sample")
    top = lw.max() if len(lw) else -np.inf
    if not np.isfinite(top):
        raise NumericalError("normalized_is_estimate: degenerate weights (all zero)")
    p = np.exp(lw - top)
    p /= p.sum()
    return float(np.dot(p, _eval_h(h, x)))


def tail_indicator(c: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: (np.linalg.norm(x, axis=1) >= c).astype(np.float64)


def gaussian_tail_probability(c: float, d: int) -> float:
    """``P(|Z| >= c)`` for ``Z ~ N(0, I_d)``."""
    from scipy.stats import chi2
    return float(chi2.sf(c * c, d))


Sampler = Callable[[int, np.random.Generator], np.ndarray]


def model_sampler(model: AnnealingFlowModel) -> Sampler:
    return lambda n, rng: push_forward(model, sample_reference(model.dim, n, rng))


def tail_probability_experiment(c: float, d: int, sampler: Union[AnnealingFlowModel, Sampler], ratio,
                                rounds: int = 200, per_round: int = 500, seed: int = 0) -> dict:
    """Repeat :func:`is_estimate` of ``P(|x| >= c)`` on fresh sample rounds.

    ``sampler`` is a trained flow model or a callable ``(n, rng) -> samples``.
    """
    if rounds < 1 or per_round < 1:
        raise ValidationError("rounds and per_round must be >= 1")
    if isinstance(sampler, AnnealingFlowModel):
        if sampler.dim != d:
            raise ValidationError(f"model dim {sampler.dim} does not match d={d}")
        sampler = model_sampler(sampler)
    h = tail_indicator(c)
    values, clamped = [], 0
    for i in range(rounds):
        x = sampler(per_round, stream(seed, f"importance/round/{i}"))
        est = is_estimate(x, h, ratio)
        values.append(est.value)
        clamped += est.clamped
    v = np.asarray(values)
    return {"mean": float(v.mean()), "std": float(v.std()), "rounds": rounds, "per_round": per_round,
            "clamped": clamped, "estimates": v.tolist()}


def estimate_json(result: dict) -> str:
    keys = ("mean", "std", "rounds", "per_round", "clamped")
    return json.dumps({k: result[k] for k in keys}, indent=2) + "\n"


def train_direct_ratio(model: AnnealingFlowModel, cfg: DreConfig, num_samples: int = 100_000) -> tuple:
    """Single stage between reference draws and flow samples: ``r ~ log(pi0 / q)``."""
    ref = sample_reference(model.dim, num_samples, stream(cfg.seed, "dre/reference"))
    pushed = push_forward(model, sample_reference(model.dim, num_samples, stream(cfg.seed, "dre/pushed")))
    stage, history = train_ratio_stage(ref, pushed, cfg, 1)
    chain = RatioChain(model.dim)
    chain.add(stage)
    return chain, history


def train_telescoping_chain(model: AnnealingFlowModel, cfg: DreConfig, num_samples: int = 100_000) -> tuple:
    """One stage per block between independent draws of ``f_{k-1}`` and ``f_k``."""
    chain = RatioChain(model.dim)
    histories = []
    for k in range(1, model.num_blocks + 1):
        src = [sample_reference(model.dim, num_samples, stream(cfg.seed, f"dre/{k}/{side}"))
               for side in ("prev", "next")]
        prev = push_forward(model, src[0], upto_block=k - 1)
        nxt = push_forward(model, src[1], upto_block=k)
        stage, hist = train_ratio_stage(prev, nxt, cfg, k)
        chain.add(stage)
        histories.append(hist)
    return chain, histories


def stage_filename(k: int) -> str:
    return f"ratio_{k:03d}.aflw"


def save_chain(chain: RatioChain, directory, extra: Optional[dict] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, stage in enumerate(chain.stages, start=1):
        save_net(stage.net, directory / stage_filename(i))
    manifest = {"format": "annealflow-ratio-chain", "version": 1, "dim": chain.dim,
                "stages": [stage_filename(i) for i in range(1, len(chain.stages) + 1)]}
    if extra:
        manifest.update(extra)
    (directory / "ratio_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return directory


def load_chain(directory) -> RatioChain:
    directory = Path(directory)
    path = directory / "ratio_manifest.json"
    if not path.exists():
        raise ValidationError(f"{directory}: no ratio_manifest.json")
    manifest = json.loads(path.read_text())
    chain = RatioChain(int(manifest["dim"]))
    for i, name in enumerate(manifest["stages"], start=1):
        chain.add(RatioStage(load_net(directory / name), i))
    return chain


__all__: Sequence[str] = [
    "RatioStage", "RatioChain", "DreConfig", "train_ratio_stage", "log_ratio", "is_estimate",
    "normalized_is_estimate", "tail_probability_experiment", "train_direct_ratio",
    "train_telescoping_chain", "save_chain", "load_chain", "constant_stage",
]

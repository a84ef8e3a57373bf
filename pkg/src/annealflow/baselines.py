"""Random-walk Metropolis-Hastings and parallel tempering reference samplers.

Acceptance tests run on log-density differences, so rescaling the target by
a positive constant never changes the accept/reject sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import torch

from .densities import TargetDensity
from .errors import ValidationError
from .rng import stream

# floor inside E = -log(pi + eps); keeps zero-density states finite
ENERGY_FLOOR = 1e-300
LOG_ENERGY_FLOOR = math.log(ENERGY_FLOOR)

LogDensity = Callable[[np.ndarray], float]


def _log_density_fn(target: Union[TargetDensity, LogDensity]) -> LogDensity:
    if isinstance(target, TargetDensity):
        def f(x):
            with torch.no_grad():
                return float(target.log_prob(torch.as_tensor(x[None, :]))[0])
        return f
    return target


@dataclass
class MhConfig:
    num_steps: int = 10_000
    proposal_std: float = 1.0
    burn_in: Optional[int] = None  # None -> first 20% of the chain
    seed: int = 0

    def __post_init__(self):
        if not self.proposal_std > 0:
            raise ValidationError("mh: proposal_std must be positive")
        if self.num_steps < 0:
            raise ValidationError("mh: num_steps must be >= 0")
        if self.burn_in is not None and not 0 <= self.burn_in <= self.num_steps:
            raise ValidationError("mh: burn_in must lie in [0, num_steps]")

    @property
    def discard(self) -> int:
        return self.num_steps // 5 if self.burn_in is None else self.burn_in


@dataclass
class PtConfig:
    num_steps: int = 10_000
    temperatures: list = field(default_factory=lambda: list(np.linspace(1.0, 2.0, 5)))
    exchange_interval: int = 100
    proposal_std: float = 1.0
    burn_in: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        self.temperatures = [float(t) for t in self.temperatures]
        T = self.temperatures
        if not T or T[0] != 1.0:
            raise ValidationError("pt: the temperature ladder must start at 1")
        if any(b < a for a, b in zip(T, T[1:])):
            raise ValidationError("pt: temperatures must be non-decreasing")
        if self.exchange_interval < 1:
            raise ValidationError("pt: exchange_interval must be >= 1")
        MhConfig(self.num_steps, self.proposal_std, self.burn_in, self.seed)

    @classmethod
    def linear(cls, num_replicas: int = 5, t_max: float = 2.0, **kw) -> "PtConfig":
        return cls(temperatures=list(np.linspace(1.0, t_max, num_replicas)), **kw)

    @property
    def discard(self) -> int:
        return self.num_steps // 5 if self.burn_in is None else self.burn_in


class _Walker:
    """One tempered random-walk chain with its draws generated up front."""

    def __init__(self, logp: LogDensity, x0: np.ndarray, num_steps: int, std: float,
                 rng: np.random.Generator):
        self.logp = logp
        self.x = np.array(x0, dtype=np.float64)
        self.lp = logp(self.x)
        self.steps = std * rng.standard_normal((num_steps, len(self.x)))
        self.log_u = np.log(rng.random(num_steps))
        self.accepted = 0

    def step(self, i: int, temperature: float = 1.0) -> None:
        prop = self.x + self.steps[i]
        lp = self.logp(prop)
        # a NaN difference compares False and is rejected
        if self.log_u[i] < (lp - self.lp) / temperature:
            self.x, self.lp = prop, lp
            self.accepted += 1


def _initial_point(x0, dim: Optional[int], seed: int) -> np.ndarray:
    if x0 is None:
        if dim is None:
            raise ValidationError("need either x0 or a target with a known dimension")
        return stream(seed, "init").standard_normal(dim)
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be finite")
    return x0


def mh_chain(target, x0, cfg: MhConfig, return_stats: bool = False):
    """Post-burn-in states of a random-walk MH chain, shape ``(num_steps - burn_in, d)``."""
    x0 = _initial_point(x0, getattr(target, "dim", None), cfg.seed)
    w = _Walker(_log_density_fn(target), x0, cfg.num_steps, cfg.proposal_std, stream(cfg.seed, "mh"))
    out = np.empty((cfg.num_steps, len(x0)))
    for i in range(cfg.num_steps):
        w.step(i)
        out[i] = w.x
    samples = out[cfg.discard:]
    if return_stats:
        return samples, {"acceptance": w.accepted / max(cfg.num_steps, 1)}
    return samples


def swap_log_acceptance(lp_j: float, lp_next: float, t_j: float, t_next: float) -> float:
    """``(1/T_j - 1/T_{j+1}) (E_{j+1} - E_j)`` with ``E = -log(pi + floor)``."""
    e_j = -np.logaddexp(lp_j, LOG_ENERGY_FLOOR)
    e_next = -np.logaddexp(lp_next, LOG_ENERGY_FLOOR)
    return (1.0 / t_j - 1.0 / t_next) * (e_next - e_j)


def pt_chains(target, cfg: PtConfig, x0=None, return_stats: bool = False):
    """Parallel tempering; returns post-burn-in states of every replica, shape ``(R, n, d)``.

    Replica ``j`` targets ``pi^{1/T_j}``.  After every ``exchange_interval``
    sweeps, adjacent pairs ``(j, j+1)`` are offered a state swap.  Replica 0
    uses the same random stream as :func:`mh_chain`, so a one-rung ladder
    reproduces MH exactly.
    """
    logp = _log_density_fn(target)
    x0 = _initial_point(x0, getattr(target, "dim", None), cfg.seed)
    R = len(cfg.temperatures)
    walkers = [_Walker(logp, x0, cfg.num_steps, cfg.proposal_std,
                       stream(cfg.seed, "mh" if j == 0 else f"mh/{j}")) for j in range(R)]
    swap_rng = stream(cfg.seed, "swap")
    out = np.empty((R, cfg.num_steps, len(x0)))
    swaps = attempts = 0
    for i in range(cfg.num_steps):
        for j, w in enumerate(walkers):
            w.step(i, cfg.temperatures[j])
        if R > 1 and (i + 1) % cfg.exchange_interval == 0:
            for j in range(R - 1):
                a, b = walkers[j], walkers[j + 1]
                delta = swap_log_acceptance(a.lp, b.lp, cfg.temperatures[j], cfg.temperatures[j + 1])
                attempts += 1
                if math.log(swap_rng.random()) < delta:
                    a.x, b.x = b.x, a.x
                    a.lp, b.lp = b.lp, a.lp
                    swaps += 1
        for j, w in enumerate(walkers):
            out[j, i] = w.x
    samples = out[:, cfg.discard:]
    if return_stats:
        stats = {"acceptance": [w.accepted / max(cfg.num_steps, 1) for w in walkers],
                 "swap_rate": swaps / attempts if attempts else 0.0}
        return samples, stats
    return samples


def cold_chain(target, cfg: PtConfig, x0=None) -> np.ndarray:
    return pt_chains(target, cfg, x0)[0]


__all__ = ["MhConfig", "PtConfig", "mh_chain", "pt_chains", "cold_chain", "swap_log_acceptance"]

"""Named experiment presets.

Each preset is a plain config mapping (see :mod:`annealflow.config`).  The
comment above each builder names the published table or figure whose setup
it encodes.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ValidationError
from .training import ALPHA_EXPGAUSS, ALPHA_STANDARD, alpha_schedule

DEFAULT_LR = 1e-3


def _train(num_blocks: int, loss: str, table=ALPHA_STANDARD, **kw) -> dict:
    out = {"alphas": alpha_schedule(num_blocks, table), "loss": loss, "lr": DEFAULT_LR}
    out.update(kw)
    return out


# Table 1 / Table 3 / Figure 1 GMM rows: 6, 8, 10 modes on circles of radius 8, 10, 12;
# 12 blocks = 10 annealed densities + 2 refinement blocks, alternative loss.
def gmm(num_modes: int, radius: float, dim: int) -> dict:
    angles = 2 * np.pi * np.arange(num_modes) / num_modes
    centers = np.full((num_modes, dim), radius / 2.0)
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return {
        "name": f"gmm-{num_modes}-{radius:g}-d{dim}",
        "target": {"family": "GaussianMixture", "dim": dim, "centers": centers.tolist(),
                   "weights": [1.0 / num_modes] * num_modes, "variance": 1.0},
        "path": {"kind": "Geometric", "num_annealed": 10, "refinement": 2},
        "train": _train(12, "alternative"),
        "metrics": {"num_samples": 5000, "num_reference": 10000},
    }


# Table 1 weighted-GMM row: 10 modes on the radius-12 circle, two of them carrying
# double weight.
def wgmm() -> dict:
    cfg = gmm(10, 12, 2)
    w = np.ones(10)
    w[:2] = 2.0
    cfg["name"] = "wgmm-10-12"
    cfg["target"]["weights"] = (w / w.sum()).tolist()
    return cfg


# Figure 2 / Table 9 truncated normal: relaxed indicator (slope 20), 8 shrinking-radius
# steps, original loss; two extra blocks at the full radius sharpen the boundary.
def truncnorm(c: float, dim: int) -> dict:
    return {
        "name": f"truncnorm-c{c:g}-d{dim}",
        "target": {"family": "TruncatedNormalRelaxed", "dim": dim, "radius": float(c), "sharpness": 20.0},
        "path": {"kind": "ShrinkingRadius", "num_steps": 10, "refinement": 2},
        "train": _train(10, "original", lr=1e-2),
        "metrics": {"num_samples": 5000, "num_reference": 0},
    }


# Figure 3 funnel, d = 5, neck variance 0.81: 8 blocks all aimed at the target.
def funnel(dim: int = 5) -> dict:
    return {
        "name": f"funnel-d{dim}",
        "target": {"family": "Funnel", "dim": dim, "variance": 0.81},
        "path": {"kind": "ConstantTarget", "num_steps": 8},
        "train": _train(8, "alternative"),
        "metrics": {"num_samples": 10000, "num_reference": 0},
    }


# Table 2 / Table 4 ExpGauss: 20 blocks = 15 annealed + 5 refinement with the slower
# alpha decay.  d <= 10 folds every coordinate; d = 50 folds the first ten (1024 modes).
def expgauss(dim: int) -> dict:
    abs_dims = list(range(min(dim, 10)))
    return {
        "name": f"expgauss-d{dim}",
        "target": {"family": "ExpWeightedGaussian", "dim": dim, "abs_dims": abs_dims, "scale": 10.0},
        "path": {"kind": "Geometric", "num_annealed": 15, "refinement": 5},
        "train": _train(20, "alternative", ALPHA_EXPGAUSS),
        "metrics": {"num_samples": 20000, "num_reference": 0},
    }


# Table 5 Bayesian logistic regression: 6 blocks all aimed at the posterior, original
# loss.  The LIBSVM datasets are not bundled; a small synthetic set stands in, and any
# CSV can be swapped in through target.dataset.
def bayeslogit_synthetic() -> dict:
    return {
        "name": "bayeslogit-synthetic",
        "target": {"family": "BayesianLogisticPosterior", "synthetic": {"n": 200, "features": 4, "seed": 0}},
        "path": {"kind": "ConstantTarget", "num_steps": 6},
        "train": _train(6, "original"),
        "metrics": {"num_samples": 5000, "num_reference": 0},
    }


def bayeslogit_dataset(path: str) -> dict:
    cfg = bayeslogit_synthetic()
    cfg["name"] = "bayeslogit-dataset"
    cfg["target"] = {"family": "BayesianLogisticPosterior", "dataset": path}
    return cfg


def preset_names() -> list[str]:
    names = [f"gmm-{m}-{r}-d{d}" for m in (6, 8, 10) for r in (8, 10, 12) for d in (2, 5)]
    names += ["wgmm-10-12", "funnel-d5", "bayeslogit-synthetic"]
    names += [f"truncnorm-c{c}-d{d}" for c in (4, 6) for d in (2, 5)]
    names += [f"expgauss-d{d}" for d in (2, 5, 10, 50)]
    return names


def get_preset(name: str) -> dict:
    """Config mapping for a named preset (a fresh copy each call)."""
    m = re.fullmatch(r"gmm-(6|8|10)-(8|10|12)-d(2|5)", name)
    if m:
        return gmm(int(m[1]), float(m[2]), int(m[3]))
    if name == "wgmm-10-12":
        return wgmm()
    m = re.fullmatch(r"truncnorm-c(4|6)-d(2|5)", name)
    if m:
        return truncnorm(float(m[1]), int(m[2]))
    if name == "funnel-d5":
        return funnel(5)
    m = re.fullmatch(r"expgauss-d(2|5|10|50)", name)
    if m:
        return expgauss(int(m[1]))
    if name == "bayeslogit-synthetic":
        return bayeslogit_synthetic()
    raise ValidationError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")

"""Target densities, the reference distribution and annealing paths.

Every density is unnormalized and exposes two torch functions on batches of
shape ``(..., d)``: ``log_prob`` and ``grad_log_prob`` (the analytic score).
Both are plain torch expressions, so they can sit inside a recorded loss and
be differentiated again.  The numpy-facing helpers :func:`log_unnorm`,
:func:`score`, :func:`annealed_log_density` and :func:`annealed_score` wrap
them for callers that do not care about torch.

Conventions: the reference is the standard Gaussian with
``log pi0(x) = -|x|^2 / 2`` (no normalizing constant), and the same
constant-free convention is used for every family below.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ValidationError

DTYPE = torch.float64


def as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _sumsq(x: torch.Tensor) -> torch.Tensor:
    return (x * x).sum(-1)


class TargetDensity:
    """Base class: an unnormalized log-density with an analytic score."""

    family: str = ""
    dim: int

    def log_prob(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def grad_log_prob(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, "dim": self.dim, **self.params()}


@dataclass(frozen=True, eq=False)
class IsotropicGaussian(TargetDensity):
    dim: int
    family = "IsotropicGaussian"

    def log_prob(self, x):
        return -0.5 * _sumsq(x)

    def grad_log_prob(self, x):
        return -x

    def params(self):
        return {}


@dataclass(frozen=True, eq=False)
class GaussianMixture(TargetDensity):
    """Mixture of isotropic Gaussians sharing one variance."""

    centers: np.ndarray
    weights: np.ndarray
    variance: float = 1.0
    family = "GaussianMixture"

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if len(centers) < 1 or len(centers) != len(weights):
            raise ValidationError("GaussianMixture needs as many weights as centers (>= 1)")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValidationError("GaussianMixture weights must be positive and sum to 1")
        if not self.variance > 0:
            raise ValidationError("GaussianMixture variance must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_mu", torch.as_tensor(centers))
        object.__setattr__(self, "_logw", torch.as_tensor(np.log(weights)))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def _component_logits(self, x):
        diff = x.unsqueeze(-2) - self._mu  # (..., M, d)
        return self._logw - 0.5 * _sumsq(diff) / self.variance, diff

    def log_prob(self, x):
        logits, _ = self._component_logits(x)
        return torch.logsumexp(logits, dim=-1)

    def grad_log_prob(self, x):
        logits, diff = self._component_logits(x)
        resp = torch.softmax(logits, dim=-1)
        return -(resp.unsqueeze(-1) * diff).sum(-2) / self.variance

    def params(self):
        return {
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "variance": float(self.variance),
        }


@dataclass(frozen=True, eq=False)
class TruncatedNormalRelaxed(TargetDensity):
    """Standard normal restricted to ``|x| >= radius``.

    The indicator is replaced by a logistic ramp of slope ``sharpness`` so that
    the log-density and score exist everywhere:
    ``log sigmoid(k (|x| - c)) - |x|^2 / 2``.
    """

    dim: int
    radius: float
    sharpness: float = 20.0
    family = "TruncatedNormalRelaxed"

    def __post_init__(self):
        if self.radius < 0 or not self.sharpness > 0:
            raise ValidationError("TruncatedNormalRelaxed needs radius >= 0 and sharpness > 0")

    def log_prob(self, x):
        r = torch.sqrt(_sumsq(x))
        return F.logsigmoid(self.sharpness * (r - self.radius)) - 0.5 * r * r

    def grad_log_prob(self, x):
        r = torch.sqrt(_sumsq(x))
        ramp = self.sharpness * torch.sigmoid(-self.sharpness * (r - self.radius))
        safe_r = torch.where(r > 0, r, torch.ones_like(r))
        unit = torch.where((r > 0).unsqueeze(-1), x / safe_r.unsqueeze(-1), torch.zeros_like(x))
        return ramp.unsqueeze(-1) * unit - x

    def with_radius(self, radius: float) -> "TruncatedNormalRelaxed":
        return TruncatedNormalRelaxed(self.dim, radius, self.sharpness)

    def params(self):
        return {"radius": float(self.radius), "sharpness": float(self.sharpness)}


@dataclass(frozen=True, eq=False)
class Funnel(TargetDensity):
    """Neal's funnel: ``x1 ~ N(0, s2)``, ``x_i | x1 ~ N(0, exp(x1))``."""

    dim: int
    variance: float = 0.81
    family = "Funnel"

    def __post_init__(self):
        if self.dim < 2 or not self.variance > 0:
            raise ValidationError("Funnel needs dim >= 2 and a positive neck variance")

    def log_prob(self, x):
        x1, rest = x[..., 0], x[..., 1:]
        return (
            -0.5 * x1 * x1 / self.variance
            - 0.5 * (self.dim - 1) * x1
            - 0.5 * torch.exp(-x1) * _sumsq(rest)
        )

    def grad_log_prob(self, x):
        x1, rest = x[..., 0], x[..., 1:]
        scale = torch.exp(-x1)
        g1 = -x1 / self.variance - 0.5 * (self.dim - 1) + 0.5 * scale * _sumsq(rest)
        return torch.cat([g1.unsqueeze(-1), -scale.unsqueeze(-1) * rest], dim=-1)

    def params(self):
        return {"variance": float(self.variance)}


@dataclass(frozen=True, eq=False)
class ExpWeightedGaussian(TargetDensity):
    """``scale * (sum_A |x_i|/s_i + sum_rest x_i/s_i) - |x|^2/2``; 2^|A| modes."""

    dim: int
    abs_dims: tuple = ()
    scale: float = 10.0
    variances: Optional[np.ndarray] = None
    family = "ExpWeightedGaussian"

    def __post_init__(self):
        abs_dims = tuple(sorted(int(i) for i in self.abs_dims))
        if any(i < 0 or i >= self.dim for i in abs_dims) or len(set(abs_dims)) != len(abs_dims):
            raise ValidationError(f"abs_dims must be distinct indices in [0, {self.dim})")
        var = np.ones(self.dim) if self.variances is None else np.asarray(self.variances, dtype=np.float64)
        if var.shape != (self.dim,) or np.any(var <= 0):
            raise ValidationError("ExpWeightedGaussian variances must be dim positive reals")
        mask = np.zeros(self.dim, dtype=bool)
        mask[list(abs_dims)] = True
        object.__setattr__(self, "abs_dims", abs_dims)
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "_mask", torch.as_tensor(mask))
        object.__setattr__(self, "_coef", torch.as_tensor(self.scale / var))

    @property
    def num_modes(self) -> int:
        return 2 ** len(self.abs_dims)

    def mode_centers(self) -> np.ndarray:
        """Locations of the 2^|A| maxima."""
        base = self.scale / self.variances
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * len(self.abs_dims), indexing="ij"))
        signs = signs.reshape(len(self.abs_dims), -1).T if self.abs_dims else np.ones((1, 0))
        centers = np.tile(base, (len(signs), 1))
        centers[:, list(self.abs_dims)] *= signs
        return centers

    def _folded(self, x):
        return torch.where(self._mask, x.abs(), x)

    def log_prob(self, x):
        return (self._coef * self._folded(x)).sum(-1) - 0.5 * _sumsq(x)

    def grad_log_prob(self, x):
        slope = torch.where(self._mask, torch.sign(x), torch.ones_like(x))
        return self._coef * slope - x

    def params(self):
        return {
            "abs_dims": list(self.abs_dims),
            "scale": float(self.scale),
            "variances": self.variances.tolist(),
        }


@dataclass(frozen=True, eq=False)
class BayesianLogisticPosterior(TargetDensity):
    """Hierarchical logistic-regression posterior over ``(beta, log alpha)``.

    Prior ``alpha ~ Gamma(1, rate=0.01)``, ``beta | alpha ~ N(0, I/alpha)``;
    the state stores ``u = log alpha`` and the density carries the ``+u``
    Jacobian so the flow works on an unconstrained space.
    """

    X: np.ndarray
    y: np.ndarray
    dataset: Optional[str] = None
    family = "BayesianLogisticPosterior"
    gamma_shape: float = field(default=1.0, init=False)
    gamma_rate: float = field(default=0.01, init=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if len(X) != len(y) or not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValidationError("labels must be +/-1, one per design-matrix row")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_Xy", torch.as_tensor(X * y[:, None]))

    @property
    def dim(self) -> int:
        return self.X.shape[1] + 1

    def log_prob(self, z):
        beta, u = z[..., :-1], z[..., -1]
        D = beta.shape[-1]
        a = torch.exp(u)
        prior = (self.gamma_shape - 1) * u - self.gamma_rate * a + u + 0.5 * D * u - 0.5 * a * _sumsq(beta)
        lik = F.logsigmoid(beta @ self._Xy.T).sum(-1)
        return prior + lik

    def grad_log_prob(self, z):
        beta, u = z[..., :-1], z[..., -1]
        D = beta.shape[-1]
        a = torch.exp(u)
        g_beta = -a.unsqueeze(-1) * beta + torch.sigmoid(-(beta @ self._Xy.T)) @ self._Xy
        g_u = self.gamma_shape - self.gamma_rate * a + 0.5 * D - 0.5 * a * _sumsq(beta)
        return torch.cat([g_beta, g_u.unsqueeze(-1)], dim=-1)

    def params(self):
        if self.dataset is not None:
            return {"dataset": self.dataset}
        return {"X": self.X.tolist(), "y": self.y.tolist()}


REFERENCE_FAMILY = "IsotropicGaussian"


def reference_log_prob(x: torch.Tensor) -> torch.Tensor:
    return -0.5 * _sumsq(x)


def reference_score(x: torch.Tensor) -> torch.Tensor:
    return -x


# --------------------------------------------------------------------------
# numpy-facing evaluation


def _check_points(dim: int, x) -> torch.Tensor:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1:] != (dim,):
        raise ValidationError(f"expected points of dimension {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must be finite")
    return torch.as_tensor(arr)


def _out(t: torch.Tensor):
    a = t.detach().numpy()
    return float(a) if a.ndim == 0 else a


def log_unnorm(target: TargetDensity, x):
    """Unnormalized log-density at one point ``(d,)`` or a batch ``(n, d)``."""
    return _out(target.log_prob(_check_points(target.dim, x)))


def score(target: TargetDensity, x):
    """Gradient of :func:`log_unnorm` with respect to ``x``."""
    return _out(target.grad_log_prob(_check_points(target.dim, x)))


def sample_reference(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. standard-normal draws in ``dim`` dimensions."""
    if n < 0:
        raise ValidationError("n must be non-negative")
    return rng.standard_normal((n, dim))


def make_gmm_on_circle(num_modes: int, radius: float, dim: int, weights=None, variance: float = 1.0) -> GaussianMixture:
    """Equal-angle centers on a circle in the first two coordinates.

    The remaining coordinates of every center sit at ``radius / 2``.
    """
    if num_modes < 1:
        raise ValidationError("num_modes must be >= 1")
    if dim < 2:
        raise ValidationError("dim must be >= 2")
    angles = 2 * np.pi * np.arange(num_modes) / num_modes
    centers = np.full((num_modes, dim), radius / 2.0)
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    if weights is None:
        weights = np.full(num_modes, 1.0 / num_modes)
    weights = np.asarray(weights, dtype=np.float64)
    return GaussianMixture(centers, weights / weights.sum(), variance)


def sample_gmm(target: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws from a mixture (used for reference sets in evaluation)."""
    comp = rng.choice(len(target.weights), size=n, p=target.weights)
    noise = rng.standard_normal((n, target.dim))
    return target.centers[comp] + math.sqrt(target.variance) * noise


def sample_expgauss(target: ExpWeightedGaussian, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws: coordinates are independent, folded ones are ``+-|N(m, 1)|`` given positivity."""
    m = target.scale / target.variances
    x = m + rng.standard_normal((n, target.dim))
    for i in target.abs_dims:
        col = x[:, i]
        bad = col < 0
        while bad.any():
            col[bad] = m[i] + rng.standard_normal(int(bad.sum()))
            bad = col < 0
        x[:, i] = np.where(rng.random(n) < 0.5, -col, col)
    return x


def sample_exact(target: TargetDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact target draws where a closed-form sampler exists."""
    if isinstance(target, IsotropicGaussian):
        return sample_reference(target.dim, n, rng)
    if isinstance(target, GaussianMixture):
        return sample_gmm(target, n, rng)
    if isinstance(target, ExpWeightedGaussian):
        return sample_expgauss(target, n, rng)
    raise ValidationError(f"no exact sampler for {target.family}; pass reference samples instead")


# --------------------------------------------------------------------------
# annealing paths

PATH_KINDS = ("Geometric", "ShrinkingRadius", "ConstantTarget")


@dataclass(frozen=True, eq=False)
class AnnealingPath:
    """Interpolating family ``f_0 = pi0, f_1, ..., f_K`` toward ``target``.

    ``Geometric``: ``log f_k = (1 - b_k) log pi0 + b_k log q`` with the
    nondecreasing ``betas`` (``b_0 = 0``, ``b_K = 1``; trailing ones are
    refinement blocks).
    ``ShrinkingRadius``: truncated-normal bridge whose radius at step k is
    ``c / (K' - k + 1)`` with ``K' = K - refinement``, reaching the full ``c``
    at ``k = K'`` and staying there for the refinement steps.
    ``ConstantTarget``: every ``f_k`` with ``k >= 1`` is the target.
    """

    kind: str
    target: TargetDensity
    num_steps: int
    betas: Optional[tuple] = None
    refinement: int = 0

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ValidationError(f"unknown path kind {self.kind!r}; expected one of {PATH_KINDS}")
        if self.num_steps < 1:
            raise ValidationError("an annealing path needs at least one step")
        if self.kind == "Geometric":
            betas = tuple(float(b) for b in self.betas) if self.betas is not None else None
            if betas is None or len(betas) != self.num_steps + 1:
                raise ValidationError("Geometric path needs K + 1 betas")
            if betas[0] != 0.0 or betas[-1] != 1.0 or any(b1 < b0 for b0, b1 in zip(betas, betas[1:])):
                raise ValidationError("betas must be nondecreasing from 0 to 1")
            object.__setattr__(self, "betas", betas)
        if self.kind == "ShrinkingRadius" and not isinstance(self.target, TruncatedNormalRelaxed):
            raise ValidationError("ShrinkingRadius path requires a TruncatedNormalRelaxed target")
        if self.kind == "ShrinkingRadius" and not 0 <= self.refinement < self.num_steps:
            raise ValidationError("ShrinkingRadius refinement must be in [0, num_steps)")
        if self.kind != "ShrinkingRadius" and self.refinement:
            raise ValidationError("refinement count only applies to ShrinkingRadius (Geometric uses betas)")

    @classmethod
    def geometric(cls, target, num_annealed: int, refinement: int = 0) -> "AnnealingPath":
        """Equally spaced betas ``k / num_annealed`` plus ``refinement`` blocks at 1."""
        betas = [k / num_annealed for k in range(num_annealed + 1)] + [1.0] * refinement
        betas[-1] = 1.0
        return cls("Geometric", target, num_annealed + refinement, tuple(betas))

    @property
    def dim(self) -> int:
        return self.target.dim

    def _check_k(self, k: int):
        if not 0 <= k <= self.num_steps:
            raise ValidationError(f"step index {k} outside [0, {self.num_steps}]")

    def radius(self, k: int) -> float:
        annealed = self.num_steps - self.refinement
        return self.target.radius / max(1, annealed - k + 1)

    def log_prob(self, k: int, x: torch.Tensor) -> torch.Tensor:
        self._check_k(k)
        if k == 0:
            return reference_log_prob(x)
        if self.kind == "ConstantTarget":
            return self.target.log_prob(x)
        if self.kind == "ShrinkingRadius":
            return self.target.with_radius(self.radius(k)).log_prob(x)
        b = self.betas[k]
        if b == 0.0:
            return reference_log_prob(x)
        if b == 1.0:
            return self.target.log_prob(x)
        return (1.0 - b) * reference_log_prob(x) + b * self.target.log_prob(x)

    def score(self, k: int, x: torch.Tensor) -> torch.Tensor:
        self._check_k(k)
        if k == 0:
            return reference_score(x)
        if self.kind == "ConstantTarget":
            return self.target.grad_log_prob(x)
        if self.kind == "ShrinkingRadius":
            return self.target.with_radius(self.radius(k)).grad_log_prob(x)
        b = self.betas[k]
        if b == 0.0:
            return reference_score(x)
        if b == 1.0:
            return self.target.grad_log_prob(x)
        return (1.0 - b) * reference_score(x) + b * self.target.grad_log_prob(x)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "num_steps": self.num_steps}
        if self.kind == "Geometric":
            out["betas"] = list(self.betas)
        if self.refinement:
            out["refinement"] = self.refinement
        return out


def annealed_log_density(path: AnnealingPath, k: int, x):
    return _out(path.log_prob(k, _check_points(path.dim, x)))


def annealed_score(path: AnnealingPath, k: int, x):
    return _out(path.score(k, _check_points(path.dim, x)))


# --------------------------------------------------------------------------
# config round-trip

_FAMILY_KEYS = {
    "IsotropicGaussian": set(),
    "GaussianMixture": {"centers", "weights", "variance"},
    "TruncatedNormalRelaxed": {"radius", "sharpness"},
    "Funnel": {"variance"},
    "ExpWeightedGaussian": {"abs_dims", "scale", "variances"},
    "BayesianLogisticPosterior": {"dataset", "X", "y", "synthetic"},
}


def load_logistic_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Rows of features followed by a +/-1 label; an optional header is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue
                raise ValidationError(f"{path}: line {i + 1} is not numeric")
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValidationError(f"{path}: need at least one feature column and a label column")
    return data[:, :-1], data[:, -1]


def make_synthetic_logistic(n: int, num_features: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Small logistic dataset for tests and demos (features plus intercept)."""
    X = rng.standard_normal((n, num_features))
    X[:, -1] = 1.0
    w = rng.standard_normal(num_features)
    p = 1.0 / (1.0 + np.exp(-X @ w))
    y = np.where(rng.random(n) < p, 1.0, -1.0)
    return X, y


def target_from_dict(spec: dict, base_dir: Optional[Path] = None) -> TargetDensity:
    """Build a target from its config mapping; unknown keys are rejected."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _FAMILY_KEYS:
        raise ValidationError(f"target.family: unknown family {family!r}")
    dim = spec.pop("dim", None)
    unknown = set(spec) - _FAMILY_KEYS[family]
    if unknown:
        raise ValidationError(f"target: unknown keys for {family}: {sorted(unknown)}")
    try:
        if family == "IsotropicGaussian":
            return IsotropicGaussian(int(dim))
        if family == "GaussianMixture":
            t = GaussianMixture(spec["centers"], spec["weights"], float(spec.get("variance", 1.0)))
        elif family == "TruncatedNormalRelaxed":
            t = TruncatedNormalRelaxed(int(dim), float(spec["radius"]), float(spec.get("sharpness", 20.0)))
        elif family == "Funnel":
            t = Funnel(int(dim), float(spec.get("variance", 0.81)))
        elif family == "ExpWeightedGaussian":
            t = ExpWeightedGaussian(
                int(dim), tuple(spec.get("abs_dims", ())), float(spec.get("scale", 10.0)), spec.get("variances")
            )
        else:
            if "dataset" in spec:
                p = Path(spec["dataset"])
                if base_dir is not None and not p.is_absolute():
                    p = base_dir / p
                X, y = load_logistic_csv(p)
                t = BayesianLogisticPosterior(X, y, dataset=spec["dataset"])
            elif "synthetic" in spec:
                syn = dict(spec["synthetic"])
                if set(syn) - {"n", "features", "seed"}:
                    raise ValidationError(f"target.synthetic: unknown keys {sorted(set(syn) - {'n', 'features', 'seed'})}")
                X, y = make_synthetic_logistic(int(syn.get("n", 200)), int(syn.get("features", 4)),
                                               np.random.default_rng(int(syn.get("seed", 0))))
                t = BayesianLogisticPosterior(X, y)
            else:
                t = BayesianLogisticPosterior(spec["X"], spec["y"])
    except KeyError as e:
        raise ValidationError(f"target: missing key {e.args[0]!r} for {family}") from None
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"target: {e}") from None
    if dim is not None and int(dim) != t.dim:
        raise ValidationError(f"target.dim: {dim} does not match the parameters (dim {t.dim})")
    return t


def path_from_dict(spec: dict, target: TargetDensity) -> AnnealingPath:
    """Path config: ``kind`` plus either ``betas`` or ``num_annealed``/``refinement``/``num_steps``."""
    spec = dict(spec)
    allowed = {"kind", "betas", "num_annealed", "refinement", "num_steps"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValidationError(f"path: unknown keys {sorted(unknown)}")
    kind = spec.get("kind", "Geometric")
    if kind == "Geometric":
        if "betas" in spec:
            betas = spec["betas"]
            return AnnealingPath(kind, target, len(betas) - 1, tuple(betas))
        if "num_annealed" not in spec:
            raise ValidationError("path: Geometric needs 'betas' or 'num_annealed'")
        return AnnealingPath.geometric(target, int(spec["num_annealed"]), int(spec.get("refinement", 0)))
    if "num_steps" not in spec:
        raise ValidationError(f"path: {kind} needs 'num_steps'")
    if "num_annealed" in spec:
        raise ValidationError(f"path: {kind} takes 'num_steps', not 'num_annealed'")
    return AnnealingPath(kind, target, int(spec["num_steps"]), refinement=int(spec.get("refinement", 0)))


def centers_of(target: TargetDensity) -> Optional[np.ndarray]:
    """Mode locations for targets that have a known finite set of modes."""
    if isinstance(target, GaussianMixture):
        return target.centers
    if isinstance(target, ExpWeightedGaussian):
        return target.mode_centers()
    return None


def weights_of(target: TargetDensity) -> Optional[np.ndarray]:
    if isinstance(target, GaussianMixture):
        return target.weights
    if isinstance(target, ExpWeightedGaussian):
        return np.full(target.num_modes, 1.0 / target.num_modes)
    return None


__all__: Sequence[str] = [
    "TargetDensity", "IsotropicGaussian", "GaussianMixture", "TruncatedNormalRelaxed", "Funnel",
    "ExpWeightedGaussian", "BayesianLogisticPosterior", "AnnealingPath", "log_unnorm", "score",
    "annealed_log_density", "annealed_score", "make_gmm_on_circle", "sample_reference",
    "target_from_dict", "path_from_dict",
]

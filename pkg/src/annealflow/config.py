"""Experiment configuration documents (JSON text) and their validation."""

from __future__ import annotations

import copy
import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .densities import AnnealingPath, ExpWeightedGaussian, TargetDensity, path_from_dict, target_from_dict
from .errors import ValidationError
from .importance import DreConfig
from .presets import get_preset
from .training import ALPHA_EXPGAUSS, ALPHA_STANDARD, TrainConfig, alpha_schedule, default_loss_variant

TOP_KEYS = {"preset", "name", "seed", "target", "path", "train", "metrics", "importance", "output"}
TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}
LANGEVIN_KEYS = {"enabled", "eta", "steps"}
METRIC_KEYS = {"num_samples", "num_reference", "radius", "min_fraction", "wasserstein_cap"}
IMPORTANCE_KEYS = {f.name for f in dataclasses.fields(DreConfig)} - {"seed"}
IMPORTANCE_KEYS |= {"num_samples", "rounds", "per_round", "telescoping"}


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    target: dict = field(default_factory=dict)
    path: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    importance: dict = field(default_factory=dict)
    output: Optional[str] = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["output"] is None:
            del d["output"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    # -- builders -----------------------------------------------------------

    def build_target(self, base_dir: Optional[Path] = None) -> TargetDensity:
        return target_from_dict(self.target, base_dir)

    def build_path(self, target: Optional[TargetDensity] = None) -> AnnealingPath:
        return path_from_dict(self.path, target if target is not None else self.build_target())

    def build_train(self, path: AnnealingPath) -> TrainConfig:
        spec = dict(self.train)
        if "alphas" not in spec:
            table = ALPHA_EXPGAUSS if isinstance(path.target, ExpWeightedGaussian) else ALPHA_STANDARD
            spec["alphas"] = alpha_schedule(path.num_steps, table)
        spec.setdefault("loss", default_loss_variant(path.target))
        return TrainConfig(seed=self.seed, **spec)

    def build_dre(self) -> DreConfig:
        spec = {k: v for k, v in self.importance.items() if k in {f.name for f in dataclasses.fields(DreConfig)}}
        return DreConfig(seed=self.seed, **spec)


def _line_of(text: Optional[str], key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if not m:
        return ""
    return f"line {text.count(chr(10), 0, m.start()) + 1}: "


def _check_keys(section: str, spec, allowed: set, text: Optional[str]) -> None:
    if not isinstance(spec, dict):
        raise ValidationError(f"{_line_of(text, section)}field '{section}': expected an object")
    for key in spec:
        if key not in allowed:
            raise ValidationError(f"{_line_of(text, key)}field '{section}.{key}': unknown key "
                                  f"(allowed: {', '.join(sorted(allowed))})")


def config_from_dict(raw: dict, text: Optional[str] = None, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a raw mapping, apply an optional ``preset`` base, and build the config.

    Sections given alongside ``preset`` are merged key by key over the preset.
    """
    if not isinstance(raw, dict):
        raise ValidationError("config: top level must be a JSON object")
    for key in raw:
        if key not in TOP_KEYS:
            raise ValidationError(f"{_line_of(text, key)}field '{key}': unknown key "
                                  f"(allowed: {', '.join(sorted(TOP_KEYS))})")
    raw = copy.deepcopy(raw)
    base = get_preset(raw.pop("preset")) if "preset" in raw else {}
    merged = dict(base)
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict) and key != "target":
            merged[key] = {**base[key], **value}
        else:
            merged[key] = value

    for section, allowed in (("train", TRAIN_KEYS), ("metrics", METRIC_KEYS), ("importance", IMPORTANCE_KEYS)):
        _check_keys(section, merged.get(section, {}), allowed, text)
    langevin = merged.get("train", {}).get("langevin")
    if langevin is not None:
        _check_keys("train.langevin", langevin, LANGEVIN_KEYS, text)
    if "target" not in merged:
        raise ValidationError("field 'target': required")
    seed = merged.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ValidationError(f"{_line_of(text, 'seed')}field 'seed': expected an unsigned 64-bit integer")

    cfg = ExperimentConfig(
        name=str(merged.get("name", "experiment")), seed=seed, target=merged["target"],
        path=merged.get("path", {}), train=merged.get("train", {}), metrics=merged.get("metrics", {}),
        importance=merged.get("importance", {}), output=merged.get("output"),
    )
    # build everything once so that bad values surface now, not mid-run
    try:
        target = cfg.build_target(base_dir)
    except ValidationError as e:
        raise ValidationError(f"{_line_of(text, 'target')}{e}") from None
    try:
        path = cfg.build_path(target)
    except ValidationError as e:
        raise ValidationError(f"{_line_of(text, 'path')}field 'path': {e}") from None
    try:
        cfg.build_train(path)
        cfg.build_dre()
    except ValidationError as e:
        raise ValidationError(f"{_line_of(text, 'train')}{e}") from None
    except TypeError as e:
        raise ValidationError(f"{_line_of(text, 'train')}field 'train': {e}") from None
    return cfg


def parse_config(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return config_from_dict(raw, text, base_dir)
    except ValidationError as e:
        raise ValidationError(f"{source}: {e}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, str(path), path.parent)

"""Command-line entry point: ``annealflow {train,sample,evaluate,baseline,importance,inspect}``.

Exit codes: 0 success, 1 usage error, 2 invalid input or config, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import plotting
from .baselines import MhConfig, PtConfig, mh_chain, pt_chains
from .config import ExperimentConfig, config_from_dict, load_config
from .densities import (ExpWeightedGaussian, GaussianMixture, centers_of, sample_exact, sample_reference,
                        target_from_dict, weights_of)
from .errors import NumericalError, ValidationError
from .flow import load_manifest, load_model, push_forward, save_model
from .importance import (DreConfig, RatioChain, constant_stage, estimate_json, gaussian_tail_probability,
                         load_chain, save_chain, tail_probability_experiment, train_direct_ratio,
                         train_telescoping_chain)
from .io import read_samples, write_samples
from .metrics import evaluate as evaluate_metrics
from .rng import stream
from .training import train_model, write_trace

log = logging.getLogger("annealflow")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers


def _experiment(args) -> ExperimentConfig:
    if getattr(args, "config", None) and getattr(args, "preset", None):
        raise UsageError("give either a config file or --preset, not both")
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif getattr(args, "preset", None):
        cfg = config_from_dict({"preset": args.preset})
    else:
        raise UsageError("a config file or --preset is required")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _publish(tmp: Path, out: Path) -> None:
    if out.exists():
        shutil.rmtree(out)
    os.replace(tmp, out)


def _png_beside(path: Path) -> Path:
    return path.with_suffix(".png")


def _model_target(model_dir):
    return target_from_dict(load_manifest(model_dir)["target"], Path(model_dir))


def _default_radius(target) -> float:
    if isinstance(target, GaussianMixture):
        return 3.0 * math.sqrt(target.variance)
    return 3.0


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = _experiment(args)
    if args.iterations is not None:
        cfg.train["iterations"] = args.iterations
    if args.pool_size is not None:
        cfg.train["pool_size"] = args.pool_size
    target = cfg.build_target(Path(args.config).parent if args.config else None)
    path = cfg.build_path(target)
    tcfg = cfg.build_train(path)
    out = Path(args.out or cfg.output or cfg.name)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        model, trace = train_model(path, tcfg)
        save_model(model, tmp)
        write_trace(trace, tmp / "train_log.csv")
        (tmp / "config.json").write_text(cfg.to_json())
        if not args.no_plot:
            plotting.loss_traces(trace, tmp / "train_log.png", title=cfg.name)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _publish(tmp, out)
    print(f"trained {model.num_blocks} blocks -> {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n < 0:
        raise ValidationError("--n must be non-negative")
    model = load_model(args.model)
    rng = stream(args.seed, "sample")
    x = push_forward(model, sample_reference(model.dim, args.n, rng))
    out = Path(args.out)
    write_samples(out, x, model.dim)
    if args.plot and model.dim >= 1:
        target = _model_target(args.model)
        plotting.scatter_samples(x, _png_beside(out), centers=centers_of(target), title=f"{args.n} samples")
    print(f"wrote {args.n} samples -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    X = read_samples(args.samples)
    target = None
    if args.model:
        target = _model_target(args.model)
    elif args.config or args.preset:
        target = _experiment(args).build_target(Path(args.config).parent if args.config else None)
    if args.reference:
        Y = read_samples(args.reference)
    elif target is not None:
        Y = sample_exact(target, args.n_reference, stream(args.seed, "evaluate/reference"))
    else:
        raise UsageError("evaluate needs --reference, --model, --config or --preset")
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: samples have {X.shape[1]} columns, reference {Y.shape[1]}")
    kw = {}
    if target is not None:
        kw["centers"] = centers_of(target)
        kw["weights"] = weights_of(target)
        kw["radius"] = args.radius if args.radius is not None else _default_radius(target)
        if isinstance(target, ExpWeightedGaussian):
            kw["abs_dims"] = list(target.abs_dims)
            kw["true_vars"] = np.ones(target.dim)
    report = evaluate_metrics(X, Y, seed=args.seed, min_fraction=args.min_fraction, **kw)
    text = report.to_json()
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        if args.csv:
            rows = ["metric,value"] + [f"{k},{'' if v is None else v}" for k, v in report.to_dict().items()]
            Path(args.csv).write_text("\n".join(rows) + "\n")
        if args.plot:
            plotting.scatter_samples(X, _png_beside(out), reference=Y, centers=kw.get("centers"))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _experiment(args)
    target = cfg.build_target(Path(args.config).parent if args.config else None)
    if args.sampler == "mh":
        mcfg = MhConfig(args.steps, args.proposal_std, args.burn_in, cfg.seed)
        x = mh_chain(target, None, mcfg)
    else:
        temps = list(np.linspace(1.0, args.t_max, args.replicas)) if args.replicas > 1 else [1.0]
        pcfg = PtConfig(args.steps, temps, args.exchange_interval, args.proposal_std, args.burn_in, cfg.seed)
        x = pt_chains(target, pcfg)[0]
    out = Path(args.out)
    write_samples(out, x, target.dim)
    if args.plot:
        plotting.scatter_samples(x, _png_beside(out), centers=centers_of(target), title=args.sampler)
    print(f"wrote {len(x)} {args.sampler} samples -> {out}")
    return EXIT_OK


def cmd_importance(args) -> int:
    if args.model:
        model = load_model(args.model)
        d = model.dim
        target = _model_target(args.model)
        c = args.c if args.c is not None else getattr(target, "radius", None)
        if c is None:
            raise UsageError("--c is required when the model target is not a truncated normal")
        sampler = model
        if args.chain:
            chain = load_chain(args.chain)
        else:
            dcfg = DreConfig(epochs=args.epochs, seed=args.seed, batch_size=args.batch_size, lr=args.lr)
            if args.telescoping:
                chain, _ = train_telescoping_chain(model, dcfg, args.dre_samples)
            else:
                chain, _ = train_direct_ratio(model, dcfg, args.dre_samples)
            if args.save_chain:
                save_chain(chain, args.save_chain, {"dre": dcfg.to_dict()})
    else:
        # no flow: proposal is the reference itself and the ratio is exactly 1
        if args.dim is None or args.c is None:
            raise UsageError("without --model both --dim and --c are required")
        d, c = args.dim, args.c
        chain = RatioChain(d, [constant_stage(d, 0.0)])
        sampler = lambda n, rng: sample_reference(d, n, rng)  # noqa: E731
    if chain.dim != d:
        raise ValidationError(f"ratio chain dim {chain.dim} does not match dim {d}")
    result = tail_probability_experiment(c, d, sampler, chain, args.rounds, args.per_round, args.seed)
    if args.rounds == 1:
        result["std"] = 0.0
    text = estimate_json(result)
    truth = gaussian_tail_probability(c, d)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        if args.plot:
            plotting.estimate_histogram(result["estimates"], _png_beside(out), truth)
    sys.stdout.write(text)
    print(f"estimate {result['mean']:.4e} +- {result['std']:.2e}   analytic {truth:.4e}", file=sys.stderr)
    return EXIT_OK


def cmd_inspect(args) -> int:
    manifest = load_manifest(args.model)
    load_model(args.model)  # validates block files against the manifest
    sys.stdout.write(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="annealflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(sp):
        sp.add_argument("config", nargs="?", help="experiment config (JSON)")
        sp.add_argument("--preset", help="named preset instead of a config file")
        sp.add_argument("--seed", type=int, default=None, help="override the global seed")

    t = sub.add_parser("train", help="train a flow model")
    experiment_args(t)
    t.add_argument("--out", help="model directory (default: config output or name)")
    t.add_argument("--iterations", type=int, help="override iterations per block")
    t.add_argument("--pool-size", type=int, help="override the training pool size")
    t.add_argument("--no-plot", action="store_true")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="push reference draws through a trained model")
    s.add_argument("model")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--plot", action="store_true", help="also write a scatter PNG next to the CSV")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("evaluate", help="compare samples against a reference")
    e.add_argument("samples")
    e.add_argument("--reference", help="reference sample CSV")
    e.add_argument("--model", help="take the target from a model directory")
    e.add_argument("--config")
    e.add_argument("--preset")
    e.add_argument("--n-reference", type=int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--radius", type=float)
    e.add_argument("--min-fraction", type=float, default=0.1)
    e.add_argument("--out", help="write the JSON report here as well as to stdout")
    e.add_argument("--csv", help="per-metric CSV (with --out)")
    e.add_argument("--plot", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", help="run an MCMC baseline")
    experiment_args(b)
    b.add_argument("--sampler", required=True, choices=("mh", "pt"))
    b.add_argument("--steps", type=int, default=10_000)
    b.add_argument("--burn-in", type=int)
    b.add_argument("--proposal-std", type=float, default=1.0)
    b.add_argument("--replicas", type=int, default=5)
    b.add_argument("--t-max", type=float, default=2.0)
    b.add_argument("--exchange-interval", type=int, default=100)
    b.add_argument("--out", required=True)
    b.add_argument("--plot", action="store_true")
    b.set_defaults(func=cmd_baseline)

    i = sub.add_parser("importance", help="tail-probability estimate with a learned density ratio")
    i.add_argument("--model", help="trained truncated-normal model directory")
    i.add_argument("--chain", help="saved ratio chain (otherwise one is trained)")
    i.add_argument("--save-chain")
    i.add_argument("--c", type=float)
    i.add_argument("--dim", type=int)
    i.add_argument("--rounds", type=int, default=200)
    i.add_argument("--per-round", type=int, default=500)
    i.add_argument("--epochs", type=int, default=DreConfig.epochs)
    i.add_argument("--lr", type=float, default=DreConfig.lr)
    i.add_argument("--batch-size", type=int, default=DreConfig.batch_size)
    i.add_argument("--dre-samples", type=int, default=100_000)
    i.add_argument("--telescoping", action="store_true", help="one ratio stage per block")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out")
    i.add_argument("--plot", action="store_true")
    i.set_defaults(func=cmd_importance)

    n = sub.add_parser("inspect", help="print a model manifest")
    n.add_argument("model")
    n.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"annealflow {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"annealflow {args.command}: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f"annealflow {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

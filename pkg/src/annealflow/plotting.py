"""PNG figures written next to the CSV outputs (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def scatter_samples(samples, path, reference=None, centers=None, title: Optional[str] = None,
                    dims: Sequence[int] = (0, 1)) -> Path:
    """Scatter of two coordinates of ``samples`` (plus optional reference draws and mode centers)."""
    X = np.asarray(samples, dtype=np.float64)
    i, j = dims if X.shape[1] > 1 else (0, 0)
    fig, ax = plt.subplots(figsize=(5, 5))
    if reference is not None and len(reference):
        R = np.asarray(reference)
        ax.scatter(R[:, i], R[:, j], s=2, alpha=0.25, color="0.6", label="reference")
    if len(X):
        ax.scatter(X[:, i], X[:, j], s=2, alpha=0.5, color="tab:blue", label="samples")
    if centers is not None:
        C = np.asarray(centers)
        ax.scatter(C[:, i], C[:, j], marker="x", color="tab:red", s=40, label="modes")
    ax.set_xlabel(f"dim_{i + 1}")
    ax.set_ylabel(f"dim_{j + 1}")
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", markerscale=4, fontsize=8)
    return _save(fig, path)


def loss_traces(trace_rows, path, title: Optional[str] = None) -> Path:
    """One loss curve per block; ``trace_rows`` holds ``TraceRow`` objects or dicts."""
    by_block: dict[int, list] = {}
    for r in trace_rows:
        block = r["block"] if isinstance(r, dict) else r.block
        loss = r["loss"] if isinstance(r, dict) else r.loss
        by_block.setdefault(int(block), []).append(float(loss))
    fig, ax = plt.subplots(figsize=(7, 4))
    cmap = plt.get_cmap("viridis", max(len(by_block), 1))
    for n, (block, losses) in enumerate(sorted(by_block.items())):
        ax.plot(np.arange(len(losses)), losses, lw=0.8, color=cmap(n), label=f"block {block}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    if title:
        ax.set_title(title)
    if by_block:
        ax.legend(fontsize=6, ncol=2)
    return _save(fig, path)


def estimate_histogram(estimates, path, truth: Optional[float] = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(estimates), bins=30, color="tab:blue", alpha=0.8)
    if truth is not None:
        ax.axvline(truth, color="tab:red", ls="--", label="analytic")
        ax.legend()
    ax.set_xlabel("estimate")
    ax.set_ylabel("rounds")
    return _save(fig, path)

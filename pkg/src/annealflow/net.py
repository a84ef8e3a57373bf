"""Fully connected velocity networks and their gradient machinery.

A :class:`VelocityNet` maps ``(x, t)`` to a velocity in ``R^d`` through
sigmoid hidden layers and a linear output layer.  Parameters are float64
torch tensors; torch's autograd supplies the reverse-mode parameter
gradients of any scalar loss built from forward passes (:class:`LossGraph`).

The same class with ``time_input=False`` and a scalar output serves as the
density-ratio network.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .densities import DTYPE, as_tensor
from .errors import NumericalError, ValidationError

MAGIC = b"AFLW"
FORMAT_VERSION = 1


class VelocityNet:
    """MLP ``[d (+1), h1, ..., hL, out]`` with sigmoid hidden activations.

    ``widths`` lists every layer width including input and output.  With
    ``time_input`` the first width is ``dim + 1`` and the input is the
    concatenation ``(x, t)``.
    """

    def __init__(self, widths: Sequence[int], weights, biases, time_input: bool = True):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ValidationError("a network needs at least an input and an output width")
        if len(weights) != len(widths) - 1 or len(biases) != len(widths) - 1:
            raise ValidationError("one weight matrix and one bias per layer")
        self.widths = widths
        self.time_input = time_input
        self.weights = [as_tensor(w).clone().requires_grad_(True) for w in weights]
        self.biases = [as_tensor(b).clone().requires_grad_(True) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if tuple(w.shape) != (widths[i + 1], widths[i]) or tuple(b.shape) != (widths[i + 1],):
                raise ValidationError(f"layer {i}: parameter shapes do not match widths")

    @property
    def dim(self) -> int:
        return self.widths[0] - 1 if self.time_input else self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def parameters(self) -> list[torch.Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def num_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def get_flat(self) -> np.ndarray:
        return torch.cat([p.detach().reshape(-1) for p in self.parameters()]).numpy().copy()

    def set_flat(self, flat) -> None:
        flat = as_tensor(flat)
        if flat.numel() != self.num_params:
            raise ValidationError("flat parameter vector has the wrong length")
        i = 0
        with torch.no_grad():
            for p in self.parameters():
                n = p.numel()
                p.copy_(flat[i:i + n].reshape(p.shape))
                i += n

    def copy(self) -> "VelocityNet":
        return VelocityNet(self.widths, [w.detach() for w in self.weights],
                           [b.detach() for b in self.biases], self.time_input)

    def __call__(self, x: torch.Tensor, t=None) -> torch.Tensor:
        """Forward pass on a batch ``(..., d)``; ``t`` is a scalar or matches the batch shape."""
        w0 = self.weights[0]
        shape = x.shape
        x = x.reshape(-1, shape[-1])
        if self.time_input:
            if t is None:
                raise ValidationError("this network needs a time input")
            if isinstance(t, torch.Tensor) and t.dim() > 0:
                h = torch.addmm(self.biases[0], x, w0[:, :-1].T) + t.reshape(-1, 1) * w0[:, -1]
            else:
                h = torch.addmm(self.biases[0] + float(t) * w0[:, -1], x, w0[:, :-1].T)
        else:
            h = torch.addmm(self.biases[0], x, w0.T)
        for w, b in zip(self.weights[1:], self.biases[1:]):
            h = torch.addmm(b, torch.sigmoid(h), w.T)
        return h.reshape(*shape[:-1], h.shape[-1])


def init_network(dim: int, hidden_widths: Sequence[int], seed: int, out_dim: Optional[int] = None,
                 time_input: bool = True) -> VelocityNet:
    """Fan-balanced uniform weights ``U(+-sqrt(6/(fan_in+fan_out)))``, zero biases."""
    if len(hidden_widths) == 0:
        raise ValidationError("hidden_widths must be nonempty")
    widths = [dim + 1 if time_input else dim, *hidden_widths, dim if out_dim is None else out_dim]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return VelocityNet(widths, weights, biases, time_input)


def zero_network(dim: int, hidden_widths: Sequence[int] = (), out_dim: Optional[int] = None,
                 time_input: bool = True) -> VelocityNet:
    widths = [dim + 1 if time_input else dim, *hidden_widths, dim if out_dim is None else out_dim]
    weights = [np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])]
    biases = [np.zeros(o) for o in widths[1:]]
    return VelocityNet(widths, weights, biases, time_input)


def linear_field(A, b=None, time_coef=None) -> VelocityNet:
    """Hidden-layer-free net realizing ``v(x, t) = A x + b + c t``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    d = A.shape[0]
    W = np.zeros((d, d + 1))
    W[:, :d] = A
    if time_coef is not None:
        W[:, d] = time_coef
    return VelocityNet([d + 1, d], [W], [np.zeros(d) if b is None else np.asarray(b, dtype=np.float64)])


def forward(net: VelocityNet, x, t) -> np.ndarray:
    """numpy forward pass; rejects non-finite inputs and ``t`` outside [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(t)):
        raise ValidationError("forward: non-finite input")
    if net.time_input and np.any((np.asarray(t) < 0) | (np.asarray(t) > 1)):
        raise ValidationError("forward: t must lie in [0, 1]")
    with torch.no_grad():
        tt = as_tensor(t) if np.ndim(t) else t
        return net(torch.as_tensor(x), tt).numpy()


# --------------------------------------------------------------------------
# loss graphs and gradients


@dataclass
class LossGraph:
    """A recorded scalar loss over one minibatch and the net it depends on.

    ``terms`` keeps the named per-sample pieces (useful for diagnostics and
    for locating the first non-finite contribution).
    """

    value: torch.Tensor
    net: VelocityNet
    terms: dict = field(default_factory=dict)

    def item(self) -> float:
        return float(self.value.detach())


def check_finite(name: str, t: torch.Tensor) -> None:
    t = t.detach()
    if torch.isfinite(t).all():
        return
    rows = t.reshape(t.shape[0], -1) if t.dim() else t.reshape(1, 1)
    idx = int(torch.nonzero(~torch.isfinite(rows).all(-1))[0, 0])
    raise NumericalError(f"non-finite value in {name} at sample {idx}")


def param_gradient(graph: LossGraph) -> np.ndarray:
    """Exact gradient of the recorded scalar with respect to every parameter, flattened."""
    if not torch.isfinite(graph.value):
        for name, term in graph.terms.items():
            check_finite(name, term)
        raise NumericalError("loss is not finite")
    params = graph.net.parameters()
    if not graph.value.requires_grad:
        return np.zeros(graph.net.num_params)
    grads = torch.autograd.grad(graph.value, params, allow_unused=True)
    flat = torch.cat([(g if g is not None else torch.zeros_like(p)).reshape(-1) for g, p in zip(grads, params)])
    if not torch.isfinite(flat).all():
        raise NumericalError("non-finite parameter gradient")
    return flat.numpy()


# --------------------------------------------------------------------------
# divergence


def hutchinson_divergence(net: Callable, x, t, sigma: float, num_probes: int = 1, rng=None,
                          eps: Optional[torch.Tensor] = None, v_at_x: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Finite-difference Hutchinson estimate of ``div_x v(x, t)`` per row.

    Averages ``eps . (v(x + sigma eps, t) - v(x, t)) / sigma`` over
    ``num_probes`` standard-normal probes.  Only forward passes are used, so the
    result can live inside a recorded loss.  ``eps`` of shape
    ``(num_probes, n, d)`` may be supplied instead of ``rng``; ``v_at_x`` reuses
    an already computed ``v(x, t)``.
    """
    if not sigma > 0 or num_probes < 1:
        raise ValidationError("hutchinson_divergence needs sigma > 0 and num_probes >= 1")
    x = as_tensor(x)
    squeeze = x.dim() == 1
    if squeeze:
        x = x.unsqueeze(0)
    if eps is None:
        eps = torch.as_tensor(rng.standard_normal((num_probes, *x.shape)))
    if v_at_x is None:
        v_at_x = net(x, t)
    tt = t.expand(eps.shape[:-1]) if isinstance(t, torch.Tensor) and t.dim() > 0 else t
    v_pert = net(x.unsqueeze(0) + sigma * eps, tt)
    est = ((v_pert - v_at_x) * eps).sum(-1).mean(0) / sigma
    return est[0] if squeeze else est


def exact_divergence(net: Callable, x, t) -> torch.Tensor:
    """``sum_i dv_i/dx_i`` by central differences, step ``1e-6 (1 + |x|_inf)`` per row."""
    x = as_tensor(x).detach()
    squeeze = x.dim() == 1
    if squeeze:
        x = x.unsqueeze(0)
    n, d = x.shape
    step = 1e-6 * (1.0 + x.abs().amax(-1, keepdim=True))  # (n, 1)
    eye = torch.eye(d, dtype=DTYPE)
    shifted = x.unsqueeze(0) + step.unsqueeze(0) * eye.unsqueeze(1)  # (d, n, d)
    back = x.unsqueeze(0) - step.unsqueeze(0) * eye.unsqueeze(1)
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        t = t.repeat(d)
    with torch.no_grad():
        vp = net(shifted.reshape(d * n, d), t)
        vm = net(back.reshape(d * n, d), t)
    vp = vp.reshape(d, n, d)
    vm = vm.reshape(d, n, d)
    diag = torch.diagonal(vp - vm, dim1=0, dim2=2)  # (n, d)
    out = diag.sum(-1) / (2.0 * step[:, 0])
    return out[0] if squeeze else out


# --------------------------------------------------------------------------
# model files


def _pack(net: VelocityNet) -> bytes:
    L = len(net.widths) - 1
    head = MAGIC + struct.pack("<III", FORMAT_VERSION, net.dim, L)
    head += struct.pack(f"<{L + 1}I", *net.widths)
    body = b"".join(
        np.ascontiguousarray(p.detach().numpy(), dtype="<f8").tobytes() for p in net.parameters()
    )
    return head + body


def save_net(net: VelocityNet, path) -> None:
    Path(path).write_bytes(_pack(net))


def net_to_bytes(net: VelocityNet) -> bytes:
    return _pack(net)


def net_from_bytes(data: bytes) -> VelocityNet:
    if data[:4] != MAGIC:
        raise ValidationError("not an AFLW model file (bad magic)")
    try:
        version, dim, L = struct.unpack_from("<III", data, 4)
        if version != FORMAT_VERSION:
            raise ValidationError(f"unsupported AFLW format version {version}")
        off = 4 + 12
        widths = list(struct.unpack_from(f"<{L + 1}I", data, off))
    except struct.error as exc:
        raise ValidationError(f"truncated AFLW header: {exc}") from None
    if widths[0] - dim not in (0, 1):
        raise ValidationError("AFLW header dim does not match the input width")
    off += 4 * (L + 1)
    expected = off + 8 * sum(widths[i + 1] * (widths[i] + 1) for i in range(L))
    if expected != len(data):
        raise ValidationError(f"AFLW file has {len(data)} bytes, header implies {expected}")
    weights, biases = [], []
    for i in range(L):
        n_w = widths[i + 1] * widths[i]
        w = np.frombuffer(data, dtype="<f8", count=n_w, offset=off).reshape(widths[i + 1], widths[i])
        off += 8 * n_w
        b = np.frombuffer(data, dtype="<f8", count=widths[i + 1], offset=off)
        off += 8 * widths[i + 1]
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(data):
        raise ValidationError("AFLW file has trailing or missing bytes")
    # input width dim + 1 means the last input is time
    return VelocityNet(widths, weights, biases, time_input=widths[0] == dim + 1)


def load_net(path) -> VelocityNet:
    return net_from_bytes(Path(path).read_bytes())

import numpy as np
import pytest
import torch

from annealflow.errors import NumericalError, ValidationError
from annealflow.net import (LossGraph, VelocityNet, exact_divergence, forward, hutchinson_divergence, init_network,
                            linear_field, load_net, net_from_bytes, net_to_bytes, param_gradient, save_net,
                            zero_network)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def test_init_deterministic_and_param_count():
    a = init_network(2, (32, 32), seed=5)
    b = init_network(2, (32, 32), seed=5)
    assert np.array_equal(a.get_flat(), b.get_flat())
    assert a.num_params == (3 * 32 + 32) + (32 * 32 + 32) + (32 * 2 + 2) == 1250
    for w in a.weights:
        lim = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        assert float(w.detach().abs().max()) <= lim
    assert all(float(b.detach().abs().max()) == 0.0 for b in a.biases)


def test_fresh_net_at_origin_matches_hand_evaluation():
    net = init_network(2, (5, 4), seed=1)
    W = [w.detach().numpy() for w in net.weights]
    h = sigmoid(W[0] @ np.zeros(3))
    h = sigmoid(W[1] @ h)
    expected = W[2] @ h
    assert np.allclose(forward(net, np.zeros((1, 2)), 0.0)[0], expected, atol=1e-15)


def test_zero_net_and_batching():
    z = zero_network(3, (4,))
    assert np.all(forward(z, np.random.default_rng(0).standard_normal((5, 3)), 0.3) == 0)
    net = init_network(3, (8, 8), seed=2)
    x = np.random.default_rng(1).standard_normal((6, 3))
    batch = forward(net, x, 0.4)
    rows = np.stack([forward(net, x[i:i + 1], 0.4)[0] for i in range(6)])
    assert np.allclose(batch, rows, atol=1e-15)
    # per-row time vector matches scalar time
    assert np.allclose(forward(net, x, np.full(6, 0.4)), batch, atol=1e-15)


def test_single_hidden_unit_hand_value():
    net = VelocityNet([2, 1, 1], [np.array([[2.0, -1.0]]), np.array([[3.0]])], [np.array([0.5]), np.array([0.25])])
    x, t = 0.7, 0.2
    expected = 3.0 * sigmoid(2.0 * x - 1.0 * t + 0.5) + 0.25
    assert forward(net, np.array([[x]]), t)[0, 0] == pytest.approx(expected, abs=1e-15)


def test_forward_rejects_bad_input():
    net = init_network(2, (4,), seed=0)
    with pytest.raises(ValidationError):
        forward(net, np.array([[np.inf, 0.0]]), 0.0)
    with pytest.raises(ValidationError):
        forward(net, np.zeros((1, 2)), 1.5)


def _fd_param_grad(net, loss_fn, h=1e-5):
    flat = net.get_flat()
    g = np.zeros_like(flat)
    for i in range(len(flat)):
        for sgn in (1, -1):
            p = flat.copy()
            p[i] += sgn * h
            net.set_flat(p)
            g[i] += sgn * float(loss_fn().value.detach())
        g[i] /= 2 * h
    net.set_flat(flat)
    return g


def test_param_gradient_linear_closed_form():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((2, 2))
    net = linear_field(A)
    x = torch.as_tensor(rng.standard_normal((5, 2)))
    graph = LossGraph((net(x, 0.0) ** 2).sum(), net)
    g = param_gradient(graph)
    # d/dW sum |W [x, t]|^2 with t = 0 and zero bias
    xa = np.c_[x.numpy(), np.zeros(5)]
    expected_W = 2 * (xa @ np.c_[A, np.zeros(2)].T).T @ xa
    expected_b = 2 * (x.numpy() @ A.T).sum(0)
    assert np.allclose(g, np.r_[expected_W.ravel(), expected_b], atol=1e-12)


def test_param_gradient_vs_finite_differences():
    rng = np.random.default_rng(1)
    net = init_network(2, (8,), seed=3)
    x = torch.as_tensor(rng.standard_normal((7, 2)))

    def loss():
        v = net(x, 0.3)
        return LossGraph((torch.sin(v) * v).sum() + (v ** 2).mean(), net)

    g = param_gradient(loss())
    fd = _fd_param_grad(net, loss)
    idx = rng.choice(len(g), 20, replace=False)
    rel = np.abs(g[idx] - fd[idx]) / np.maximum(1e-8, np.abs(fd[idx]))
    assert np.all((rel < 1e-5) | (np.abs(g[idx] - fd[idx]) < 1e-9))


def test_constant_loss_zero_gradient_and_nonfinite():
    net = init_network(2, (4,), seed=0)
    assert np.all(param_gradient(LossGraph(torch.tensor(3.0, dtype=torch.float64), net)) == 0)
    x = torch.tensor([[1.0, 2.0], [float("nan"), 0.0]], dtype=torch.float64)
    v = net(x, 0.0)
    with pytest.raises(NumericalError, match="sample 1"):
        param_gradient(LossGraph(v.sum(), net, {"velocity": v}))


def test_hutchinson_linear_and_constant_fields():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    net = linear_field(A)
    x = torch.as_tensor(rng.standard_normal((1, 3)))
    P = 10_000
    eps = torch.as_tensor(rng.standard_normal((P, 1, 3)))
    v0 = net(x, 0.0)
    per_probe = ((net(x + 1e-3 * eps, 0.0) - v0) * eps).sum(-1)[:, 0] / 1e-3
    per_probe = per_probe.detach()
    est = float(per_probe.mean())
    se = float(per_probe.std()) / np.sqrt(P)
    assert abs(est - np.trace(A)) < 3 * se
    assert float(hutchinson_divergence(net, x, 0.0, 1e-3, eps=eps)[0].detach()) == pytest.approx(est, abs=1e-10)
    const = linear_field(np.zeros((3, 3)), b=np.ones(3))
    assert float(hutchinson_divergence(const, x, 0.0, 0.1, 5, rng).abs().max().detach()) == 0.0


def test_hutchinson_converges_at_mc_rate():
    net = init_network(2, (16, 16), seed=11)
    x = torch.as_tensor(np.array([[0.3, -0.8]]))
    exact = float(exact_divergence(net, x, 0.5)[0])
    errs = []
    for P in (100, 1000, 10_000):
        e = [abs(float(hutchinson_divergence(net, x, 0.5, 1e-4, P, np.random.default_rng(s))[0].detach()) - exact)
             for s in range(30)]
        errs.append(np.sqrt(np.mean(np.square(e))))
    slope = np.polyfit(np.log10([100, 1000, 10_000]), np.log10(errs), 1)[0]
    assert -0.65 < slope < -0.35


def test_exact_divergence_linear_and_constant():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((4, 4))
    x = torch.as_tensor(rng.standard_normal((10, 4)) * 3)
    assert np.allclose(exact_divergence(linear_field(A), x, 0.0).numpy(), np.trace(A), atol=1e-6)
    const = linear_field(np.zeros((4, 4)), b=np.arange(4.0))
    assert np.allclose(exact_divergence(const, x, 0.0).numpy(), 0.0, atol=1e-12)


def test_exact_divergence_against_jacobian_columns():
    net = init_network(2, (16,), seed=4)
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = torch.as_tensor(rng.standard_normal(2), dtype=torch.float64)
        t = float(rng.random())
        J = torch.autograd.functional.jacobian(lambda z: net(z.unsqueeze(0), t)[0], x)
        assert float(exact_divergence(net, x, t)) == pytest.approx(float(torch.trace(J)), abs=1e-6)


def test_serialization_round_trip(tmp_path):
    net = init_network(3, (7, 5), seed=9)
    save_net(net, tmp_path / "n.aflw")
    back = load_net(tmp_path / "n.aflw")
    assert back.widths == net.widths and back.time_input
    assert np.array_equal(back.get_flat(), net.get_flat())
    x = np.random.default_rng(0).standard_normal((20, 3))
    assert forward(back, x, 0.25).tobytes() == forward(net, x, 0.25).tobytes()
    raw = net_to_bytes(net)
    assert raw[:4] == b"AFLW"
    ratio = init_network(3, (4,), seed=1, out_dim=1, time_input=False)
    again = net_from_bytes(net_to_bytes(ratio))
    assert not again.time_input and again.out_dim == 1
    with pytest.raises(ValidationError):
        net_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValidationError):
        net_from_bytes(raw[:-8])

"""Two-layer network forward/backward against loop oracles and differences."""

import numpy as np
import numpy.testing as npt
import pytest

from radmoco import MlpParams, init_params, mlp_forward
from radmoco.mlp import mlp_backward, mlp_forward_full


def toy_params(seed, in_dim=6, width=5, out_dim=2):
    rng = np.random.default_rng(seed)
    return MlpParams(
        w1=rng.normal(size=(in_dim, width)),
        b1=rng.normal(size=width),
        w2=rng.normal(size=(width, out_dim)),
        b2=rng.normal(size=out_dim),
    )


def forward_loops(v, p):
    """Triple-loop scalar reference of the forward pass."""
    h = np.zeros(p.width)
    for j in range(p.width):
        acc = p.b1[j]
        for i in range(p.in_dim):
            acc += v[i] * p.w1[i, j]
        h[j] = acc if acc > 0 else 0.0
    out = np.zeros(p.out_dim)
    for k in range(p.out_dim):
        acc = p.b2[k]
        for j in range(p.width):
            acc += h[j] * p.w2[j, k]
        out[k] = acc
    return out


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(0)
    p = toy_params(1)
    for _ in range(20):
        v = rng.normal(size=p.in_dim)
        npt.assert_allclose(mlp_forward(v, p), forward_loops(v, p), atol=1e-12)


def test_forward_single_neuron_hand_case():
    # one input, one hidden unit, one output: out = w2*relu(w1*v + b1) + b2
    p = MlpParams(
        w1=np.array([[2.0]]), b1=np.array([-1.0]),
        w2=np.array([[3.0]]), b2=np.array([0.5]),
    )
    npt.assert_allclose(mlp_forward(np.array([1.0]), p), [3.5])  # 3*1 + 0.5
    npt.assert_allclose(mlp_forward(np.array([0.25]), p), [0.5])  # relu(-0.5)=0


def test_forward_batch_matches_single():
    rng = np.random.default_rng(2)
    p = toy_params(3)
    vb = rng.normal(size=(7, p.in_dim))
    out = mlp_forward(vb, p)
    assert out.shape == (7, p.out_dim)
    for i in range(7):
        npt.assert_allclose(out[i], mlp_forward(vb[i], p), atol=1e-15)


def test_forward_full_intermediates():
    rng = np.random.default_rng(4)
    p = toy_params(5)
    v = rng.normal(size=p.in_dim)
    out, z1, h = mlp_forward_full(v, p)
    npt.assert_allclose(z1, v @ p.w1 + p.b1, atol=1e-14)
    npt.assert_array_equal(h, np.maximum(z1, 0.0))
    npt.assert_allclose(out, h @ p.w2 + p.b2, atol=1e-14)


def test_init_params_ranges_and_determinism():
    p = init_params(0, in_dim=32, width=128, out_dim=2)
    assert p.w1.shape == (32, 128)
    assert p.w2.shape == (128, 2)
    npt.assert_array_equal(p.b1, np.zeros(128))
    npt.assert_array_equal(p.b2, np.zeros(2))
    assert np.all(np.abs(p.w1) <= np.sqrt(6.0 / 32))
    assert np.all(np.abs(p.w2) <= np.sqrt(6.0 / 128))
    q = init_params(0, in_dim=32, width=128, out_dim=2)
    for a, b in zip(p.arrays(), q.arrays()):
        npt.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        init_params(0, in_dim=0)


def test_params_shape_validation():
    with pytest.raises(ValueError):
        MlpParams(np.zeros((3, 4)), np.zeros(5), np.zeros((4, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        MlpParams(np.zeros((3, 4)), np.zeros(4), np.zeros((5, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        MlpParams(np.zeros((3, 4)), np.zeros(4), np.zeros((4, 2)), np.zeros(3))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(6)
    p = toy_params(7)
    vb = rng.normal(size=(5, p.in_dim))
    # keep preactivations away from the ReLU kink so differences stay smooth
    z1 = vb @ p.w1 + p.b1
    assert np.min(np.abs(z1)) > 1e-3
    up = rng.normal(size=(5, p.out_dim))

    def loss(params, v):
        return float(np.sum(mlp_forward(v, params) * up))

    grads, dv = mlp_backward(vb, p, up)
    h = 1e-6
    for name in ("w1", "b1", "w2", "b2"):
        arr = getattr(p, name)
        got = getattr(grads, name)
        for idx in np.ndindex(arr.shape):
            pert = p.copy()
            getattr(pert, name)[idx] += h
            fp = loss(pert, vb)
            getattr(pert, name)[idx] -= 2 * h
            fm = loss(pert, vb)
            npt.assert_allclose(got[idx], (fp - fm) / (2 * h), rtol=1e-6, atol=1e-8)
    for idx in np.ndindex(vb.shape):
        vp = vb.copy()
        vp[idx] += h
        fp = loss(p, vp)
        vp[idx] -= 2 * h
        fm = loss(p, vp)
        npt.assert_allclose(dv[idx], (fp - fm) / (2 * h), rtol=1e-6, atol=1e-8)


def test_backward_matches_loop_oracle():
    rng = np.random.default_rng(8)
    p = toy_params(9)
    v = rng.normal(size=p.in_dim)
    up = rng.normal(size=p.out_dim)
    grads, dv = mlp_backward(v, p, up)
    z1 = v @ p.w1 + p.b1
    h = np.maximum(z1, 0.0)
    gw2 = np.zeros_like(p.w2)
    for j in range(p.width):
        for k in range(p.out_dim):
            gw2[j, k] = h[j] * up[k]
    gh = np.zeros(p.width)
    for j in range(p.width):
        for k in range(p.out_dim):
            gh[j] += p.w2[j, k] * up[k]
    gz = gh * (z1 > 0)
    gw1 = np.zeros_like(p.w1)
    for i in range(p.in_dim):
        for j in range(p.width):
            gw1[i, j] = v[i] * gz[j]
    dv_want = np.zeros(p.in_dim)
    for i in range(p.in_dim):
        for j in range(p.width):
            dv_want[i] += p.w1[i, j] * gz[j]
    npt.assert_allclose(grads.w2, gw2, atol=1e-13)
    npt.assert_allclose(grads.b2, up, atol=1e-15)
    npt.assert_allclose(grads.b1, gz, atol=1e-13)
    npt.assert_allclose(grads.w1, gw1, atol=1e-13)
    npt.assert_allclose(dv, dv_want, atol=1e-13)


def test_backward_relu_kills_negative_units():
    # all hidden preactivations negative -> only b2/w2-through-zero remain
    p = MlpParams(
        w1=np.array([[1.0, 2.0]]), b1=np.array([-10.0, -20.0]),
        w2=np.array([[1.0], [1.0]]), b2=np.array([0.0]),
    )
    grads, dv = mlp_backward(np.array([1.0]), p, np.array([1.0]))
    npt.assert_array_equal(grads.w1, np.zeros((1, 2)))
    npt.assert_array_equal(grads.b1, np.zeros(2))
    npt.assert_array_equal(grads.w2, np.zeros((2, 1)))  # h = 0
    npt.assert_array_equal(grads.b2, np.array([1.0]))
    npt.assert_array_equal(dv, np.zeros(1))


def test_backward_subgradient_zero_at_kink():
    # preactivation exactly 0: the chosen subgradient drops the unit
    p = MlpParams(
        w1=np.array([[1.0]]), b1=np.array([0.0]),
        w2=np.array([[5.0]]), b2=np.array([0.0]),
    )
    grads, dv = mlp_backward(np.array([0.0]), p, np.array([1.0]))
    npt.assert_array_equal(grads.b1, np.zeros(1))
    npt.assert_array_equal(dv, np.zeros(1))


def test_backward_cache_matches_recompute():
    rng = np.random.default_rng(10)
    p = toy_params(11)
    vb = rng.normal(size=(6, p.in_dim))
    up = rng.normal(size=(6, p.out_dim))
    _, z1, h = mlp_forward_full(vb, p)
    g_plain, dv_plain = mlp_backward(vb, p, up)
    g_cached, dv_cached = mlp_backward(vb, p, up, cache=(z1, h))
    npt.assert_array_equal(dv_plain, dv_cached)
    for a, b in zip(g_plain.arrays(), g_cached.arrays()):
        npt.assert_array_equal(a, b)

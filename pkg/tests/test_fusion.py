import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artikit.fusion import (
    DEFAULT_LAMBDAS,
    AttentionWeights,
    flow_interpolate,
    flow_matching_loss,
    fuse_concat,
    integrate_flow,
    partwise_attention,
    softmax,
    vae_loss,
)


def setup(rng, N=12, c_art=4, c_geo=5, d=3, K=3):
    V_art = rng.normal(size=(N, c_art))
    V_geo = rng.normal(size=(N, c_geo))
    parts = rng.integers(0, K, N)
    return V_art, V_geo, parts, AttentionWeights.random(c_art, c_geo, d, rng)


def test_single_row_softmax_is_one():
    rng = np.random.default_rng(0)
    V_art, V_geo, _, w = setup(rng, N=1)
    out = partwise_attention(V_art, V_geo, [0], w)
    np.testing.assert_allclose(out, V_geo @ w.W_V @ w.W_O + V_art, rtol=0, atol=1e-15)


def test_identical_keys_average_values_by_hand():
    # three voxels of one part with identical geometry keys
    W = AttentionWeights(W_Q=np.array([[1.0]]), W_K=np.array([[1.0], [0.0]]),
                         W_V=np.array([[0.0], [1.0]]), W_O=np.array([[2.0]]))
    V_geo = np.array([[1.0, 3.0], [1.0, 6.0], [1.0, 9.0]])
    V_art = np.array([[0.5], [-1.0], [4.0]])
    out = partwise_attention(V_art, V_geo, [7, 7, 7], W)
    # mean of V_geo W_V is 6, times W_O gives 12
    np.testing.assert_allclose(out, [[12.5], [11.0], [16.0]], rtol=0, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_mask_soundness_is_exact(seed):
    rng = np.random.default_rng(seed)
    V_art, V_geo, parts, w = setup(rng)
    base = partwise_attention(V_art, V_geo, parts, w)
    target = parts[0]
    other = parts != target
    bumped = V_geo.copy()
    bumped[other] += rng.normal(scale=10.0, size=bumped[other].shape)
    out = partwise_attention(V_art, bumped, parts, w)
    assert np.array_equal(out[~other], base[~other])


@given(st.integers(0, 2 ** 32 - 1))
def test_row_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    V_art, V_geo, parts, w = setup(rng)
    perm = rng.permutation(len(parts))
    a = partwise_attention(V_art, V_geo, parts, w)[perm]
    b = partwise_attention(V_art[perm], V_geo[perm], parts[perm], w)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_attention_shape_checks():
    rng = np.random.default_rng(1)
    V_art, V_geo, parts, w = setup(rng)
    with pytest.raises(ValueError):
        partwise_attention(V_art[:-1], V_geo, parts, w)
    with pytest.raises(ValueError):
        partwise_attention(V_art[:, :-1], V_geo, parts, w)
    with pytest.raises(ValueError):
        AttentionWeights(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 3)), np.zeros((3, 2)))


def test_softmax_stability():
    rng = np.random.default_rng(2)
    logits = rng.uniform(-1e4, 1e4, size=(50, 30))
    s = softmax(logits)
    assert np.all(np.isfinite(s))
    assert np.max(np.abs(s.sum(axis=1) - 1)) <= 1e-12


def test_fuse_concat_layout():
    geo = np.arange(6.0).reshape(3, 2)
    art = -np.arange(9.0).reshape(3, 3)
    out = fuse_concat(geo, art)
    assert out.shape == (3, 5)
    assert np.array_equal(out[:, :2], geo) and np.array_equal(out[:, 2:], art)
    perm = [2, 0, 1]
    assert np.array_equal(fuse_concat(geo[perm], art[perm]), out[perm])
    with pytest.raises(ValueError):
        fuse_concat(geo, art[:2])


# ---------------------------------------------------------------- losses


def naive_vae(p, y, a_hat, a, mu, sigma, l1, l2, movable):
    geo = 0.0
    for pi, yi in zip(p, y):
        geo += -(yi * math.log(max(pi, 1e-7)) + (1 - yi) * math.log(max(1 - pi, 1e-7)))
    geo /= len(p)
    art, n = 0.0, 0
    for r in range(len(a)):
        if movable[r]:
            for c in range(a.shape[1]):
                art += (a_hat[r, c] - a[r, c]) ** 2
                n += 1
    art /= n
    kl = 0.0
    for m, s in zip(mu, sigma):
        kl += 0.5 * (m * m + s * s - math.log(s * s) - 1)
    kl /= len(mu)
    return geo + l1 * art + l2 * kl, geo, art, kl


def test_default_weights():
    assert DEFAULT_LAMBDAS == (1.0, 0.5)


def test_loss_zero_at_minimum():
    y = np.array([1.0, 0.0, 1.0, 0.0])
    a = np.arange(8.0).reshape(4, 2)
    loss = vae_loss(y, y, a, a, np.zeros(3), np.ones(3))
    assert loss.total == loss.geo == loss.art == loss.kl == 0.0


@given(st.integers(0, 2 ** 32 - 1))
def test_loss_matches_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 20))
    p = rng.uniform(0, 1, n)
    p[0] = 0.0  # exercises the log floor
    y = rng.integers(0, 2, n).astype(float)
    a, a_hat = rng.normal(size=(n, 9)), rng.normal(size=(n, 9))
    mu, sigma = rng.normal(size=5), rng.uniform(0.1, 3, 5)
    movable = rng.random(n) < 0.7
    movable[0] = True
    l1, l2 = rng.uniform(0, 2, 2)
    got = vae_loss(p, y, a_hat, a, mu, sigma, l1, l2, movable=movable)
    want = naive_vae(p, y, a_hat, a, mu, sigma, l1, l2, movable)
    np.testing.assert_allclose([got.total, got.geo, got.art, got.kl], want, rtol=1e-12, atol=1e-12)
    assert min(got.geo, got.art, got.kl) >= 0


def test_loss_errors():
    with pytest.raises(ValueError):
        vae_loss([0.5], [1], [[0]], [[0]], [0], [0.0])
    with pytest.raises(ValueError):
        vae_loss([math.nan], [1], [[0]], [[0]], [0], [1])
    with pytest.raises(ValueError):
        vae_loss([0.5, 0.5], [1], [[0]], [[0]], [0], [1])


def test_interpolation():
    z0, z1 = np.array([0.1, -3.0]), np.array([7.0, 2.5])
    assert np.array_equal(flow_interpolate(z0, z1, 0.0), z0)
    assert np.array_equal(flow_interpolate(z0, z1, 1.0), z1)
    assert np.array_equal(flow_interpolate([0, 0], [2, 4], 0.5), [1, 2])
    with pytest.raises(ValueError):
        flow_interpolate(z0, z1, 1.01)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 1), st.floats(-5, 5))
def test_interpolation_is_linear(seed, t, a):
    rng = np.random.default_rng(seed)
    z0, z1 = rng.normal(size=4), rng.normal(size=4)
    np.testing.assert_allclose(flow_interpolate(a * z0, a * z1, t), a * flow_interpolate(z0, z1, t),
                               rtol=1e-12, atol=1e-12)


def test_flow_matching_loss():
    rng = np.random.default_rng(4)
    z0, z1 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    assert flow_matching_loss(z1 - z0, z0, z1) == 0.0
    assert math.isclose(flow_matching_loss(np.zeros_like(z0), z0, z1), np.mean((z1 - z0) ** 2), rel_tol=1e-14)
    v = rng.normal(size=(3, 4))
    naive = sum((v[i, j] - (z1[i, j] - z0[i, j])) ** 2 for i in range(3) for j in range(4)) / 12
    assert abs(flow_matching_loss(v, z0, z1) - naive) <= 1e-12
    with pytest.raises(ValueError):
        flow_matching_loss(v[:2], z0, z1)


# ---------------------------------------------------------------- integration


def decay(z, t):
    return -z


@pytest.mark.parametrize("method", ["euler", "heun", "heun-adaptive"])
@pytest.mark.parametrize("steps", [1, 7, 50])
def test_constant_field(method, steps):
    c = np.array([0.5, -2.0, 3.0])
    out = integrate_flow(lambda z, t: c, np.array([1.0, 1.0, 1.0]), steps, method)
    np.testing.assert_allclose(out, [1.5, -1.0, 4.0], rtol=0, atol=1e-12)


def test_heun_reaches_e_inverse():
    z = integrate_flow(decay, np.array([1.0]), 100, "heun")
    assert abs(z[0] - math.exp(-1)) <= 1e-4


def test_convergence_orders():
    def err(steps, method):
        return abs(integrate_flow(decay, np.array([1.0]), steps, method)[0] - math.exp(-1))

    heun = [err(n, "heun") / err(2 * n, "heun") for n in (10, 20, 40, 80)]
    euler = [err(n, "euler") / err(2 * n, "euler") for n in (10, 20, 40, 80)]
    assert all(3.5 <= r <= 4.5 for r in heun)
    assert all(1.8 <= r <= 2.2 for r in euler)


def test_adaptive_meets_tolerance():
    z = integrate_flow(lambda z, t: np.cos(4 * t) * z, np.array([1.0, -0.5]), 4, "heun-adaptive")
    exact = np.array([1.0, -0.5]) * math.exp(math.sin(4) / 4)
    np.testing.assert_allclose(z, exact, atol=1e-5)


def test_integration_errors():
    with pytest.raises(FloatingPointError):
        integrate_flow(lambda z, t: z * np.nan, np.ones(2), 5, "heun")
    with pytest.raises(FloatingPointError, match="underflow"):
        integrate_flow(lambda z, t: -1e30 * z, np.ones(1), 1, "heun-adaptive")
    with pytest.raises(ValueError):
        integrate_flow(decay, np.ones(1), 0)
    with pytest.raises(ValueError):
        integrate_flow(decay, np.ones(1), 5, "rk4")

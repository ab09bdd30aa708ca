import numpy as np
import pytest
from hypothesis import given, strategies as st

from manifold_sysid._jax import jax, jnp
from manifold_sysid.archmods import (EncoderConfig, EncoderParams, Manifold, Scaling, SsmConfig, encode,
                                     encoder_layout, gamma_count, init_params, lift, pooled_features,
                                     ssm_forward, theta_count, theta_layout)
from manifold_sysid.archmods.ssm import rollout
from manifold_sysid.errors import DimensionMismatchError, DivergenceError

TINY = SsmConfig(hidden_f=4, hidden_g=4)


def count_by_hand(n_x, n_u, n_y, hf, hg):
    f = (n_x + n_u) * hf + hf + hf * n_x + n_x
    g = n_x * hg + hg + hg * n_y + n_y
    return f + g + n_x * n_x + n_x * n_u + n_y * n_x


def test_default_theta_count():
    assert theta_count(SsmConfig()) == count_by_hand(3, 1, 1, 16, 16) == 227


def test_smallest_theta_count():
    # f: W1 (2) + b1 (1) + W2 (1) + b2 (1); g: W1, b1, W2, b2 (1 each); A, B, C (1 each)
    itemized = (2 + 1) + (1 + 1) + (1 + 1) + (1 + 1) + 1 + 1 + 1
    assert theta_count(SsmConfig(1, 1, 1, 1, 1)) == itemized == 12


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(1, 20), st.integers(1, 20))
def test_count_convention(n_x, n_u, n_y, hf, hg):
    cfg = SsmConfig(n_x, n_u, n_y, hf, hg)
    assert theta_count(cfg) == count_by_hand(n_x, n_u, n_y, hf, hg)
    wider = SsmConfig(n_x, n_u, n_y, 2 * hf, hg)
    assert theta_count(wider) - theta_count(cfg) == (n_x + n_u + 1 + n_x) * hf


def test_layout_covers_vector_and_round_trips(rng):
    layout = theta_layout(SsmConfig())
    stops = 0
    for seg in layout.segments:
        assert seg.start == stops
        stops = seg.stop
    assert stops == layout.size
    theta = rng.normal(size=layout.size)
    assert np.array_equal(layout.flatten(layout.unflatten(theta)), theta)


def test_zero_theta_gives_zero_output(rng):
    y = ssm_forward(np.zeros(theta_count(TINY)), theta_layout(TINY), rng.normal(size=50))
    assert np.all(y == 0.0)


def linear_reference(A, B, C, u):
    x = np.zeros(A.shape[0])
    out = []
    for uk in u:
        out.append(C @ x)
        x = A @ x + B[:, 0] * uk
    return np.array(out)[:, 0]


def test_zero_networks_reduce_to_linear_recursion(rng):
    layout = theta_layout(TINY)
    blocks = {s.name: np.zeros(s.shape) for s in layout.segments}
    blocks["A"] = 0.5 * rng.normal(size=(3, 3)) / np.sqrt(3)
    blocks["B"] = rng.normal(size=(3, 1))
    blocks["C"] = rng.normal(size=(1, 3))
    # non-zero biases inside tanh must not leak through zero output weights
    blocks["f.b1"] = rng.normal(size=4)
    u = rng.normal(size=200)
    y = ssm_forward(layout.flatten(blocks), layout, u)
    np.testing.assert_allclose(y, linear_reference(blocks["A"], blocks["B"], blocks["C"], u), atol=1e-12)


@given(st.integers(0, 48), st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3))
def test_causality(j, delta):
    layout = theta_layout(TINY)
    theta = init_params("ssm", TINY, 3)
    u = np.sin(np.arange(50) * 0.3)
    u2 = u.copy()
    u2[j] += delta
    y, y2 = ssm_forward(theta, layout, u), ssm_forward(theta, layout, u2)
    assert np.array_equal(y[: j + 1], y2[: j + 1])


def test_forward_validates_and_detects_divergence():
    layout = theta_layout(TINY)
    with pytest.raises(DimensionMismatchError):
        ssm_forward(np.zeros(3), layout, np.zeros(4))
    blocks = {s.name: np.zeros(s.shape) for s in layout.segments}
    blocks["A"] = 1e3 * np.eye(3)
    blocks["B"] = np.ones((3, 1))
    blocks["C"] = np.ones((1, 3))
    with pytest.raises(DivergenceError) as exc:
        ssm_forward(layout.flatten(blocks), layout, np.ones(400))
    assert exc.value.index > 0


def test_init_properties():
    cfg = SsmConfig()
    layout = theta_layout(cfg)
    a, b = init_params("ssm", cfg, 7), init_params("ssm", cfg, 7)
    assert np.array_equal(a, b)
    assert np.all(a[layout.bias_mask()] == 0.0)
    np.testing.assert_array_equal(layout.unflatten(a)["A"], 0.9 * np.eye(3))
    W1 = layout.unflatten(a)["f.W1"]
    assert np.max(np.abs(W1)) <= np.sqrt(6.0 / (4 + 16))
    enc = EncoderConfig(n_h=8, head_hidden=6, n_phi=3)
    e = init_params("encoder", enc, 1)
    assert np.all(e[encoder_layout(enc).bias_mask()] == 0.0)
    with pytest.raises(ValueError):
        init_params("nope", cfg, 0)


def test_manifold_init_draws():
    n_theta = theta_count(TINY)
    g = init_params("manifold", (TINY, 3), 0)
    assert g.size == gamma_count(n_theta, 3)
    m = Manifold.from_gamma(g, TINY, 3)
    assert np.array_equal(m.gamma, g)
    assert np.all(m.theta_bias[theta_layout(TINY).bias_mask()] == 0.0)
    big = init_params("manifold", (SsmConfig(), 20), 0)[: 227 * 20]
    assert abs(big.std() - 1 / np.sqrt(227)) < 0.05 / np.sqrt(227)


def test_lift_examples(rng):
    n_theta = theta_count(TINY)
    m = Manifold(rng.normal(size=(n_theta, 2)), rng.normal(size=n_theta), TINY)
    assert np.array_equal(lift(m, [0.0, 0.0]), m.theta_bias)
    m0 = Manifold(np.zeros((n_theta, 2)), m.theta_bias, TINY)
    assert np.array_equal(lift(m0, rng.normal(size=2)), m.theta_bias)
    assert gamma_count(244, 20) == 5124
    assert gamma_count(theta_count(SsmConfig()), 20) == 21 * 227
    with pytest.raises(DimensionMismatchError):
        lift(m, [1.0])


def test_lifted_forward_equals_manual_theta(rng):
    n_theta = theta_count(TINY)
    V = 0.1 * rng.normal(size=(n_theta, 2))
    tb = init_params("ssm", TINY, 2)
    m = Manifold(V, tb, TINY)
    phi = rng.normal(size=2)
    u = rng.normal(size=80)
    layout = theta_layout(TINY)
    assert np.array_equal(ssm_forward(lift(m, phi), layout, u), ssm_forward(V @ phi + tb, layout, u))


def test_phi_gradient_is_projected_theta_gradient(rng):
    layout = theta_layout(TINY)
    n_theta = layout.size
    V = 0.05 * rng.normal(size=(n_theta, 3))
    tb = init_params("ssm", TINY, 4)
    u = jnp.asarray(rng.normal(size=(60, 1)))
    y = jnp.asarray(rng.normal(size=(60, 1)))

    def loss_theta(theta):
        ys, _ = rollout(layout.unflatten(theta), u, jnp.zeros(3))
        return jnp.mean((ys - y) ** 2)

    phi = rng.normal(size=3)
    g_phi = jax.grad(lambda p: loss_theta(jnp.asarray(V) @ p + tb))(jnp.asarray(phi))
    g_theta = jax.grad(loss_theta)(jnp.asarray(V @ phi + tb))
    np.testing.assert_allclose(np.asarray(g_phi), V.T @ np.asarray(g_theta), rtol=1e-10, atol=1e-14)


def encoder_count_by_hand(n_in, n_h, head, n_phi):
    gru = 3 * n_h * n_in + 3 * n_h * n_h + 3 * n_h
    return 2 * gru + (2 * n_h * head + head) + (head * n_phi + n_phi)


def test_encoder_counts_and_output_size(rng):
    cfg = EncoderConfig()
    assert encoder_layout(cfg).size == encoder_count_by_hand(2, 128, 128, 20)
    small = EncoderConfig(n_h=8, head_hidden=8, n_phi=20)
    psi = EncoderParams(small, init_params("encoder", small, 0))
    assert encode(psi, rng.normal(size=30), 1e-4 * rng.normal(size=30)).shape == (20,)


def test_zero_encoder_outputs_zero(rng):
    cfg = EncoderConfig(n_h=8, head_hidden=8, n_phi=4)
    psi = EncoderParams(cfg, np.zeros(encoder_layout(cfg).size))
    assert np.all(encode(psi, rng.normal(size=40), rng.normal(size=40)) == 0.0)


def test_time_reversal_with_shared_direction_weights(rng):
    cfg = EncoderConfig(n_h=6, head_hidden=5, n_phi=3)
    layout = encoder_layout(cfg)
    p = layout.unflatten(init_params("encoder", cfg, 9).copy())
    for part in ("W_x", "W_h", "b"):
        p[f"gru.bwd.{part}"] = p[f"gru.fwd.{part}"]
    p["gru.fwd.b"] = p["gru.bwd.b"] = 0.1 * rng.normal(size=18)
    # a head that reads both halves alike is blind to the swap
    half = rng.normal(size=(5, 6))
    p["head.W1"] = np.concatenate([half, half], axis=1)
    psi = EncoderParams(cfg, layout.flatten(p))
    u, y = rng.normal(size=50) * 50, rng.normal(size=50) * 1e-3
    h, h_rev = pooled_features(psi, u, y), pooled_features(psi, u[::-1], y[::-1])
    np.testing.assert_allclose(h_rev, np.concatenate([h[6:], h[:6]]), atol=1e-13)
    np.testing.assert_allclose(encode(psi, u[::-1], y[::-1]), encode(psi, u, y), atol=1e-13)


def test_encoder_outputs_finite_on_random_inputs(rng):
    cfg = EncoderConfig(n_h=8, head_hidden=8, n_phi=4)
    psi = EncoderParams(cfg, init_params("encoder", cfg, 0))
    for _ in range(1000):
        scale = 10.0 ** rng.uniform(-3, 6)
        out = encode(psi, scale * rng.normal(size=32), scale * rng.normal(size=32), Scaling(1.0, 1.0))
        assert np.all(np.isfinite(out))


def test_encoder_rejects_length_mismatch():
    cfg = EncoderConfig(n_h=4, head_hidden=4, n_phi=2)
    psi = EncoderParams(cfg, np.zeros(encoder_layout(cfg).size))
    with pytest.raises(DimensionMismatchError):
        encode(psi, np.zeros(5), np.zeros(6))

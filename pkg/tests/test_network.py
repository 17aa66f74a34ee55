import numpy as np
import pytest

from medirl.maps import CostMap, OccupancyGrid
from medirl.network import (
    NetConfig,
    NetworkParams,
    add_params,
    backward,
    conv2d_backward,
    conv2d_forward,
    forward,
    init_params,
    load_params,
    maxpool2_backward,
    maxpool2_forward,
    regression_loss_and_grad,
    save_params,
    sigmoid_backward,
    sigmoid_forward,
    unflatten,
    upsample2_backward,
    upsample2_forward,
)
from oracles import relative_error


def random_grid(rng, h=8, w=8):
    mean_h = rng.normal(0, 0.3, size=(h, w))
    rng_ch = np.abs(rng.normal(0, 0.3, size=(h, w)))
    counts = rng.uniform(0.1, 1.0, size=(h, w))
    return OccupancyGrid(np.stack([mean_h, rng_ch, counts]))


def numeric_grad(fn, x, eps=1e-5):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + eps
        hi = fn()
        x[i] = orig - eps
        lo = fn()
        x[i] = orig
        g[i] = (hi - lo) / (2 * eps)
        it.iternext()
    return g


# ---------------------------------------------------------------------------
# layer-level gradient checks


@pytest.mark.parametrize("k,c_in,c_out", [(5, 3, 4), (3, 4, 4), (1, 6, 1)])
def test_conv_gradients(k, c_in, c_out):
    rng = np.random.default_rng(k * 10 + c_in)
    for _ in range(5):
        x = rng.normal(size=(c_in, 6, 6))
        w = rng.normal(size=(c_out, c_in, k, k)) * 0.5
        b = rng.normal(size=(c_out,))

        def loss():
            return conv2d_forward(x, w, b)[0].sum()

        out, cache = conv2d_forward(x, w, b)
        gx, gw, gb = conv2d_backward(np.ones_like(out), cache, w)
        assert relative_error(gx, numeric_grad(loss, x)) < 1e-4
        assert relative_error(gw, numeric_grad(loss, w)) < 1e-4
        assert relative_error(gb, numeric_grad(loss, b)) < 1e-4


def test_sigmoid_gradient():
    rng = np.random.default_rng(2)
    for _ in range(5):
        z = rng.normal(size=(3, 4, 4)) * 2

        def loss():
            return sigmoid_forward(z)[0].sum()

        _, s = sigmoid_forward(z)
        g = sigmoid_backward(np.ones_like(z), s)
        assert relative_error(g, numeric_grad(loss, z)) < 1e-4


def test_maxpool_gradient():
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.normal(size=(2, 6, 6))

        def loss():
            return maxpool2_forward(x)[0].sum()

        _, cache = maxpool2_forward(x)
        g = maxpool2_backward(np.ones((2, 3, 3)), cache)
        assert relative_error(g, numeric_grad(loss, x)) < 1e-4


def test_maxpool_tie_routes_to_first():
    x = np.full((1, 2, 2), 0.7)
    out, cache = maxpool2_forward(x)
    assert out[0, 0, 0] == 0.7
    g = maxpool2_backward(np.array([[[1.0]]]), cache)
    expected = np.zeros((1, 2, 2))
    expected[0, 0, 0] = 1.0
    assert np.array_equal(g, expected)


def test_upsample_gradient():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 3, 3))

    def loss():
        return upsample2_forward(x).sum()

    g = upsample2_backward(np.ones((2, 6, 6)))
    assert relative_error(g, numeric_grad(loss, x)) < 1e-4
    assert upsample2_forward(x)[0, 0, 0] == x[0, 0, 0]
    assert upsample2_forward(x)[0, 1, 1] == x[0, 0, 0]


# ---------------------------------------------------------------------------
# whole network


def test_zero_network_outputs_half():
    cfg = NetConfig()
    zeros = unflatten(cfg, np.zeros(init_params(0, cfg).n_params))
    grid = OccupancyGrid(np.zeros((3, 8, 8)))
    out, _ = forward(zeros, grid)
    assert np.allclose(out.values, 0.5)


def test_forward_output_range_and_determinism():
    rng = np.random.default_rng(5)
    for i in range(100):
        params = init_params(i)
        grid = random_grid(rng)
        out1, _ = forward(params, grid)
        out2, _ = forward(params, grid)
        assert np.array_equal(out1.values, out2.values)
        assert np.all(out1.values > 0) and np.all(out1.values < 1)
        assert np.all(np.isfinite(out1.values))


def test_output_strictly_inside_unit_interval_at_extremes():
    rng = np.random.default_rng(6)
    params = init_params(11)
    grid = random_grid(rng, 8, 8)
    scaled = OccupancyGrid(grid.channels * 100.0)
    out, _ = forward(params, scaled)
    assert np.all(out.values > 0) and np.all(out.values < 1)


def test_forward_rejects_odd_dimensions():
    params = init_params(0)
    with pytest.raises(ValueError):
        forward(params, OccupancyGrid(np.zeros((3, 7, 8))))


def test_forward_rejects_channel_mismatch():
    params = init_params(0, NetConfig(in_channels=3))
    bad = np.zeros((3, 8, 8))
    grid = OccupancyGrid(bad)
    # rebuild params expecting a different channel count
    cfg5 = NetConfig(in_channels=5)
    params5 = init_params(0, cfg5)
    with pytest.raises(ValueError):
        forward(params5, grid)


def test_translation_equivariance_interior():
    rng = np.random.default_rng(7)
    base = random_grid(rng, 24, 24).channels
    shifted = np.zeros_like(base)
    shifted[:, 2:, 2:] = base[:, :-2, :-2]
    out_a, _ = forward(init_params(3), OccupancyGrid(base))
    out_b, _ = forward(init_params(3), OccupancyGrid(shifted))
    m = 8
    assert np.allclose(
        out_a.values[m:-m, m:-m], out_b.values[m + 2 : 24 - m + 2, m + 2 : 24 - m + 2], atol=1e-12
    )


def test_backward_zero_grad_is_zero():
    rng = np.random.default_rng(8)
    params = init_params(9)
    _, tape = forward(params, random_grid(rng))
    grads, gx = backward(tape, np.zeros((8, 8)))
    assert all(np.all(w == 0) and np.all(b == 0) for w, b in grads.layers)
    assert np.all(gx == 0)


def test_end_to_end_parameter_gradients():
    rng = np.random.default_rng(9)
    params = init_params(21)
    grid = random_grid(rng, 8, 8)

    vec = params.flatten()

    def loss_of(v):
        p = unflatten(params.config, v)
        out, _ = forward(p, grid)
        return out.values.sum()

    _, tape = forward(params, grid)
    grads, _ = backward(tape, np.ones((8, 8)))
    analytic = grads.flatten()
    numeric = np.zeros_like(vec)
    eps = 1e-5
    for i in range(vec.size):
        v = vec.copy()
        v[i] += eps
        hi = loss_of(v)
        v[i] -= 2 * eps
        lo = loss_of(v)
        numeric[i] = (hi - lo) / (2 * eps)
    assert relative_error(analytic, numeric, floor=1e-4) < 1e-4


def test_input_gradient():
    rng = np.random.default_rng(10)
    params = init_params(13)
    grid = random_grid(rng, 8, 8)
    x = grid.channels.copy()

    def loss():
        return forward(params, OccupancyGrid(x.copy()))[0].values.sum()

    _, tape = forward(params, OccupancyGrid(x.copy()))
    _, gx = backward(tape, np.ones((8, 8)))
    assert relative_error(gx, numeric_grad(loss, x)) < 1e-4


def test_regression_loss_at_target_is_zero():
    rng = np.random.default_rng(12)
    params = init_params(17)
    grid = random_grid(rng)
    out, _ = forward(params, grid)
    loss, grads = regression_loss_and_grad(params, grid, CostMap(out.values))
    assert loss == 0.0
    assert all(np.all(w == 0) and np.all(b == 0) for w, b in grads.layers)


def test_regression_uniform_half_target_zero_params():
    cfg = NetConfig()
    zeros = unflatten(cfg, np.zeros(init_params(0, cfg).n_params))
    grid = OccupancyGrid(np.zeros((3, 8, 8)))
    loss, _ = regression_loss_and_grad(zeros, grid, CostMap(np.full((8, 8), 0.5)))
    assert loss == 0.0


def test_regression_gradient_matches_finite_differences():
    rng = np.random.default_rng(13)
    params = init_params(19)
    grid = random_grid(rng, 8, 8)
    target = CostMap(rng.uniform(0.2, 0.8, size=(8, 8)))

    def loss_of(v):
        return regression_loss_and_grad(unflatten(params.config, v), grid, target)[0]

    _, grads = regression_loss_and_grad(params, grid, target)
    analytic = grads.flatten()
    vec = params.flatten()
    numeric = np.zeros_like(vec)
    eps = 1e-5
    for i in range(vec.size):
        v = vec.copy()
        v[i] += eps
        hi = loss_of(v)
        v[i] -= 2 * eps
        lo = loss_of(v)
        numeric[i] = (hi - lo) / (2 * eps)
    assert relative_error(analytic, numeric, floor=1e-4) < 1e-4


def test_flatten_round_trip():
    params = init_params(23)
    vec = params.flatten()
    again = unflatten(params.config, vec)
    assert np.array_equal(again.flatten(), vec)
    for (w1, b1), (w2, b2) in zip(params.layers, again.layers):
        assert np.array_equal(w1, w2) and np.array_equal(b1, b2)


def test_init_params_seeded_and_bounded():
    a = init_params(5)
    b = init_params(5)
    c = init_params(6)
    assert np.array_equal(a.flatten(), b.flatten())
    assert not np.array_equal(a.flatten(), c.flatten())
    for (w, bias), (_, ws, _) in zip(a.layers, a.config.layer_shapes()):
        c_out, c_in, k, _ = ws
        bound = np.sqrt(6.0 / (c_in * k * k + c_out * k * k))
        assert np.all(np.abs(w) < bound)
        assert np.all(bias == 0)


def test_add_params():
    a = init_params(1)
    b = init_params(2)
    s = add_params(a, b, scale=-0.5)
    assert np.allclose(s.flatten(), a.flatten() - 0.5 * b.flatten())


def test_checkpoint_round_trip(tmp_path):
    params = init_params(29)
    path = tmp_path / "net.ckpt"
    save_params(params, path)
    loaded = load_params(path)
    assert np.array_equal(loaded.flatten(), params.flatten())
    assert loaded.config == params.config
    blob = path.read_bytes()
    save_params(loaded, path)
    assert path.read_bytes() == blob


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_params(path)

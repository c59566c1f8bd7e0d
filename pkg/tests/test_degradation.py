import numpy as np
import pytest
from oracles import central_difference

from blindrestore.degradation import (
    DegradationModel,
    apply,
    identity_kernel,
    init_model,
    load_model,
    loss_and_grads,
    project_simplex,
    save_model,
    update_params,
)
from blindrestore.errors import ConfigurationError, DimensionError


def random_model(g, c=2, h=5, w=6, k=3):
    return DegradationModel(g.standard_normal((c, c, k, k)) * 0.3, g.standard_normal((c, h, w)) * 0.1)


def test_identity_init_is_identity_map():
    m = init_model(3, 4, 5, 5)
    x = np.random.default_rng(0).standard_normal((3, 4, 5))
    np.testing.assert_array_equal(m.apply(x), x)
    assert m.mask.shape == (3, 4, 5) and not m.mask.any()


def test_smoothed_identity_init():
    m = init_model(2, 4, 4, 5, "smoothed-identity")
    np.testing.assert_allclose(m.kernel.sum(axis=(1, 2, 3)), 1.0)
    assert np.count_nonzero(m.kernel[0, 0]) == 9
    assert not m.kernel[0, 1].any()
    # a 1x1 footprint clips the box down to the single tap
    np.testing.assert_array_equal(init_model(1, 2, 2, 1, "smoothed-identity").kernel, [[[[1.0]]]])


@pytest.mark.parametrize("bad", [0, 2, 4, -3])
def test_bad_kernel_size(bad):
    with pytest.raises(ConfigurationError):
        init_model(1, 4, 4, bad)


def test_bad_modes():
    with pytest.raises(ConfigurationError):
        init_model(1, 4, 4, 3, "gaussian")
    with pytest.raises(ConfigurationError):
        init_model(1, 4, 4, 3, constraint_mode="nonneg")


def test_apply_shape_check():
    m = init_model(1, 4, 4, 3)
    with pytest.raises(DimensionError):
        apply(m, np.zeros((1, 4, 5)))
    with pytest.raises(DimensionError):
        DegradationModel(np.zeros((2, 2, 3, 3)), np.zeros((1, 4, 4)))


def test_gradients_match_finite_differences():
    g = np.random.default_rng(1)
    for _ in range(5):
        model = random_model(g)
        x = g.standard_normal(model.mask.shape)
        y = g.standard_normal(model.mask.shape)
        loss, gx, gk, gm = loss_and_grads(model, x, y)
        assert loss == pytest.approx(np.mean((apply(model, x) - y) ** 2), rel=1e-14)
        fx = central_difference(lambda z: loss_and_grads(model, z, y)[0], x)
        fk = central_difference(lambda k: loss_and_grads(DegradationModel(k, model.mask), x, y)[0], model.kernel)
        fm = central_difference(lambda m: loss_and_grads(DegradationModel(model.kernel, m), x, y)[0], model.mask)
        for a, b in ((gx, fx), (gk, fk), (gm, fm)):
            assert np.max(np.abs(a - b)) <= 1e-7 * max(np.max(np.abs(b)), 1.0)


def test_loss_zero_when_model_is_exact():
    g = np.random.default_rng(2)
    model = random_model(g)
    x = g.standard_normal(model.mask.shape)
    loss, gx, gk, gm = loss_and_grads(model, x, apply(model, x))
    assert loss == 0.0
    assert not gx.any() and not gk.any() and not gm.any()


def test_project_simplex():
    k = np.zeros((2, 2, 3, 3))
    k[0, 0, 1] = [0.5, -1.0, 1.5]
    k[1] = -1.0
    p = project_simplex(k)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=(1, 2, 3)), 1.0)
    np.testing.assert_allclose(p[0, 0, 1], [0.25, 0.0, 0.75])
    # an all-negative slice falls back to the identity for that output channel
    np.testing.assert_array_equal(p[1], identity_kernel(2, 3)[1])


def test_update_params_step():
    g = np.random.default_rng(3)
    model = random_model(g)
    gk = g.standard_normal(model.kernel.shape)
    gm = g.standard_normal(model.mask.shape)
    new = update_params(model, gk, gm, 0.1, mask_lr=5.0)
    np.testing.assert_allclose(new.kernel, model.kernel - 0.1 * gk)
    np.testing.assert_allclose(new.mask, model.mask - 5.0 * gm)
    same = update_params(model, gk, gm, 0.1)
    np.testing.assert_allclose(same.mask, model.mask - 0.1 * gm)
    with pytest.raises(ConfigurationError):
        update_params(model, gk, gm, 0.0)
    with pytest.raises(DimensionError):
        update_params(model, gk[:1], gm, 0.1)


def test_update_params_simplex_mode():
    model = init_model(2, 4, 4, 3, constraint_mode="simplex")
    g = np.random.default_rng(4)
    new = update_params(model, g.standard_normal(model.kernel.shape), np.zeros((2, 4, 4)), 0.5)
    assert np.all(new.kernel >= 0)
    np.testing.assert_allclose(new.kernel.sum(axis=(1, 2, 3)), 1.0)


def test_descent_decreases_loss():
    g = np.random.default_rng(5)
    model = init_model(1, 6, 6, 3)
    x = g.standard_normal((1, 6, 6))
    y = g.standard_normal((1, 6, 6))
    loss0, _, gk, gm = loss_and_grads(model, x, y)
    loss1 = loss_and_grads(update_params(model, gk, gm, 1e-3), x, y)[0]
    assert loss1 < loss0


def test_save_load_round_trip(tmp_path):
    g = np.random.default_rng(6)
    model = DegradationModel(g.standard_normal((3, 3, 5, 5)), g.standard_normal((3, 4, 7)), "simplex")
    jpath, bpath = save_model(model, tmp_path / "deg")
    assert jpath.name == "deg.json" and bpath.stat().st_size == 8 * (225 + 84)
    back = load_model(tmp_path / "deg")
    assert back.kernel.tobytes() == model.kernel.tobytes()
    assert back.mask.tobytes() == model.mask.tobytes()
    assert back.constraint_mode == "simplex"
    bpath.write_bytes(bpath.read_bytes()[:-8])
    with pytest.raises(DimensionError):
        load_model(tmp_path / "deg")

import numpy as np
import pytest

from blindrestore.degradation import apply
from blindrestore.errors import ConfigurationError, DimensionError
from blindrestore.synth import (
    Compose,
    Downsample4x,
    GaussianBlur,
    Grayscale,
    HDRClip,
    Inpaint,
    LowLight,
    MotionBlur,
    degrade,
    gaussian_kernel,
    motion_kernel,
    operator_from_dict,
    operator_to_dict,
    representable_as_degradation_model,
)

ALL_OPS = [
    GaussianBlur(1.0, 5),
    MotionBlur(5, 30),
    Downsample4x(),
    Grayscale(),
    Inpaint(0.25),
    LowLight(0.3),
    LowLight(0.2, 0.1),
    HDRClip(0.4),
    Compose((GaussianBlur(1.5, 3), Inpaint(0.1), LowLight(0.5))),
]


def rand_image(seed, shape=(3, 16, 16)):
    return np.random.default_rng(seed).uniform(-1, 1, shape)


def test_gaussian_kernel_values():
    k = gaussian_kernel(1.0, 5)
    assert k.sum() == pytest.approx(1.0)
    assert k[2, 2] / k[2, 3] == pytest.approx(np.exp(0.5))
    np.testing.assert_allclose(k, k.T)


def test_motion_kernel_horizontal():
    k = motion_kernel(5, 0, 5)
    np.testing.assert_allclose(k.sum(axis=1), [0, 0, 1, 0, 0])
    assert np.all(k[2] > 0)
    k90 = motion_kernel(5, 90, 5)
    np.testing.assert_allclose(k90, k.T)


@pytest.mark.parametrize("op", ALL_OPS, ids=lambda o: o.kind)
def test_range_preserved_and_pure(op):
    x = rand_image(0)
    y1, y2 = degrade(op, x, seed=4), degrade(op, x, seed=4)
    assert y1.shape == x.shape
    assert y1.min() >= -1 - 1e-12 and y1.max() <= 1 + 1e-12
    assert y1.tobytes() == y2.tobytes()


def test_blur_of_constant_is_constant():
    x = np.full((3, 8, 8), 0.3)
    np.testing.assert_allclose(degrade(GaussianBlur(2.0, 5), x), x, atol=1e-15)
    np.testing.assert_allclose(degrade(MotionBlur(4, 45), x), x, atol=1e-15)


def test_inpaint_counts_and_seeds():
    x = rand_image(1, (3, 12, 10))
    op = Inpaint(0.25)
    m = op.pixel_mask(12, 10, seed=7)
    assert m.sum() == 30
    np.testing.assert_array_equal(m, op.pixel_mask(12, 10, seed=7))
    assert not np.array_equal(m, op.pixel_mask(12, 10, seed=8))
    y = degrade(op, x, seed=7)
    assert np.all(y[:, m] == -1.0)
    np.testing.assert_array_equal(y[:, ~m], x[:, ~m])


def test_inpaint_bitmap():
    m = np.zeros((4, 4), bool)
    m[1:3, 1:3] = True
    y = degrade(Inpaint(mask=m), np.zeros((1, 4, 4)))
    assert (y == -1).sum() == 4
    with pytest.raises(DimensionError):
        degrade(Inpaint(mask=m), np.zeros((1, 5, 5)))


def test_grayscale_idempotent():
    x = rand_image(2)
    g1 = degrade(Grayscale(), x)
    np.testing.assert_allclose(degrade(Grayscale(), g1), g1, atol=1e-15)
    np.testing.assert_allclose(g1[0], 0.299 * x[0] + 0.587 * x[1] + 0.114 * x[2])


def test_downsample_box_average():
    x = rand_image(3, (1, 8, 8))
    y = degrade(Downsample4x(), x)
    assert y[0, 0, 0] == pytest.approx(x[0, :4, :4].mean())
    assert np.all(y[0, 4:, 4:] == y[0, 4, 4])
    with pytest.raises(ConfigurationError):
        degrade(Downsample4x(), np.zeros((1, 6, 8)))


def test_low_light_linear_scale():
    x = rand_image(4)
    y = degrade(LowLight(0.3, 0.05), x)
    np.testing.assert_allclose((y + 1) / 2, 0.3 * (x + 1) / 2 + 0.05, atol=1e-15)


def test_compose_is_sequential():
    x = rand_image(5)
    ops = (GaussianBlur(1.0, 3), Inpaint(0.2), HDRClip(0.1))
    seq = x
    for i, op in enumerate(ops):
        seq = op.degrade(seq, 9 + i)
    np.testing.assert_array_equal(degrade(Compose(ops), x, seed=9), seq)


@pytest.mark.parametrize("op", [GaussianBlur(1.0, 5), MotionBlur(5, 30), Grayscale(), LowLight(0.3), LowLight(0.2, 0.1)])
def test_equivalent_models_match(op):
    x = rand_image(6)
    model = representable_as_degradation_model(op, x.shape)
    np.testing.assert_allclose(apply(model, x), degrade(op, x), atol=1e-10)


def test_gaussian_equivalent_model_structure():
    model = representable_as_degradation_model(GaussianBlur(1.0, 5), (3, 8, 8))
    np.testing.assert_array_equal(model.kernel[1, 1], gaussian_kernel(1.0, 5))
    assert not model.kernel[0, 1].any() and not model.mask.any()


@pytest.mark.parametrize("op", [Inpaint(0.25), Downsample4x(), HDRClip(0.5)])
def test_not_representable(op):
    assert representable_as_degradation_model(op, (3, 8, 8)) is None


@pytest.mark.parametrize(
    "bad",
    [
        lambda: GaussianBlur(0.0),
        lambda: GaussianBlur(1.0, 4),
        lambda: Inpaint(1.0),
        lambda: Inpaint(0.0),
        lambda: LowLight(1.5),
        lambda: LowLight(0.5, 0.6),
        lambda: MotionBlur(0),
        lambda: HDRClip(-1.0),
        lambda: Compose(()),
    ],
)
def test_invalid_parameters(bad):
    with pytest.raises(ConfigurationError):
        bad()


@pytest.mark.parametrize("op", ALL_OPS, ids=lambda o: o.kind)
def test_dict_round_trip(op):
    back = operator_from_dict(operator_to_dict(op))
    assert operator_to_dict(back) == operator_to_dict(op)
    x = rand_image(8)
    np.testing.assert_array_equal(degrade(back, x, 3), degrade(op, x, 3))


def test_dict_rejects_unknown():
    with pytest.raises(ConfigurationError):
        operator_from_dict({"kind": "sharpen"})
    with pytest.raises(ConfigurationError):
        operator_from_dict({"kind": "gaussian_blur", "sigma": 1.0, "radius": 2})

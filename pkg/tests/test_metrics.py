import math

import numpy as np
import pytest
from oracles import loe_oracle, psnr_oracle, ssim_oracle

from blindrestore.errors import DimensionError, MetricError
from blindrestore.metrics import MetricReport, consistency, evaluate, loe, psnr, ssim, suite_means, write_report
from blindrestore.synth import GaussianBlur, LowLight, degrade


def rand_pair(seed, shape=(3, 16, 16)):
    g = np.random.default_rng(seed)
    return g.uniform(-1, 1, shape), g.uniform(-1, 1, shape)


def test_psnr_basics():
    a, b = rand_pair(0)
    assert psnr(a, a) == math.inf
    # mse 0.01 on the [0, 1] scale is an offset of 0.2 on [-1, 1]
    assert psnr(np.zeros((1, 4, 4)), np.full((1, 4, 4), 0.2)) == pytest.approx(20.0)
    assert psnr(a, b) == psnr(b, a)
    assert abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-9
    with pytest.raises(DimensionError):
        psnr(a, b[:, :4])


def test_ssim_basics():
    a, b = rand_pair(1)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6
    g = np.random.default_rng(2).uniform(-0.5, 0.5, (1, 16, 16))
    assert ssim(g, -g) < 0
    with pytest.raises(MetricError):
        ssim(np.zeros((1, 10, 16)), np.zeros((1, 10, 16)))


def test_loe_basics():
    a, b = rand_pair(3, (3, 9, 7))
    assert loe(a, a) == 0.0
    assert loe(a, b) == loe_oracle(a, b)
    # gamma remap is monotone on [0, 1]
    for gamma in (0.3, 0.7, 2.2):
        remap = 2 * ((a + 1) / 2) ** gamma - 1
        assert loe(remap, a) == 0.0


def test_loe_downsamples_large_images():
    a, b = rand_pair(4, (1, 120, 80))
    rows, cols = (np.arange(50) * 120) // 50, (np.arange(50) * 80) // 50
    la = ((a[0] + 1) / 2)[np.ix_(rows, cols)].ravel()
    lb = ((b[0] + 1) / 2)[np.ix_(rows, cols)].ravel()
    flips = (la[:, None] >= la[None, :]) != (lb[:, None] >= lb[None, :])
    assert loe(a, b) == 1000.0 * flips.sum() / la.size**2


def test_consistency():
    x, _ = rand_pair(5)
    op = GaussianBlur(1.0, 5)
    y = degrade(op, x)
    assert consistency(x, y, op) == 0.0
    r = np.random.default_rng(6).uniform(-0.05, 0.05, x.shape)
    v1 = consistency(x, y + r, op)
    v2 = consistency(x, y + 2 * r, op)
    assert v2 == pytest.approx(4 * v1, rel=1e-12)
    assert v1 == pytest.approx(1e4 * np.mean((r / 2) ** 2), rel=1e-9)
    with pytest.raises(MetricError):
        consistency(x, y, None)


def test_channel_permutation_equivariance():
    a, b = rand_pair(7)
    p = [2, 0, 1]
    assert psnr(a[p], b[p]) == pytest.approx(psnr(a, b), rel=1e-12)
    assert loe(a[p], b[p]) == loe(a, b)


def test_report_and_means(tmp_path):
    a, b = rand_pair(8)
    op = LowLight(0.5)
    rep = evaluate(a, b, degrade(op, b), op)
    assert rep.consistency is not None
    same = evaluate(a, a)
    assert same.psnr == math.inf and same.consistency is None
    assert same.to_json_dict()["psnr"] == "inf"
    means = suite_means([rep, MetricReport(10.0, 0.5, 1.0)])
    assert means["psnr"] == pytest.approx((rep.psnr + 10.0) / 2)
    assert means["consistency"] == rep.consistency
    write_report(tmp_path / "m.json", {"a": rep, "b": same})
    assert '"inf"' in (tmp_path / "m.json").read_text()

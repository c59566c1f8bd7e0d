"""Independent reference implementations used by the tests.

Everything here is written from the defining formulas with explicit loops
and shares no code with the package.
"""

import math

import numpy as np


def conv_loop(x, k):
    """Correlation with replicate padding, one multiply-add at a time."""
    c_in, h, w = x.shape
    c_out, _, size, _ = k.shape
    r = size // 2
    out = np.zeros((c_out, h, w))
    for o in range(c_out):
        for i in range(c_in):
            for row in range(h):
                for col in range(w):
                    acc = 0.0
                    for a in range(size):
                        for b in range(size):
                            rr = min(max(row + a - r, 0), h - 1)
                            cc = min(max(col + b - r, 0), w - 1)
                            acc += x[i, rr, cc] * k[o, i, a, b]
                    out[o, row, col] += acc
    return out


def psnr_oracle(a, b):
    a01, b01 = (a + 1) / 2, (b + 1) / 2
    total = 0.0
    for u, v in zip(a01.ravel(), b01.ravel()):
        total += (u - v) ** 2
    return 10 * math.log10(1 / (total / a.size))


def ssim_oracle(a, b):
    """Window-by-window SSIM on Rec. 601 luminance (11x11 Gaussian, sigma 1.5)."""
    w = np.array([[math.exp(-((i - 5) ** 2 + (j - 5) ** 2) / (2 * 1.5**2)) for j in range(11)] for i in range(11)])
    w /= w.sum()

    def lum(x):
        x = (x + 1) / 2
        return 0.299 * x[0] + 0.587 * x[1] + 0.114 * x[2] if x.shape[0] == 3 else x[0]

    la, lb = lum(a), lum(b)
    c1, c2 = 0.01**2, 0.03**2
    vals = []
    for r in range(la.shape[0] - 10):
        for c in range(la.shape[1] - 10):
            pa, pb = la[r:r + 11, c:c + 11], lb[r:r + 11, c:c + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def loe_oracle(e, r):
    """O(n^2) pair count on channel-max lightness (images already <= 50x50)."""
    le = ((e + 1) / 2).max(axis=0).ravel()
    lr = ((r + 1) / 2).max(axis=0).ravel()
    n = le.size
    bad = 0
    for i in range(n):
        for j in range(n):
            bad += (le[i] >= le[j]) != (lr[i] >= lr[j])
    return 1000.0 * bad / n**2


def central_difference(f, p, h=1e-6):
    out = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        pp, pm = p.copy(), p.copy()
        pp[idx] += h
        pm[idx] -= h
        out[idx] = (f(pp) - f(pm)) / (2 * h)
    return out

"""Independent reference implementations used only by the tests.

Each one is written from the physical description (scalar loops, brute
force) and shares no code with the package beyond its parameter classes.
"""

import itertools
import math

import numpy as np


def attenuator_t(i_ma, coeff_db_per_ma=8.0):
    return 10.0 ** (-coeff_db_per_ma * i_ma / 10.0)


def lorentzian_notch(d_nm, fwhm, t_min):
    x = 2.0 * d_nm / fwhm
    return t_min + (1.0 - t_min) * x * x / (1.0 + x * x)


def patches_by_loops(col_offsets=(0, 2), row_offsets=(0, 2)):
    """The four 3x4 blocks as lists of (row, col), built with plain loops."""
    out = []
    for r0 in row_offsets:
        for c0 in col_offsets:
            out.append([(r0 + dr, c0 + dc) for dr in range(4) for dc in range(3)])
    return out


def route_by_loops(frame, route_loss_db=2.0):
    patches = patches_by_loops()
    members = {}
    for p in patches:
        for px in p:
            members[px] = members.get(px, 0) + 1
    loss = 10.0 ** (-route_loss_db / 10.0)
    return [[frame[r][c] * loss / members[(r, c)] for (r, c) in p] for p in patches]


def ideal_chip_by_loops(weights, frame, p_supply, gains, out_gain, g_ideal, responsivity=0.8,
                        route_loss_db=2.0):
    """Ideal-mode chip evaluated neuron by neuron (no dark current, no
    saturation).  Returns (out1, out2) in volts."""
    w1, w2, w3 = (np.asarray(w) for w in weights)
    sub = route_by_loops(frame, route_loss_db)
    h1 = []
    for k in range(4):
        i_sum = sum(responsivity * w1[k][j] * sub[k][j] for j in range(12))
        h1.append(p_supply * min(1.0, g_ideal * gains[0] * i_sum))
    h2 = []
    for k in range(3):
        i_sum = sum(responsivity * w2[k][j] * h1[j] for j in range(4))
        h2.append(p_supply * min(1.0, g_ideal * gains[1] * i_sum))
    return tuple(out_gain * sum(responsivity * w3[k][j] * h2[j] for j in range(3)) for k in range(2))


def best_threshold_accuracy(v, labels, k):
    """Exact maximum accuracy of any K-1 thresholds and class order, by
    dynamic programming over sorted cut positions for every permutation."""
    v = np.asarray(v, dtype=float)
    labels = np.asarray(labels, dtype=int)
    order = np.argsort(v, kind="stable")
    sv, lab = v[order], labels[order]
    n = len(v)
    cum = np.zeros((k, n + 1), dtype=int)
    for c in range(k):
        cum[c, 1:] = np.cumsum(lab == c)
    cut_ok = np.ones(n + 1, dtype=bool)
    cut_ok[1:n] = sv[1:] != sv[:-1]
    best = 0
    for perm in itertools.permutations(range(k)):
        dp = cum[perm[0]].astype(float)
        for c in perm[1:]:
            dp = np.maximum.accumulate(np.where(cut_ok, dp - cum[c], -np.inf)) + cum[c]
        best = max(best, dp[n])
    return best / n


def grid_threshold_accuracy(v, labels, k, n_candidates=1000):
    """Best accuracy with thresholds restricted to ``n_candidates`` evenly
    spaced values spanning the data, over every class order."""
    v = np.asarray(v, dtype=float)
    labels = np.asarray(labels, dtype=int)
    lo, hi = v.min(), v.max()
    pad = 1e-9 * max(1.0, hi - lo)
    grid = np.linspace(lo - pad, hi + pad, n_candidates)
    # bin of each sample relative to the grid cells
    cell = np.searchsorted(grid, v, side="right")  # 0..n_candidates
    m = n_candidates + 1
    counts = np.zeros((k, m), dtype=int)
    np.add.at(counts, (labels, cell), 1)
    cum = np.concatenate([np.zeros((k, 1), dtype=int), np.cumsum(counts, axis=1)], axis=1)
    best = 0
    for perm in itertools.permutations(range(k)):
        dp = cum[perm[0]].astype(float)
        for c in perm[1:]:
            dp = np.maximum.accumulate(dp - cum[c]) + cum[c]
        best = max(best, dp[m])
    return best / len(v)


def central_difference(f, x, idx, h=1e-6):
    xp, xm = x.copy(), x.copy()
    xp[idx] += h
    xm[idx] -= h
    return (f(xp) - f(xm)) / (2.0 * h)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def circle_area(d):
    return math.pi * d * d / 4.0

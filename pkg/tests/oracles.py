"""Independent reference implementations used as test oracles.

Nothing here imports from the package under test except plain data types.
"""
import itertools
import math

import numpy as np


# --- losses ------------------------------------------------------------------


def arctan_loss_ref(u, tau, s):
    return (tau - 0.5 + math.atan(u / s) / math.pi) * u + s / math.pi


def exponential_loss_ref(u, tau, s):
    return tau * u + s * math.log1p(math.exp(-u / s)) if -u / s < 700 else tau * u - u + s * math.log1p(math.exp(u / s))


def huber_loss_ref(u, tau, delta):
    n = 0.5 * u * u if abs(u) <= delta else abs(u) - 0.5 * delta
    if u > 0:
        return tau * n
    if u < 0:
        return (1 - tau) * n
    return 0.0


def pinball_ref(u, tau):
    return tau * u if u >= 0 else (tau - 1) * u


def central_diff(f, u, step):
    """First and second central differences of ``f`` at ``u``."""
    fp, f0, fm = f(u + step), f(u), f(u - step)
    return (fp - fm) / (2 * step), (fp - 2 * f0 + fm) / (step * step)


def golden_section_min(f, lo, hi, tol=1e-12):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# --- metrics -----------------------------------------------------------------


def avg_pinball_loop(y, P, levels):
    total = 0.0
    for i in range(len(y)):
        for j, t in enumerate(levels):
            total += pinball_ref(y[i] - P[i][j], t)
    return total / (len(y) * len(levels))


def crossing_pct_loop(P):
    n, k = len(P), len(P[0])
    hits = 0
    for i in range(n):
        for j in range(k - 1):
            if P[i][j] > P[i][j + 1]:
                hits += 1
    return 100.0 * hits / ((k - 1) * n)


def coverage_width_loop(y, lo, hi):
    inside = 0
    width = 0.0
    for yi, a, b in zip(y, lo, hi):
        if a <= yi <= b:
            inside += 1
        width += b - a
    return 100.0 * inside / len(y), width / len(y)


# --- trees -------------------------------------------------------------------


def leaf_objective(g_rows, h_rows, lam, gamma):
    """Optimal objective of a single leaf: -1/2 sum_j G_j^2/(H_j+lam) + gamma."""
    total = 0.0
    for j in range(len(g_rows[0]) if len(g_rows) else 0):
        G = sum(r[j] for r in g_rows)
        H = sum(r[j] for r in h_rows)
        total += -0.5 * G * G / (H + lam)
    return total + gamma


def brute_force_best_objective(X, g, h, lam, gamma, max_depth, min_child_weight=0.0):
    """Best objective over all trees of depth <= max_depth (max_depth in {1, 2}).

    Depth counts nodes, so depth 2 means at most one split. Thresholds are
    midpoints between consecutive distinct present values; missing rows are
    tried on both sides.
    """
    n, d = X.shape
    rows = list(range(n))
    g = [list(r) for r in g]
    h = [list(r) for r in h]
    best = leaf_objective([g[i] for i in rows], [h[i] for i in rows], lam, gamma)
    if max_depth < 2 or n < 2:
        return best
    for f in range(d):
        present = sorted({X[i, f] for i in rows if not math.isnan(X[i, f])})
        for a, b in zip(present, present[1:]):
            thr = (a + b) / 2
            for miss_left in (True, False):
                left = [i for i in rows if (math.isnan(X[i, f]) and miss_left) or (not math.isnan(X[i, f]) and X[i, f] < thr)]
                right = [i for i in rows if i not in left]
                if not left or not right:
                    continue
                if sum(sum(h[i]) for i in left) < min_child_weight or sum(sum(h[i]) for i in right) < min_child_weight:
                    continue
                obj = leaf_objective([g[i] for i in left], [h[i] for i in left], lam, gamma) + leaf_objective(
                    [g[i] for i in right], [h[i] for i in right], lam, gamma
                )
                best = min(best, obj)
    return best


def all_stump_gains(X, g, h, lam, gamma):
    """(feature, threshold, miss_left, gain) for every candidate stump."""
    n, d = X.shape
    parent = -leaf_objective(g, h, lam, 0.0)
    out = []
    for f in range(d):
        present = sorted({X[i, f] for i in range(n) if not math.isnan(X[i, f])})
        for a, b in zip(present, present[1:]):
            thr = (a + b) / 2
            for miss_left in (True, False):
                left = [i for i in range(n) if (math.isnan(X[i, f]) and miss_left) or (not math.isnan(X[i, f]) and X[i, f] < thr)]
                right = [i for i in range(n) if i not in left]
                gl = -leaf_objective([g[i] for i in left], [h[i] for i in left], lam, 0.0)
                gr = -leaf_objective([g[i] for i in right], [h[i] for i in right], lam, 0.0)
                out.append((f, thr, miss_left, gl + gr - parent - gamma))
    return out


def random_small_dataset(rng, n_max=12, d_max=2, k_max=3, missing_rate=0.15):
    n = int(rng.integers(2, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    k = int(rng.integers(1, k_max + 1))
    # coarse values so ties occur
    X = rng.integers(0, 6, size=(n, d)).astype(float)
    X[rng.random((n, d)) < missing_rate] = np.nan
    g = rng.normal(size=(n, k))
    h = rng.uniform(0.05, 2.0, size=(n, k))
    return X, g, h


def subsets(seq):
    return itertools.chain.from_iterable(itertools.combinations(seq, r) for r in range(len(seq) + 1))

"""NumPy split scan, used when the compiled kernel is unavailable.

Arithmetic is ordered exactly like ``_split_cy.pyx`` (sequential prefix and
suffix sums, sequential reduction over outputs) so both backends pick the
same split bit for bit.
"""
import numpy as np


def scan_feature(values, grad, hess, grad_miss, hess_miss, parent_score, lam, gamma, min_child_weight):
    """Best split of one feature over rows sorted by ``values``.

    ``values`` holds the present (non-missing) values in ascending order and
    ``grad``/``hess`` the matching ``n x K`` rows. ``grad_miss``/``hess_miss``
    are the per-output sums over rows where the feature is missing.

    Returns ``(gain, threshold, default_left)``; ``gain`` is ``-inf`` when no
    admissible candidate exists.
    """
    n = values.shape[0]
    if n < 2:
        return -np.inf, np.nan, True
    cand = np.flatnonzero(values[:-1] < values[1:])
    if cand.size == 0:
        return -np.inf, np.nan, True
    K = grad.shape[1]

    gp = np.cumsum(grad, axis=0)[cand]
    hp = np.cumsum(hess, axis=0)[cand]
    gs = np.cumsum(grad[::-1], axis=0)[::-1][cand + 1]
    hs = np.cumsum(hess[::-1], axis=0)[::-1][cand + 1]

    gains = np.empty((cand.size, 2))
    for d, miss_left in enumerate((True, False)):
        if miss_left:
            GL, HL, GR, HR = gp + grad_miss, hp + hess_miss, gs, hs
        else:
            GL, HL, GR, HR = gp, hp, gs + grad_miss, hs + hess_miss
        acc = np.zeros(cand.size)
        hl_tot = np.zeros(cand.size)
        hr_tot = np.zeros(cand.size)
        ok = np.ones(cand.size, dtype=bool)
        for j in range(K):
            dl = HL[:, j] + lam
            dr = HR[:, j] + lam
            ok &= (dl > 0) & (dr > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                acc = acc + (GL[:, j] * GL[:, j] / dl + GR[:, j] * GR[:, j] / dr)
            hl_tot = hl_tot + HL[:, j]
            hr_tot = hr_tot + HR[:, j]
        ok &= (hl_tot >= min_child_weight) & (hr_tot >= min_child_weight)
        g = 0.5 * (acc - parent_score) - gamma
        gains[:, d] = np.where(ok, g, -np.inf)

    flat = gains.ravel()
    best = int(np.argmax(flat))
    if flat[best] == -np.inf:
        return -np.inf, np.nan, True
    i = cand[best // 2]
    a, b = values[i], values[i + 1]
    thr = (a + b) * 0.5
    if not a < thr:
        thr = b
    return float(flat[best]), float(thr), best % 2 == 0

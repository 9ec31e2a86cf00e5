"""Numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is missing.
Both backends must return bit-identical results: every floating-point
operation here is written with the same evaluation order as the C loops in
``_core.pyx`` (sequential cumulative sums, identical expression trees, no
fused multiply-add on the compiled side).
"""

import numpy as np

BACKEND_NAME = "python"

NO_SPLIT = (-np.inf, np.nan, 0)


def split_scan(order, mask, col, g, reg_lambda, gamma, min_cover):
    """Best squared-loss split of one feature over the rows where ``mask`` is set.

    ``order`` is the stable value-sorted permutation of the full column; the
    node's candidate sequence is that permutation filtered by membership, so
    every backend scans rows in exactly the same order.  Returns
    ``(gain, threshold, n_left)`` or ``NO_SPLIT`` when no admissible candidate
    exists.  Candidate thresholds are midpoints between consecutive distinct
    values; a midpoint that fails to separate its generating pair (adjacent
    floats) is skipped.
    """
    sel = order[mask[order] > 0]
    n = sel.size
    if n < 2:
        return NO_SPLIT
    vals = col[sel]
    cum = np.cumsum(g[sel])
    g_tot = cum[-1]
    h_tot = float(n)
    parent = g_tot * g_tot / (h_tot + reg_lambda)

    h_left = np.arange(1.0, n)
    h_right = h_tot - h_left
    g_left = cum[:-1]
    g_right = g_tot - g_left
    gains = (
        0.5
        * (
            g_left * g_left / (h_left + reg_lambda)
            + g_right * g_right / (h_right + reg_lambda)
            - parent
        )
        - gamma
    )
    thresholds = 0.5 * (vals[:-1] + vals[1:])
    valid = (vals[:-1] < thresholds) & (thresholds <= vals[1:])
    if min_cover > 1:
        valid &= (h_left >= min_cover) & (h_right >= min_cover)
    if not valid.any():
        return NO_SPLIT
    gains = np.where(valid, gains, -np.inf)
    best = int(np.argmax(gains))
    return float(gains[best]), float(thresholds[best]), best + 1


def route_rows(feature, threshold, left, right, X):
    """Leaf index reached by each row of ``X`` (feature < threshold goes left)."""
    n = X.shape[0]
    pos = np.zeros(n, dtype=np.int32)
    active = np.nonzero(feature[pos] >= 0)[0]
    while active.size:
        node = pos[active]
        feat = feature[node]
        go_left = X[active, feat] < threshold[node]
        pos[active] = np.where(go_left, left[node], right[node])
        active = active[feature[pos[active]] >= 0]
    return pos


def shap_accumulate(
    leaf_weight,
    path_offset,
    path_feature,
    path_lo,
    path_hi,
    X,
    Z,
    coef_keep,
    coef_drop,
    phi,
):
    """Add one tree's interventional Shapley contributions into ``phi``.

    The tree is given in root-to-leaf path form: leaf ``l`` owns
    ``path_feature[path_offset[l]:path_offset[l+1]]`` with the half-open
    interval ``[lo, hi)`` each routed value must fall in.  For an explained
    row x and a reference row z, a leaf is reached by the hybrid of (x, z)
    under coalition S iff every path feature in S admits x's value and every
    path feature outside S admits z's value; the exact Shapley weight of that
    cube indicator depends only on how many path features admit x alone
    (``n_keep``) versus z alone (``n_drop``).

    ``phi`` accumulates the raw sum over reference rows; the caller divides
    by ``len(Z)`` and applies the ensemble shrinkage.
    """
    n_leaves = leaf_weight.shape[0]
    for zi in range(Z.shape[0]):
        zrow = Z[zi]
        for l in range(n_leaves):
            lo = path_lo[path_offset[l] : path_offset[l + 1]]
            hi = path_hi[path_offset[l] : path_offset[l + 1]]
            feats = path_feature[path_offset[l] : path_offset[l + 1]]
            if feats.size == 0:
                continue
            zvals = zrow[feats]
            z_ok = (zvals >= lo) & (zvals < hi)
            x_ok = (X[:, feats] >= lo) & (X[:, feats] < hi)
            alive = (x_ok | z_ok).all(axis=1)
            if not alive.any():
                continue
            n_keep = (x_ok & ~z_ok).sum(axis=1)
            n_drop = (~x_ok & z_ok).sum(axis=1)
            w = leaf_weight[l]
            for k in range(feats.size):
                f = feats[k]
                if z_ok[k]:
                    rows = alive & ~x_ok[:, k]
                    if rows.any():
                        phi[rows, f] += w * coef_drop[n_keep[rows], n_drop[rows]]
                else:
                    rows = alive & x_ok[:, k]
                    if rows.any():
                        phi[rows, f] += w * coef_keep[n_keep[rows], n_drop[rows]]

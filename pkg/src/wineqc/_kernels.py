"""Numba kernels: exact and histogram tree growers plus traversal routines.

All kernels are deterministic given their seed arguments and release the GIL;
they never share mutable state, so callers may run them from threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1


# ---------------------------------------------------------------------------
# impurity helpers
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _impurity(wcls, total, criterion):
    """Weighted Gini (0) or entropy (1, 2); log_loss shares the entropy formula."""
    if total <= 0.0:
        return 0.0
    if criterion == 0:
        s = 0.0
        for c in range(wcls.shape[0]):
            p = wcls[c] / total
            s += p * p
        return 1.0 - s
    s = 0.0
    for c in range(wcls.shape[0]):
        if wcls[c] > 0.0:
            p = wcls[c] / total
            s -= p * np.log(p)
    return s


# ---------------------------------------------------------------------------
# exact classification tree (forest / single CART)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def grow_cart(X, yi, w, mult, order, n_classes, max_depth, min_split, min_leaf,
              m_feats, criterion, seed):
    """Greedy exact CART on weighted rows with bootstrap multiplicities.

    ``order`` holds, per feature, the active rows (mult > 0) presorted by that
    feature's value; node spans are repartitioned between two lane buffers
    during descent. Split thresholds are midpoints of consecutive distinct
    values; ties in impurity decrease break toward the lower feature index,
    then the lower threshold. Class-weight sums of squares (Gini) and
    w*log(w) totals (entropy) are maintained incrementally across the scan.
    Returns packed node arrays plus per-feature impurity decrease.
    """
    np.random.seed(seed)
    d, n_active = order.shape
    max_nodes = 2 * n_active + 3
    use_gini = criterion == 0

    feature = np.full(max_nodes, LEAF, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, LEAF, dtype=np.int32)
    right = np.full(max_nodes, LEAF, dtype=np.int32)
    posterior = np.zeros((max_nodes, n_classes), dtype=np.float64)
    node_weight = np.zeros(max_nodes, dtype=np.float64)
    feat_gain = np.zeros(d, dtype=np.float64)

    order_b = np.empty_like(order)
    wm = np.empty(X.shape[0], dtype=np.float64)
    for i in range(n_active):
        r = order[0, i]
        wm[r] = w[r] * mult[r]
    side = np.zeros(X.shape[0], dtype=np.uint8)
    chosen = np.empty(d, dtype=np.int64)
    pool = np.empty(d, dtype=np.int64)
    wcls = np.zeros(n_classes, dtype=np.float64)
    wl_cls = np.zeros(n_classes, dtype=np.float64)
    wr_cls = np.zeros(n_classes, dtype=np.float64)

    # stack of (node, start, end, depth, buffer)
    stack = np.empty((max_nodes, 5), dtype=np.int64)
    stack[0] = (0, 0, n_active, 0, 0)
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node, start, end, depth, buf = stack[top]
        cur = order if buf == 0 else order_b
        dst = order_b if buf == 0 else order

        wcls[:] = 0.0
        count = 0
        for i in range(start, end):
            r = cur[0, i]
            wcls[yi[r]] += wm[r]
            count += mult[r]
        total_w = 0.0
        n_present = 0
        for c in range(n_classes):
            total_w += wcls[c]
            if wcls[c] > 0.0:
                n_present += 1
        node_weight[node] = total_w
        for c in range(n_classes):
            posterior[node, c] = wcls[c] / total_w

        if depth >= max_depth or count < min_split or count < 2 * min_leaf \
                or n_present <= 1:
            continue

        # parent sums for the incremental statistics
        sq_parent = 0.0
        t_parent = 0.0
        for c in range(n_classes):
            v = wcls[c]
            sq_parent += v * v
            if v > 0.0:
                t_parent += v * np.log(v)
        parent_score = (total_w - sq_parent / total_w) if use_gini \
            else (total_w * np.log(total_w) - t_parent)

        # random feature subset of size m, scanned in ascending index order
        m = m_feats if m_feats < d else d
        if m == d:
            for j in range(d):
                chosen[j] = j
        else:
            for j in range(d):
                pool[j] = j
            for j in range(m):
                k = j + np.random.randint(0, d - j)
                pool[j], pool[k] = pool[k], pool[j]
            chosen[:m] = np.sort(pool[:m])

        best_score = np.inf
        best_feat = -1
        best_thr = 0.0
        cut = count - min_leaf
        for jj in range(m):
            f = chosen[jj]
            for c in range(n_classes):
                wl_cls[c] = 0.0
                wr_cls[c] = wcls[c]
            wl = 0.0
            sq_l = 0.0
            sq_r = sq_parent
            t_l = 0.0
            t_r = t_parent
            cl = 0
            prev = 0.0
            have_prev = False
            for i in range(start, end):
                r = cur[f, i]
                v = X[r, f]
                if have_prev and v != prev and cl >= min_leaf:
                    if cl > cut:
                        break
                    wr = total_w - wl
                    if use_gini:
                        score = (wl - sq_l / wl) + (wr - sq_r / wr)
                    else:
                        score = (wl * np.log(wl) - t_l) + (wr * np.log(wr) - t_r)
                    if score < best_score:
                        best_score = score
                        best_feat = f
                        best_thr = 0.5 * (prev + v)
                delta = wm[r]
                c = yi[r]
                a = wl_cls[c]
                b = wr_cls[c]
                if use_gini:
                    sq_l += delta * (2.0 * a + delta)
                    sq_r += delta * (delta - 2.0 * b)
                else:
                    if a > 0.0:
                        t_l -= a * np.log(a)
                    t_l += (a + delta) * np.log(a + delta)
                    t_r -= b * np.log(b)
                    if b > delta:
                        t_r += (b - delta) * np.log(b - delta)
                wl_cls[c] = a + delta
                wr_cls[c] = b - delta
                wl += delta
                cl += mult[r]
                prev = v
                have_prev = True

        if best_feat < 0:
            continue
        best_decrease = parent_score - best_score
        if best_decrease <= 0.0:
            continue

        feat_gain[best_feat] += best_decrease
        feature[node] = best_feat
        threshold[node] = best_thr

        n_left_rows = 0
        for i in range(start, end):
            r = cur[best_feat, i]
            if X[r, best_feat] <= best_thr:
                side[r] = 1
                n_left_rows += 1
            else:
                side[r] = 0

        for f in range(d):
            il = start
            ir = start + n_left_rows
            for i in range(start, end):
                r = cur[f, i]
                if side[r] == 1:
                    dst[f, il] = r
                    il += 1
                else:
                    dst[f, ir] = r
                    ir += 1

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        child_buf = 1 - buf
        stack[top] = (rchild, start + n_left_rows, end, depth + 1, child_buf)
        top += 1
        stack[top] = (lchild, start, start + n_left_rows, depth + 1, child_buf)
        top += 1

    return (n_nodes, feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            posterior[:n_nodes].copy(), node_weight[:n_nodes].copy(), feat_gain)


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf node index for every row of a real-valued tree."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


# ---------------------------------------------------------------------------
# exact least-squares regression tree (first-order booster)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def grow_reg_tree(X, g, h, rows, max_depth, min_split, min_leaf, m_feats,
                  lam, seed):
    """Depth-limited least-squares tree on gradient targets, per-node sorting.

    The split maximizes S_L^2/n_L + S_R^2/n_R - S^2/n over midpoint thresholds
    (classic variance reduction on the targets); leaf values are the Newton
    step sum(g)/(sum(h) + lam). Returns packed nodes and per-feature gain.
    """
    np.random.seed(seed)
    d = X.shape[1]
    n_active = rows.shape[0]
    max_nodes = 2 * n_active + 3

    feature = np.full(max_nodes, LEAF, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, LEAF, dtype=np.int32)
    right = np.full(max_nodes, LEAF, dtype=np.int32)
    value = np.zeros(max_nodes, dtype=np.float64)
    feat_gain = np.zeros(d, dtype=np.float64)

    idx = rows.copy()
    vbuf = np.empty(n_active, dtype=np.float64)
    tmp = np.empty(n_active, dtype=np.int64)
    chosen = np.empty(d, dtype=np.int64)
    pool = np.empty(d, dtype=np.int64)

    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0] = (0, 0, n_active, 0)
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node, start, end, depth = stack[top]
        count = end - start

        sg = 0.0
        sh = 0.0
        for i in range(start, end):
            sg += g[idx[i]]
            sh += h[idx[i]]
        value[node] = sg / (sh + lam + 1e-12)

        if depth >= max_depth or count < min_split or count < 2 * min_leaf:
            continue

        m = m_feats if m_feats < d else d
        if m == d:
            for j in range(d):
                chosen[j] = j
        else:
            for j in range(d):
                pool[j] = j
            for j in range(m):
                k = j + np.random.randint(0, d - j)
                pool[j], pool[k] = pool[k], pool[j]
            chosen[:m] = np.sort(pool[:m])

        parent_term = sg * sg / count
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for jj in range(m):
            f = chosen[jj]
            for i in range(start, end):
                vbuf[i - start] = X[idx[i], f]
            loc = np.argsort(vbuf[:count])
            sl = 0.0
            for ii in range(count - 1):
                r = idx[start + loc[ii]]
                sl += g[r]
                v = vbuf[loc[ii]]
                v_next = vbuf[loc[ii + 1]]
                if v == v_next:
                    continue
                nl = ii + 1
                nr = count - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                sr = sg - sl
                gain = sl * sl / nl + sr * sr / nr - parent_term
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (v + v_next)

        if best_feat < 0 or best_gain <= 0.0:
            continue

        feat_gain[best_feat] += best_gain
        feature[node] = best_feat
        threshold[node] = best_thr

        nl = 0
        nr = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_feat] <= best_thr:
                idx[start + nl] = r
                nl += 1
            else:
                tmp[nr] = r
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = tmp[i]

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        stack[top] = (rchild, start + nl, end, depth + 1)
        top += 1
        stack[top] = (lchild, start, start + nl, depth + 1)
        top += 1

    return (n_nodes, feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            value[:n_nodes].copy(), feat_gain)



# ---------------------------------------------------------------------------
# histogram trees (second-order boosters)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _soft_threshold(gsum, alpha):
    if gsum > alpha:
        return gsum - alpha
    if gsum < -alpha:
        return gsum + alpha
    return 0.0


@njit(cache=True, nogil=True, inline="always")
def _leaf_term(gsum, hsum, lam, alpha):
    gs = _soft_threshold(gsum, alpha)
    return gs * gs / (hsum + lam)


@njit(cache=True, nogil=True)
def _node_histogram(codes, g, h, idx, start, end, feats, n_bins,
                    hist_g, hist_h, hist_c, bin_lo, bin_hi):
    """Per-feature (g, h, count) sums by bin over one node's rows."""
    for jj in range(feats.shape[0]):
        f = feats[jj]
        for b in range(n_bins):
            hist_g[f, b] = 0.0
            hist_h[f, b] = 0.0
            hist_c[f, b] = 0
        bin_lo[f] = n_bins
        bin_hi[f] = -1
    for i in range(start, end):
        r = idx[i]
        gi = g[r]
        hi = h[r]
        for jj in range(feats.shape[0]):
            f = feats[jj]
            b = codes[r, f]
            hist_g[f, b] += gi
            hist_h[f, b] += hi
            hist_c[f, b] += 1
            if b < bin_lo[f]:
                bin_lo[f] = b
            if b > bin_hi[f]:
                bin_hi[f] = b


@njit(cache=True, nogil=True)
def _best_hist_split(feats, hist_g, hist_h, hist_c, bin_lo, bin_hi,
                     gsum, hsum, count, lam, gamma, alpha, mcw, min_leaf,
                     extra_trees, seed_state):
    """Best (gain, feature, bin) over bin boundaries; children minus parent.

    With ``extra_trees`` only one random boundary per feature is evaluated.
    Ties break toward the lower feature index then lower bin via scan order.
    """
    parent = _leaf_term(gsum, hsum, lam, alpha)
    best_gain = 0.0
    best_f = -1
    best_b = -1
    for jj in range(feats.shape[0]):
        f = feats[jj]
        lo = bin_lo[f]
        hi = bin_hi[f]
        if hi <= lo:
            continue
        pick = -1
        if extra_trees:
            np.random.seed((seed_state + 7919 * (f + 1)) % 2147483647)
            pick = lo + np.random.randint(0, hi - lo)
        gl = 0.0
        hl = 0.0
        cl = 0
        for b in range(lo, hi):
            gl += hist_g[f, b]
            hl += hist_h[f, b]
            cl += hist_c[f, b]
            if extra_trees and b != pick:
                continue
            cr = count - cl
            if cl < min_leaf or cr < min_leaf:
                continue
            hr = hsum - hl
            if hl < mcw or hr < mcw:
                continue
            gain = 0.5 * (_leaf_term(gl, hl, lam, alpha)
                          + _leaf_term(gsum - gl, hr, lam, alpha)
                          - parent) - gamma
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_b = b
    return best_gain, best_f, best_b


@njit(cache=True, nogil=True)
def grow_hist_tree(codes, g, h, rows, feats, n_bins, growth, max_depth,
                   num_leaves, lam, gamma, alpha, mcw, min_leaf,
                   extra_trees, seed):
    """Histogram tree under a growth policy: 0 level-wise, 1 leaf-wise.

    Level-wise expands every positive-gain frontier node breadth-first up to
    ``max_depth``; leaf-wise repeatedly splits the open leaf with the globally
    best gain until ``num_leaves`` leaves exist (depth still capped). Leaf
    values are soft-thresholded Newton steps sum(g)/(sum(h)+lam).
    """
    d = codes.shape[1]
    n_active = rows.shape[0]
    cap = 2 * num_leaves + 3 if growth == 1 else 2 * n_active + 3
    max_nodes = min(2 * n_active + 3, cap)

    feature = np.full(max_nodes, LEAF, dtype=np.int32)
    split_bin = np.full(max_nodes, LEAF, dtype=np.int32)
    left = np.full(max_nodes, LEAF, dtype=np.int32)
    right = np.full(max_nodes, LEAF, dtype=np.int32)
    value = np.zeros(max_nodes, dtype=np.float64)
    feat_gain = np.zeros(d, dtype=np.float64)

    idx = rows.copy()
    tmp = np.empty(n_active, dtype=np.int64)
    hist_g = np.zeros((d, n_bins), dtype=np.float64)
    hist_h = np.zeros((d, n_bins), dtype=np.float64)
    hist_c = np.zeros((d, n_bins), dtype=np.int64)
    bin_lo = np.zeros(d, dtype=np.int64)
    bin_hi = np.zeros(d, dtype=np.int64)

    # open-candidate records per node: span start/end, depth, best feat/bin
    cand_span = np.zeros((max_nodes, 5), dtype=np.int64)
    cand_gain = np.full(max_nodes, -1.0, dtype=np.float64)
    cand_open = np.zeros(max_nodes, dtype=np.uint8)

    root_g = 0.0
    root_h = 0.0
    for i in range(n_active):
        root_g += g[idx[i]]
        root_h += h[idx[i]]
    value[0] = _soft_threshold(root_g, alpha) / (root_h + lam)

    if max_depth > 0 and n_active >= 2 * min_leaf:
        _node_histogram(codes, g, h, idx, 0, n_active, feats, n_bins,
                        hist_g, hist_h, hist_c, bin_lo, bin_hi)
        gain0, f0, b0 = _best_hist_split(
            feats, hist_g, hist_h, hist_c, bin_lo, bin_hi, root_g, root_h,
            n_active, lam, gamma, alpha, mcw, min_leaf, extra_trees, seed)
        cand_span[0] = (0, n_active, 0, f0, b0)
        cand_gain[0] = gain0
        cand_open[0] = 1 if gain0 > 0.0 else 0

    n_nodes = 1
    n_leaves = 1
    qptr = 0

    while True:
        if growth == 1:
            if n_leaves >= num_leaves:
                break
            u = -1
            best = 0.0
            for v in range(n_nodes):
                if cand_open[v] == 1 and cand_gain[v] > best:
                    best = cand_gain[v]
                    u = v
            if u < 0:
                break
        else:
            while qptr < n_nodes and cand_open[qptr] == 0:
                qptr += 1
            if qptr >= n_nodes:
                break
            u = qptr
            qptr += 1
        if n_nodes + 2 > max_nodes:
            break

        start, end, depth, f, b = cand_span[u]
        cand_open[u] = 0
        feature[u] = np.int32(f)
        split_bin[u] = np.int32(b)
        feat_gain[f] += cand_gain[u] + gamma

        nl = 0
        nr = 0
        for i in range(start, end):
            r = idx[i]
            if codes[r, f] <= b:
                idx[start + nl] = r
                nl += 1
            else:
                tmp[nr] = r
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = tmp[i]
        mid = start + nl

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        n_leaves += 1
        left[u] = lchild
        right[u] = rchild

        for half in range(2):
            child = lchild if half == 0 else rchild
            cs = start if half == 0 else mid
            ce = mid if half == 0 else end
            gsum = 0.0
            hsum = 0.0
            for i in range(cs, ce):
                gsum += g[idx[i]]
                hsum += h[idx[i]]
            value[child] = _soft_threshold(gsum, alpha) / (hsum + lam)
            cand_open[child] = 0
            cand_gain[child] = -1.0
            cand_span[child] = (cs, ce, depth + 1, -1, -1)
            if depth + 1 < max_depth and ce - cs >= 2 * min_leaf:
                _node_histogram(codes, g, h, idx, cs, ce, feats, n_bins,
                                hist_g, hist_h, hist_c, bin_lo, bin_hi)
                cg, cf, cb = _best_hist_split(
                    feats, hist_g, hist_h, hist_c, bin_lo, bin_hi,
                    gsum, hsum, ce - cs, lam, gamma, alpha, mcw, min_leaf,
                    extra_trees, seed + child)
                if cg > 0.0:
                    cand_span[child] = (cs, ce, depth + 1, cf, cb)
                    cand_gain[child] = cg
                    cand_open[child] = 1

    return (n_nodes, feature[:n_nodes].copy(), split_bin[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            value[:n_nodes].copy(), feat_gain)


@njit(cache=True, nogil=True)
def grow_oblivious_tree(codes, g, h, rows, feats, n_bins, max_depth,
                        lam, mcw, used_mask):
    """Oblivious tree: one (feature, bin) rule per level shared by all nodes.

    The rule maximizes the summed children-minus-parent gain across the
    level's nodes, subject to aggregate child hessians >= ``mcw`` and not
    reusing a rule from ``used_mask`` (updated in place). Gives 2^k leaves.
    """
    d = codes.shape[1]
    n_active = rows.shape[0]

    level_feat = np.empty(max_depth, dtype=np.int32)
    level_bin = np.empty(max_depth, dtype=np.int32)
    feat_gain = np.zeros(d, dtype=np.float64)

    idx = rows.copy()
    tmp = np.empty(n_active, dtype=np.int64)
    hist_g = np.zeros((d, n_bins), dtype=np.float64)
    hist_h = np.zeros((d, n_bins), dtype=np.float64)
    hist_c = np.zeros((d, n_bins), dtype=np.int64)
    bin_lo = np.zeros(d, dtype=np.int64)
    bin_hi = np.zeros(d, dtype=np.int64)
    total_gain = np.zeros((d, n_bins), dtype=np.float64)
    agg_hl = np.zeros((d, n_bins), dtype=np.float64)

    # spans of the current level's nodes
    starts = np.zeros(1, dtype=np.int64)
    ends = np.full(1, n_active, dtype=np.int64)

    total_h = 0.0
    for i in range(n_active):
        total_h += h[idx[i]]

    n_levels = 0
    for level in range(max_depth):
        total_gain[:, :] = 0.0
        agg_hl[:, :] = 0.0
        for node in range(starts.shape[0]):
            s = starts[node]
            e = ends[node]
            if e <= s:
                continue
            gsum = 0.0
            hsum = 0.0
            for i in range(s, e):
                gsum += g[idx[i]]
                hsum += h[idx[i]]
            _node_histogram(codes, g, h, idx, s, e, feats, n_bins,
                            hist_g, hist_h, hist_c, bin_lo, bin_hi)
            parent = _leaf_term(gsum, hsum, lam, 0.0)
            for jj in range(feats.shape[0]):
                f = feats[jj]
                lo = bin_lo[f]
                hi_cap = bin_hi[f] if bin_hi[f] < n_bins - 1 else n_bins - 2
                gl = 0.0
                hl = 0.0
                for b in range(lo, hi_cap + 1):
                    gl += hist_g[f, b]
                    hl += hist_h[f, b]
                    total_gain[f, b] += 0.5 * (
                        _leaf_term(gl, hl, lam, 0.0)
                        + _leaf_term(gsum - gl, hsum - hl, lam, 0.0)
                        - parent)
                    agg_hl[f, b] += hl
                for b in range(hi_cap + 1, n_bins - 1):
                    agg_hl[f, b] += hsum

        best_f = -1
        best_b = -1
        best = -np.inf
        for jj in range(feats.shape[0]):
            f = feats[jj]
            for b in range(n_bins - 1):
                if used_mask[f, b] == 1:
                    continue
                hl = agg_hl[f, b]
                if hl < mcw or total_h - hl < mcw:
                    continue
                if total_gain[f, b] > best:
                    best = total_gain[f, b]
                    best_f = f
                    best_b = b
        if best_f < 0:
            break

        used_mask[best_f, best_b] = 1
        level_feat[level] = best_f
        level_bin[level] = best_b
        feat_gain[best_f] += best if best > 0.0 else 0.0
        n_levels += 1

        new_starts = np.empty(2 * starts.shape[0], dtype=np.int64)
        new_ends = np.empty(2 * starts.shape[0], dtype=np.int64)
        for node in range(starts.shape[0]):
            s = starts[node]
            e = ends[node]
            nl = 0
            nr = 0
            for i in range(s, e):
                r = idx[i]
                if codes[r, best_f] <= best_b:
                    idx[s + nl] = r
                    nl += 1
                else:
                    tmp[nr] = r
                    nr += 1
            for i in range(nr):
                idx[s + nl + i] = tmp[i]
            new_starts[2 * node] = s
            new_ends[2 * node] = s + nl
            new_starts[2 * node + 1] = s + nl
            new_ends[2 * node + 1] = e
        starts = new_starts
        ends = new_ends

    # leaf values over the final partition, index = bit path (left bit 0)
    n_leaf = starts.shape[0]
    values = np.zeros(n_leaf, dtype=np.float64)
    for node in range(n_leaf):
        gsum = 0.0
        hsum = 0.0
        for i in range(starts[node], ends[node]):
            gsum += g[idx[i]]
            hsum += h[idx[i]]
        if hsum + lam > 0.0:
            values[node] = gsum / (hsum + lam)

    return (n_levels, level_feat[:n_levels].copy(), level_bin[:n_levels].copy(),
            values, feat_gain)


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def apply_binned_tree(codes, feature, split_bin, left, right):
    """Leaf node index for every row of a bin-split tree."""
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if codes[i, feature[node]] <= split_bin[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def apply_oblivious_tree(codes, level_feat, level_bin):
    """Leaf slot index (bit path, left bit 0) for every row."""
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        slot = 0
        for lvl in range(level_feat.shape[0]):
            slot <<= 1
            if codes[i, level_feat[lvl]] > level_bin[lvl]:
                slot |= 1
        out[i] = slot
    return out

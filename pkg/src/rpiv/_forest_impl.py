"""Numba kernels for the regression forest.

Trees are stored in flat parallel arrays (one row per tree) so fitting can
run tree-parallel and prediction row-parallel without Python overhead.
Per-tree randomness comes from a splitmix64 stream keyed by (seed, tree
index), and every aggregation loop runs in fixed tree order, so results
are bit-identical at any thread count.
"""

import numba as nb
import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_STREAM_SALT = _U64(0xD1B54A32D192ED03)


@nb.njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return state, z ^ (z >> _U64(31))


@nb.njit(cache=True, inline="always")
def _sort_pairs(vals, resp, tmp_v, tmp_r, m):
    """Stable in-place sort of vals[:m] with resp[:m] carried along."""
    if m < 32:
        for i in range(1, m):
            v = vals[i]
            r = resp[i]
            j = i - 1
            while j >= 0 and vals[j] > v:
                vals[j + 1] = vals[j]
                resp[j + 1] = resp[j]
                j -= 1
            vals[j + 1] = v
            resp[j + 1] = r
        return
    width = 16
    for lo in range(0, m, width):
        hi = min(lo + width, m)
        for i in range(lo + 1, hi):
            v = vals[i]
            r = resp[i]
            j = i - 1
            while j >= lo and vals[j] > v:
                vals[j + 1] = vals[j]
                resp[j + 1] = resp[j]
                j -= 1
            vals[j + 1] = v
            resp[j + 1] = r
    while width < m:
        lo = 0
        while lo < m:
            mid = lo + width
            hi = min(lo + 2 * width, m)
            if mid < hi:
                i = lo
                j = mid
                k = lo
                while i < mid and j < hi:
                    if vals[i] <= vals[j]:
                        tmp_v[k] = vals[i]
                        tmp_r[k] = resp[i]
                        i += 1
                    else:
                        tmp_v[k] = vals[j]
                        tmp_r[k] = resp[j]
                        j += 1
                    k += 1
                while i < mid:
                    tmp_v[k] = vals[i]
                    tmp_r[k] = resp[i]
                    i += 1
                    k += 1
                while j < hi:
                    tmp_v[k] = vals[j]
                    tmp_r[k] = resp[j]
                    j += 1
                    k += 1
                for k2 in range(lo, hi):
                    vals[k2] = tmp_v[k2]
                    resp[k2] = tmp_r[k2]
            lo = hi
        width *= 2


@nb.njit(cache=True, nogil=True)
def _grow_tree(x, y, seed, tree_index, min_leaf, max_features, max_depth,
               node_feat, node_thresh, node_left, node_right, node_value,
               inbag_count):
    """Grow one tree on a bootstrap resample; returns the node count.

    node_feat[k] >= 0 marks an internal node splitting on that feature at
    node_thresh[k] (left branch takes values <= threshold); -1 marks a leaf
    whose prediction is node_value[k].
    """
    n, n_feat = x.shape
    state = (_U64(seed) ^ _STREAM_SALT) + _U64(tree_index) * _GOLDEN
    state, _ = _splitmix64(state)

    order = np.empty(n, np.int64)
    for i in range(n):
        state, r = _splitmix64(state)
        j = np.int64(r % _U64(n))
        order[i] = j
        inbag_count[j] += 1

    cap = 2 * n + 1
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    stack_node = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    feat_pool = np.empty(n_feat, np.int64)
    for k in range(n_feat):
        feat_pool[k] = k
    vals = np.empty(n, np.float64)
    resp = np.empty(n, np.float64)
    tmp_v = np.empty(n, np.float64)
    tmp_r = np.empty(n, np.float64)
    part_buf = np.empty(n, np.int64)

    n_nodes = 1
    top = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_node[0] = 0
    stack_depth[0] = 0
    while top >= 0:
        lo = stack_lo[top]
        hi = stack_hi[top]
        node = stack_node[top]
        depth = stack_depth[top]
        top -= 1
        m = hi - lo

        total = 0.0
        total_sq = 0.0
        for i in range(lo, hi):
            v = y[order[i]]
            total += v
            total_sq += v * v
        node_value[node] = total / m
        node_feat[node] = -1
        sse = total_sq - total * total / m
        if m < 2 * min_leaf:
            continue
        if max_depth > 0 and depth >= max_depth:
            continue
        if sse <= 1e-12 * max(total_sq, 1e-300):
            continue

        # candidate features without replacement (partial Fisher-Yates)
        k_try = max_features if max_features < n_feat else n_feat
        for j in range(k_try):
            state, r = _splitmix64(state)
            swap = j + np.int64(r % _U64(n_feat - j))
            tmp = feat_pool[j]
            feat_pool[j] = feat_pool[swap]
            feat_pool[swap] = tmp

        best_score = -1.0
        best_feat = -1
        best_thresh = 0.0
        for j in range(k_try):
            f = feat_pool[j]
            for i in range(m):
                oi = order[lo + i]
                vals[i] = x[oi, f]
                resp[i] = y[oi]
            _sort_pairs(vals, resp, tmp_v, tmp_r, m)
            left_sum = 0.0
            for i in range(1, m):
                left_sum += resp[i - 1]
                if i < min_leaf or m - i < min_leaf:
                    continue
                vl = vals[i - 1]
                vr = vals[i]
                if vr <= vl:
                    continue
                right_sum = total - left_sum
                score = left_sum * left_sum / i + right_sum * right_sum / (m - i)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    thresh = 0.5 * (vl + vr)
                    # midpoint may round up to vr; keep the partition at vl
                    best_thresh = vl if thresh >= vr else thresh
        if best_feat < 0:
            continue

        n_left = 0
        for i in range(lo, hi):
            if x[order[i], best_feat] <= best_thresh:
                n_left += 1
        a = 0
        b = 0
        for i in range(lo, hi):
            oi = order[i]
            if x[oi, best_feat] <= best_thresh:
                part_buf[a] = oi
                a += 1
            else:
                part_buf[n_left + b] = oi
                b += 1
        for i in range(m):
            order[lo + i] = part_buf[i]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        node_feat[node] = best_feat
        node_thresh[node] = best_thresh
        node_left[node] = left_id
        node_right[node] = right_id
        top += 1
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        stack_node[top] = left_id
        stack_depth[top] = depth + 1
        top += 1
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        stack_node[top] = right_id
        stack_depth[top] = depth + 1
    return n_nodes


@nb.njit(cache=True, parallel=True)
def fit_trees(x, y, seed, num_trees, min_leaf, max_features, max_depth):
    """Fit all trees of one forest; returns the packed node arrays."""
    n = x.shape[0]
    max_nodes = 2 * n + 1
    node_feat = np.full((num_trees, max_nodes), -1, np.int64)
    node_thresh = np.zeros((num_trees, max_nodes), np.float64)
    node_left = np.zeros((num_trees, max_nodes), np.int64)
    node_right = np.zeros((num_trees, max_nodes), np.int64)
    node_value = np.zeros((num_trees, max_nodes), np.float64)
    inbag = np.zeros((num_trees, n), np.int64)
    for t in nb.prange(num_trees):
        _grow_tree(x, y, seed, t, min_leaf, max_features, max_depth,
                   node_feat[t], node_thresh[t], node_left[t], node_right[t],
                   node_value[t], inbag[t])
    return node_feat, node_thresh, node_left, node_right, node_value, inbag


@nb.njit(cache=True, inline="always")
def _tree_predict_row(xrow, node_feat, node_thresh, node_left, node_right, node_value):
    node = 0
    while node_feat[node] >= 0:
        if xrow[node_feat[node]] <= node_thresh[node]:
            node = node_left[node]
        else:
            node = node_right[node]
    return node_value[node]


@nb.njit(cache=True, parallel=True)
def predict_mean(xq, node_feat, node_thresh, node_left, node_right, node_value):
    """Equally-weighted tree-mean prediction for each query row."""
    nq = xq.shape[0]
    num_trees = node_feat.shape[0]
    out = np.empty(nq, np.float64)
    for i in nb.prange(nq):
        acc = 0.0
        for t in range(num_trees):
            acc += _tree_predict_row(xq[i], node_feat[t], node_thresh[t],
                                     node_left[t], node_right[t], node_value[t])
        out[i] = acc / num_trees
    return out


@nb.njit(cache=True, parallel=True)
def predict_per_tree(xq, node_feat, node_thresh, node_left, node_right, node_value):
    """(num_trees, n_query) matrix of single-tree predictions."""
    nq = xq.shape[0]
    num_trees = node_feat.shape[0]
    out = np.empty((num_trees, nq), np.float64)
    for t in nb.prange(num_trees):
        for i in range(nq):
            out[t, i] = _tree_predict_row(xq[i], node_feat[t], node_thresh[t],
                                          node_left[t], node_right[t], node_value[t])
    return out


@nb.njit(cache=True, parallel=True)
def oob_predictions(x, node_feat, node_thresh, node_left, node_right, node_value, inbag):
    """Out-of-bag prediction and covering-tree count per training row.

    Row i's prediction averages only trees whose bootstrap excluded i;
    rows covered by no tree get count 0.
    """
    n = x.shape[0]
    num_trees = node_feat.shape[0]
    pred = np.zeros(n, np.float64)
    count = np.zeros(n, np.int64)
    for i in nb.prange(n):
        acc = 0.0
        c = 0
        for t in range(num_trees):
            if inbag[t, i] == 0:
                acc += _tree_predict_row(x[i], node_feat[t], node_thresh[t],
                                         node_left[t], node_right[t], node_value[t])
                c += 1
        if c > 0:
            pred[i] = acc / c
        count[i] = c
    return pred, count

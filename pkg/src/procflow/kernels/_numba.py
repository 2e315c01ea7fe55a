"""Numba-compiled kernels; same contracts as :mod:`._numpy`."""

import numpy as np
from numba import njit

from ._codes import (
    ACCEPT, CONNECT, COPY, DISCONNECT, N_SUMS, RECEIVE, RECONNECT, RETRANSMIT,
    SEND, TCP,
    S_N_ACCEPT, S_N_CONNECT, S_N_DISCONNECT, S_N_RECEIVE, S_N_RECONNECT,
    S_N_RETRANSMIT, S_TCP_BYTES_COPIED, S_TCP_BYTES_RECV, S_TCP_BYTES_SENT,
    S_TCP_EVENTS, S_TCP_PKTS_COPIED, S_TCP_PKTS_RECV, S_TCP_PKTS_SENT,
    S_TOTAL_EVENTS, S_UDP_BYTES_RECV, S_UDP_BYTES_SENT, S_UDP_EVENTS,
    S_UDP_PKTS_RECV, S_UDP_PKTS_SENT,
)

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def window_sums(bucket_ids, n_buckets, proto, kind, nbytes, npackets):
    out = np.zeros((n_buckets, N_SUMS), dtype=np.int64)
    for i in range(bucket_ids.shape[0]):
        b = bucket_ids[i]
        k = kind[i]
        nb = nbytes[i]
        npk = npackets[i]
        out[b, S_TOTAL_EVENTS] += 1
        if proto[i] == TCP:
            out[b, S_TCP_EVENTS] += 1
            if k == SEND:
                out[b, S_TCP_BYTES_SENT] += nb
                out[b, S_TCP_PKTS_SENT] += npk
            elif k == RECEIVE:
                out[b, S_TCP_BYTES_RECV] += nb
                out[b, S_TCP_PKTS_RECV] += npk
                out[b, S_N_RECEIVE] += 1
            elif k == COPY:
                out[b, S_TCP_BYTES_COPIED] += nb
                out[b, S_TCP_PKTS_COPIED] += npk
            elif k == ACCEPT:
                out[b, S_N_ACCEPT] += 1
            elif k == CONNECT:
                out[b, S_N_CONNECT] += 1
            elif k == RECONNECT:
                out[b, S_N_RECONNECT] += 1
            elif k == DISCONNECT:
                out[b, S_N_DISCONNECT] += 1
            elif k == RETRANSMIT:
                out[b, S_N_RETRANSMIT] += 1
        else:
            out[b, S_UDP_EVENTS] += 1
            if k == SEND:
                out[b, S_UDP_BYTES_SENT] += nb
                out[b, S_UDP_PKTS_SENT] += npk
            elif k == RECEIVE:
                out[b, S_UDP_BYTES_RECV] += nb
                out[b, S_UDP_PKTS_RECV] += npk
    return out


@njit(**_opts)
def grow_tree(X, y, sample_idx, n_classes, max_depth, min_split, k_features, feat_keys):
    max_nodes = feat_keys.shape[0]
    n_features = X.shape[1]
    m = sample_idx.shape[0]
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros((max_nodes, n_classes), dtype=np.float64)

    idx = sample_idx.astype(np.int64).copy()
    scratch = np.empty(m, dtype=np.int64)
    vals = np.empty(m, dtype=np.float64)
    counts = np.zeros(n_classes, dtype=np.int64)
    lc = np.zeros(n_classes, dtype=np.int64)
    rc = np.zeros(n_classes, dtype=np.int64)

    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        start = stack[sp, 1]
        end = stack[sp, 2]
        depth = stack[sp, 3]
        n = end - start

        counts[:] = 0
        for i in range(start, end):
            counts[y[idx[i]]] += 1
        nonzero = 0
        sq_total = 0
        for c in range(n_classes):
            value[node, c] = counts[c] / n
            if counts[c] > 0:
                nonzero += 1
            sq_total += counts[c] * counts[c]
        if depth >= max_depth or n < min_split or nonzero <= 1:
            continue

        perm = np.argsort(feat_keys[node], kind="mergesort")
        best_f = -1
        best_thr = 0.0
        best_score = -1.0
        visited = 0
        for j in range(n_features):
            if visited >= k_features:
                break
            f = perm[j]
            vmin = np.inf
            vmax = -np.inf
            for i in range(n):
                v = X[idx[start + i], f]
                vals[i] = v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            if vmin == vmax:
                continue
            visited += 1
            order = np.argsort(vals[:n], kind="mergesort")
            for c in range(n_classes):
                lc[c] = 0
                rc[c] = counts[c]
            sq_left = 0
            sq_right = sq_total
            for p in range(n - 1):
                c = y[idx[start + order[p]]]
                sq_left += 2 * lc[c] + 1
                lc[c] += 1
                sq_right -= 2 * rc[c] - 1
                rc[c] -= 1
                v = vals[order[p]]
                if v < vals[order[p + 1]]:
                    n_left = p + 1
                    score = sq_left / n_left + sq_right / (n - n_left)
                    if score > best_score or (
                        score == best_score
                        and (f < best_f or (f == best_f and v < best_thr))
                    ):
                        best_score = score
                        best_f = f
                        best_thr = v
        if best_f < 0:
            continue

        # stable partition: left rows first
        n_left = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                scratch[n_left] = idx[i]
                n_left += 1
        k = n_left
        for i in range(start, end):
            if X[idx[i], best_f] > best_thr:
                scratch[k] = idx[i]
                k += 1
        for i in range(n):
            idx[start + i] = scratch[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[sp, 0] = rid
        stack[sp, 1] = start + n_left
        stack[sp, 2] = end
        stack[sp, 3] = depth + 1
        sp += 1
        stack[sp, 0] = lid
        stack[sp, 1] = start
        stack[sp, 2] = start + n_left
        stack[sp, 3] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(**_opts)
def forest_proba(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    n_classes = value.shape[1]
    proba = np.zeros((n, n_classes), dtype=np.float64)
    for t in range(roots.shape[0]):
        for i in range(n):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            for c in range(n_classes):
                proba[i, c] += value[node, c]
    return proba / roots.shape[0]

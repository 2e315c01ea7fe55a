"""Pure-numpy kernels."""

import numpy as np

from ._codes import (
    ACCEPT, CONNECT, COPY, DISCONNECT, N_SUMS, RECEIVE, RECONNECT, RETRANSMIT,
    SEND, TCP, UDP,
    S_N_ACCEPT, S_N_CONNECT, S_N_DISCONNECT, S_N_RECEIVE, S_N_RECONNECT,
    S_N_RETRANSMIT, S_TCP_BYTES_COPIED, S_TCP_BYTES_RECV, S_TCP_BYTES_SENT,
    S_TCP_EVENTS, S_TCP_PKTS_COPIED, S_TCP_PKTS_RECV, S_TCP_PKTS_SENT,
    S_TOTAL_EVENTS, S_UDP_BYTES_RECV, S_UDP_BYTES_SENT, S_UDP_EVENTS,
    S_UDP_PKTS_RECV, S_UDP_PKTS_SENT,
)


def window_sums(bucket_ids, n_buckets, proto, kind, nbytes, npackets):
    out = np.zeros((n_buckets, N_SUMS), dtype=np.int64)
    tcp = proto == TCP
    udp = proto == UDP

    def add(col, mask, weights=None):
        ids = bucket_ids[mask]
        if weights is None:
            out[:, col] += np.bincount(ids, minlength=n_buckets)
        else:
            np.add.at(out[:, col], ids, weights[mask])

    for proto_mask, cols in (
        (tcp, (S_TCP_BYTES_SENT, S_TCP_BYTES_RECV, S_TCP_PKTS_SENT, S_TCP_PKTS_RECV)),
        (udp, (S_UDP_BYTES_SENT, S_UDP_BYTES_RECV, S_UDP_PKTS_SENT, S_UDP_PKTS_RECV)),
    ):
        send = proto_mask & (kind == SEND)
        recv = proto_mask & (kind == RECEIVE)
        add(cols[0], send, nbytes)
        add(cols[1], recv, nbytes)
        add(cols[2], send, npackets)
        add(cols[3], recv, npackets)

    copy = tcp & (kind == COPY)
    add(S_TCP_BYTES_COPIED, copy, nbytes)
    add(S_TCP_PKTS_COPIED, copy, npackets)

    add(S_TOTAL_EVENTS, np.ones(bucket_ids.shape[0], dtype=bool))
    for col, code in (
        (S_N_ACCEPT, ACCEPT),
        (S_N_CONNECT, CONNECT),
        (S_N_RECONNECT, RECONNECT),
        (S_N_DISCONNECT, DISCONNECT),
        (S_N_RECEIVE, RECEIVE),
        (S_N_RETRANSMIT, RETRANSMIT),
    ):
        add(col, tcp & (kind == code))
    add(S_TCP_EVENTS, tcp)
    add(S_UDP_EVENTS, udp)
    return out


def _best_split_on_feature(col, yy, counts, sq_total):
    """Best Gini cut on one feature.

    Returns ``(score, threshold)`` where ``score = sum(L_c^2)/n_L + sum(R_c^2)/n_R``
    (larger is better) and the cut sends ``x <= threshold`` left; ``None`` if the
    feature is constant over the node.
    """
    n = col.shape[0]
    order = np.argsort(col, kind="stable")
    sv = col[order]
    sy = yy[order]
    cut = np.nonzero(sv[:-1] < sv[1:])[0]
    if cut.shape[0] == 0:
        return None
    # rank of each sample among earlier samples of its class, in sorted order
    by_class = np.argsort(sy, kind="stable")
    starts = np.zeros(counts.shape[0], dtype=np.int64)
    starts[1:] = np.cumsum(counts)[:-1]
    rank = np.empty(n, dtype=np.int64)
    rank[by_class] = np.arange(n, dtype=np.int64) - starts[sy[by_class]]
    sq_left = np.cumsum(2 * rank + 1)
    sq_right = sq_total - np.cumsum(2 * (counts[sy] - rank) - 1)
    n_left = cut + 1
    n_right = n - n_left
    score = sq_left[cut] / n_left + sq_right[cut] / n_right
    j = int(np.argmax(score))
    return score[j], sv[cut[j]]


def grow_tree(X, y, sample_idx, n_classes, max_depth, min_split, k_features, feat_keys):
    max_nodes = feat_keys.shape[0]
    n_features = X.shape[1]
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros((max_nodes, n_classes), dtype=np.float64)

    idx = sample_idx.astype(np.int64).copy()
    stack = [(0, 0, idx.shape[0], 0)]
    n_nodes = 1
    while stack:
        node, start, end, depth = stack.pop()
        n = end - start
        rows = idx[start:end]
        yy = y[rows]
        counts = np.bincount(yy, minlength=n_classes).astype(np.int64)
        value[node] = counts / n
        if depth >= max_depth or n < min_split or np.count_nonzero(counts) <= 1:
            continue
        sq_total = int(np.dot(counts, counts))
        xs = X[rows]
        best_f = -1
        best_thr = 0.0
        best_score = -1.0
        visited = 0
        for f in np.argsort(feat_keys[node], kind="stable")[:n_features]:
            if visited >= k_features:
                break
            found = _best_split_on_feature(xs[:, f], yy, counts, sq_total)
            if found is None:
                continue
            visited += 1
            score, thr = found
            if score > best_score or (
                score == best_score and (f < best_f or (f == best_f and thr < best_thr))
            ):
                best_score, best_f, best_thr = score, int(f), thr
        if best_f < 0:
            continue
        go_left = xs[:, best_f] <= best_thr
        n_left = int(np.count_nonzero(go_left))
        idx[start:end] = np.concatenate((rows[go_left], rows[~go_left]))
        lid, rid = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack.append((rid, start + n_left, end, depth + 1))
        stack.append((lid, start, start + n_left, depth + 1))

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


def forest_proba(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    proba = np.zeros((n, value.shape[1]), dtype=np.float64)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[active]
            go_left = X[r, feature[nd]] <= threshold[nd]
            node[active] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        proba += value[node]
    return proba / len(roots)

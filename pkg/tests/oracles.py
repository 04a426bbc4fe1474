"""Naive reference implementations the fast paths are pinned against.

Everything in here is written with plain Python loops and scalar math on
purpose: slow, independent of the library's vectorized code, and easy to
check by eye.  Inputs are indexable (nested lists or arrays); outputs are
plain lists/floats.
"""

import math


def _norm(flat, order):
    if order == "l1":
        return sum(abs(v) for v in flat)
    if order == "l2":
        return math.sqrt(sum(v * v for v in flat))
    if order == "linf":
        return max(abs(v) for v in flat)
    if order == "power":
        return sum(math.sqrt(abs(v)) for v in flat) ** 2
    raise ValueError(order)


def pool_oracle(data, ww, wh, stride, kind):
    K = len(data)
    W = len(data[0])
    H = len(data[0][0])
    ow = (W - ww) // stride + 1
    oh = (H - wh) // stride + 1
    out = [[[0.0] * oh for _ in range(ow)] for _ in range(K)]
    for k in range(K):
        for oi in range(ow):
            for oj in range(oh):
                window = []
                for di in range(ww):
                    for dj in range(wh):
                        window.append(float(data[k][oi * stride + di][oj * stride + dj]))
                out[k][oi][oj] = max(window) if kind == "max" else sum(window)
    return out


def spatial_weights_oracle(data, order="l2", power=2.0):
    K = len(data)
    W = len(data[0])
    H = len(data[0][0])
    s = [[0.0] * H for _ in range(W)]
    for i in range(W):
        for j in range(H):
            total = 0.0
            for k in range(K):
                total += float(data[k][i][j])
            s[i][j] = total
    denom = _norm([s[i][j] for i in range(W) for j in range(H)], order)
    if denom == 0.0:
        return s
    return [[(s[i][j] / denom) ** (1.0 / power) for j in range(H)] for i in range(W)]


def sparsity_oracle(data):
    K = len(data)
    W = len(data[0])
    H = len(data[0][0])
    xs = []
    for k in range(K):
        firing = 0
        for i in range(W):
            for j in range(H):
                if float(data[k][i][j]) >= 1e-12:
                    firing += 1
        xs.append(1.0 - firing / (W * H))
    return xs


def channel_weights_oracle(data, eps):
    q = [1.0 - x for x in sparsity_oracle(data)]
    total = sum(q)
    return [math.log((len(q) * eps + total) / (eps + qk)) for qk in q]


def weight_oracle(data, alpha, beta):
    K = len(data)
    W = len(data[0])
    H = len(data[0][0])
    out = [[[0.0] * H for _ in range(W)] for _ in range(K)]
    for k in range(K):
        for i in range(W):
            for j in range(H):
                out[k][i][j] = float(alpha[i][j]) * float(beta[k]) * float(data[k][i][j])
    return out


def sum_oracle(data):
    K = len(data)
    W = len(data[0])
    H = len(data[0][0])
    out = []
    for k in range(K):
        total = 0.0
        for i in range(W):
            for j in range(H):
                total += float(data[k][i][j])
        out.append(total)
    return out


def pnorm_oracle(vec, order="l2", power=1.0):
    powered = [math.copysign(abs(float(v)) ** power, float(v)) for v in vec]
    denom = _norm(powered, order)
    if denom == 0.0:
        return powered
    return [v / denom for v in powered]


def gaussian_oracle(W, H, frac):
    sigma = frac * min(W, H)
    ci = (W - 1) / 2.0
    cj = (H - 1) / 2.0
    out = [[0.0] * H for _ in range(W)]
    for i in range(W):
        for j in range(H):
            d2 = (i - ci) ** 2 + (j - cj) ** 2
            out[i][j] = math.exp(-d2 / (2.0 * sigma * sigma))
    return out


def covariance_oracle(rows):
    n = len(rows)
    k = len(rows[0])
    mean = [sum(float(r[a]) for r in rows) / n for a in range(k)]
    cov = [[0.0] * k for _ in range(k)]
    for a in range(k):
        for b in range(k):
            total = 0.0
            for r in rows:
                total += (float(r[a]) - mean[a]) * (float(r[b]) - mean[b])
            cov[a][b] = total / (n - 1)
    return mean, cov


def whiten_apply_oracle(x, mean, projection, scales):
    k_out = len(projection)
    k = len(mean)
    out = []
    for a in range(k_out):
        dot = 0.0
        for b in range(k):
            dot += float(projection[a][b]) * (float(x[b]) - float(mean[b]))
        out.append(float(scales[a]) * dot)
    return out


def rank_oracle(ids, vectors, qvec):
    scores = []
    for vec in vectors:
        dot = 0.0
        for a, b in zip(vec, qvec):
            dot += float(a) * float(b)
        scores.append(dot)
    order = sorted(range(len(ids)), key=lambda n: (-scores[n], n))
    return [(ids[n], scores[n]) for n in order]


def ap_oracle(ranked_ids, positives, junk=()):
    positives = set(positives)
    junk = set(junk)
    kept = [r for r in ranked_ids if r not in junk]
    npos = len(positives)
    ap = 0.0
    hits = 0
    prev_recall = 0.0
    prev_precision = 1.0
    for rank, rid in enumerate(kept, start=1):
        if rid in positives:
            hits += 1
            recall = hits / npos
            precision = hits / rank
            ap += (recall - prev_recall) * ((prev_precision + precision) / 2.0)
            prev_recall = recall
            prev_precision = precision
        else:
            prev_precision = hits / rank
    return ap

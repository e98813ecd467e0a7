"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
All randomness is drawn by the caller and passed in, so both backends
produce the same outputs for the same inputs.
"""

import numpy as np

CLAMP = 1e-12


def softmax_rows(logits):
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def xent_backward(logits, targets, weights, denom):
    """Weighted softmax cross-entropy over rows.

    Returns ``(loss, dlogits, probs)`` with
    ``loss = sum_b w_b * -log p_b[t_b] / denom`` and ``dlogits`` its
    gradient with respect to ``logits``.
    """
    z = np.asarray(logits, dtype=np.float64)
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=1, keepdims=True)
    probs = e / s
    rows = np.arange(n)
    t = np.asarray(targets, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    # log-softmax form: exact even where p[t] underflows
    nll = (np.log(s[:, 0]) + m[:, 0]) - z[rows, t]
    active = w != 0.0
    loss = float(np.sum(w[active] * nll[active])) / denom
    d = probs.copy()
    d[rows, t] -= 1.0
    d *= (w / denom)[:, None]
    return loss, d, probs


def select_pseudo(probs, thresholds):
    p = np.asarray(probs, dtype=np.float64)
    labels = np.argmax(p, axis=1).astype(np.int64)
    conf = p[np.arange(p.shape[0]), labels]
    passed = conf >= np.asarray(thresholds, dtype=np.float64)[labels]
    return labels, conf, passed


def _mix64(x):
    # splitmix64 finalizer on uint64 arrays
    x = x.astype(np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


def hash_buckets(token_ids, n_buckets):
    ids = np.asarray(token_ids, dtype=np.int64).astype(np.uint64)
    return (_mix64(ids) % np.uint64(n_buckets)).astype(np.int64)


def hashed_bow(flat, offsets, n_buckets):
    """Hashed bag-of-words counts per sequence, L2-normalized per row."""
    flat = np.asarray(flat, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    n = offsets.shape[0] - 1
    out = np.zeros((n, n_buckets), dtype=np.float64)
    if flat.size:
        rows = np.repeat(np.arange(n), np.diff(offsets))
        np.add.at(out, (rows, hash_buckets(flat, n_buckets)), 1.0)
    norms = np.sqrt((out * out).sum(axis=1))
    nz = norms > 0
    out[nz] /= norms[nz, None]
    return out


def augment_tokens(flat, offsets, syn_flat, syn_offsets, uniforms,
                   replace_rate, drop_rate, window, shuffle_rate):
    """Synonym replacement, token dropout and local window shuffles.

    ``uniforms`` has shape ``(len(flat), 5)``; column meaning:
    replace gate, synonym choice, drop gate, window-shuffle gate,
    Fisher-Yates draw.  Returns ``(new_flat, new_offsets)``.
    """
    flat = np.asarray(flat, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    syn_flat = np.asarray(syn_flat, dtype=np.int64)
    syn_offsets = np.asarray(syn_offsets, dtype=np.int64)
    u = np.asarray(uniforms, dtype=np.float64)
    n = offsets.shape[0] - 1
    out = []
    new_offsets = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        a, b = offsets[i], offsets[i + 1]
        seq = []
        rows = []
        for j in range(a, b):
            tok = flat[j]
            lo, hi = syn_offsets[tok], syn_offsets[tok + 1]
            if hi > lo and u[j, 0] < replace_rate:
                k = int(u[j, 1] * (hi - lo))
                if k >= hi - lo:
                    k = hi - lo - 1
                tok = syn_flat[lo + k]
            if u[j, 2] < drop_rate:
                continue
            seq.append(int(tok))
            rows.append(j)
        if not seq and b > a:
            # floor: the first token always survives a full dropout
            j = a
            tok = flat[j]
            lo, hi = syn_offsets[tok], syn_offsets[tok + 1]
            if hi > lo and u[j, 0] < replace_rate:
                k = min(int(u[j, 1] * (hi - lo)), hi - lo - 1)
                tok = syn_flat[lo + k]
            seq.append(int(tok))
            rows.append(j)
        if window > 1:
            for w0 in range(0, len(seq), window):
                w1 = min(w0 + window, len(seq))
                if w1 - w0 < 2 or u[rows[w0], 3] >= shuffle_rate:
                    continue
                for k in range(w1 - 1, w0, -1):
                    r = w0 + int(u[rows[k], 4] * (k - w0 + 1))
                    if r > k:
                        r = k
                    seq[k], seq[r] = seq[r], seq[k]
        out.extend(seq)
        new_offsets[i + 1] = new_offsets[i] + len(seq)
    return np.asarray(out, dtype=np.int64), new_offsets

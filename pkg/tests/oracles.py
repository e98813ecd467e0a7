"""Independent reference computations used by the test suite.

Everything here is written example-by-example with plain loops so that it
shares no code path with the vectorized implementation under test.
"""

import math

import numpy as np


def forward_one(params, x, activation="tanh"):
    """Probabilities for a single input through a dense net given as [W1, b1, ...]."""
    h = [float(v) for v in x]
    n_layers = len(params) // 2
    for k in range(n_layers):
        W, b = params[2 * k], params[2 * k + 1]
        z = [sum(h[i] * W[i, j] for i in range(len(h))) + b[j] for j in range(W.shape[1])]
        if k < n_layers - 1 and activation == "tanh":
            z = [math.tanh(v) for v in z]
        h = z
    m = max(h)
    e = [math.exp(v - m) for v in h]
    s = sum(e)
    return [v / s for v in e]


def xent_grad_one(params, x, target, activation="tanh"):
    """(loss, grads) of -log p[target] for one input, by explicit chain rule."""
    acts = [[float(v) for v in x]]
    n_layers = len(params) // 2
    for k in range(n_layers):
        W, b = params[2 * k], params[2 * k + 1]
        h = acts[-1]
        z = [sum(h[i] * W[i, j] for i in range(len(h))) + b[j] for j in range(W.shape[1])]
        if k < n_layers - 1 and activation == "tanh":
            z = [math.tanh(v) for v in z]
        acts.append(z)
    logits = acts[-1]
    m = max(logits)
    lse = m + math.log(sum(math.exp(v - m) for v in logits))
    p = [math.exp(v - lse) for v in logits]
    loss = lse - logits[target]
    delta = [p[j] - (1.0 if j == target else 0.0) for j in range(len(p))]
    grads = [None] * len(params)
    for k in reversed(range(n_layers)):
        W = params[2 * k]
        h = acts[k]
        gW = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                gW[i, j] = h[i] * delta[j]
        grads[2 * k] = gW
        grads[2 * k + 1] = np.array(delta, dtype=np.float64)
        if k > 0:
            back = [sum(W[i, j] * delta[j] for j in range(W.shape[1])) for i in range(W.shape[0])]
            if activation == "tanh":
                back = [back[i] * (1.0 - h[i] ** 2) for i in range(len(back))]
            delta = back
    return loss, grads


def scripted_step(params_f, params_g, p_f, p_g, X_lab, y_lab, X_weak, X_strong,
                  lam, tau, delta, w_u, lr, activation="tanh"):
    """One full two-model step written directly from the algorithm's line order.

    Plain SGD with learning rate ``lr``.  Returns a dict of every
    intermediate quantity.
    """
    out = {}
    B, muB = len(y_lab), len(X_weak)
    models = {"F": params_f, "G": params_g}
    status = {"F": list(p_f), "G": list(p_g)}
    for name, params in models.items():
        # supervised loss and its gradient, mean over B
        loss_s, g_s = 0.0, [np.zeros_like(p) for p in params]
        for x, y in zip(X_lab, y_lab):
            l, g = xent_grad_one(params, x, int(y), activation)
            loss_s += l / B
            for acc, gi in zip(g_s, g):
                acc += gi / B
        out[f"sup_loss_{name}"] = loss_s
        out[f"sup_grads_{name}"] = g_s
        # learning status EMA over the whole weak batch
        q = [forward_one(params, x, activation) for x in X_weak]
        C = len(q[0])
        mean_q = [sum(qb[c] for qb in q) / muB for c in range(C)]
        pt = [lam * status[name][c] + (1 - lam) * mean_q[c] for c in range(C)]
        out[f"p_tilde_{name}"] = pt
        top = max(pt)
        out[f"tau_{name}"] = [pt[c] / top * tau for c in range(C)]
        out[f"q_{name}"] = q
        hard = []
        for qb in q:
            best = 0
            for c in range(1, C):
                if qb[c] > qb[best]:
                    best = c
            hard.append(best)
        out[f"hard_{name}"] = hard
        out[f"conf_{name}"] = [qb[h] for qb, h in zip(q, hard)]
        out[f"mask_{name}"] = [qb[h] >= out[f"tau_{name}"][h] for qb, h in zip(q, hard)]
    w = [delta if a != b else 1 - delta for a, b in zip(out["hard_F"], out["hard_G"])]
    out["weights"] = w
    for name, peer in (("F", "G"), ("G", "F")):
        params = models[name]
        loss_u, g_u = 0.0, [np.zeros_like(p) for p in params]
        for b in range(muB):
            if not out[f"mask_{peer}"][b]:
                continue
            l, g = xent_grad_one(params, X_strong[b], out[f"hard_{peer}"][b], activation)
            loss_u += w[b] * l / muB
            for acc, gi in zip(g_u, g):
                acc += w[b] * gi / muB
        out[f"unsup_loss_{name}"] = loss_u
        out[f"new_params_{name}"] = [p - lr * (gs + w_u * gu)
                                     for p, gs, gu in zip(params, out[f"sup_grads_{name}"], g_u)]
    return out


def brute_force_macro_f1(y_true, y_pred, n_classes):
    """Macro-F1 from explicit per-class counting (F1 = 0 for an empty class)."""
    f1s = []
    for c in range(n_classes):
        tp = fp = fn = 0
        for t, p in zip(y_true, y_pred):
            if p == c and t == c:
                tp += 1
            elif p == c:
                fp += 1
            elif t == c:
                fn += 1
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if tp == 0 else 2 * tp / denom)
    return sum(f1s) / n_classes

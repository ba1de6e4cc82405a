"""Feed-forward and LSTM classifiers in numpy with hand-written backpropagation.

Both networks end in a 2-way softmax trained on mean cross-entropy. Parameters live
in plain dicts of float64 arrays so that gradients can be checked entry by entry.
"""

from __future__ import annotations

import numpy as np


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _xent(logits, y):
    p = softmax(logits)
    n = len(y)
    loss = -np.mean(np.log(np.clip(p[np.arange(n), y], 1e-300, None)))
    d = p.copy()
    d[np.arange(n), y] -= 1.0
    return loss, d / n, p


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# -- MLP ----------------------------------------------------------------------


def mlp_init(rng, n_in: int, width: int) -> dict:
    return {
        "W1": glorot(rng, n_in, width), "b1": np.zeros(width),
        "W2": glorot(rng, width, width), "b2": np.zeros(width),
        "W3": glorot(rng, width, 2), "b3": np.zeros(2),
    }


def dropout_masks(rng, shape, rate: float, n: int):
    """Inverted-dropout masks (scaled by 1/keep); ``None`` when rate is 0."""
    if rate <= 0:
        return [None] * n
    keep = 1.0 - rate
    return [(rng.random(shape) < keep) / keep for _ in range(n)]


def mlp_forward(p: dict, x: np.ndarray, masks=(None, None)):
    z1 = x @ p["W1"] + p["b1"]
    h1 = np.maximum(z1, 0.0)
    if masks[0] is not None:
        h1 = h1 * masks[0]
    z2 = h1 @ p["W2"] + p["b2"]
    h2 = np.maximum(z2, 0.0)
    if masks[1] is not None:
        h2 = h2 * masks[1]
    logits = h2 @ p["W3"] + p["b3"]
    return logits, (x, z1, h1, z2, h2)


def mlp_loss_grad(p: dict, x, y, l2: float = 0.0, masks=(None, None)):
    logits, (x, z1, h1, z2, h2) = mlp_forward(p, x, masks)
    loss, d, _ = _xent(logits, y)
    g = {"W3": h2.T @ d, "b3": d.sum(0)}
    dh2 = d @ p["W3"].T
    if masks[1] is not None:
        dh2 = dh2 * masks[1]
    dz2 = dh2 * (z2 > 0)
    g["W2"], g["b2"] = h1.T @ dz2, dz2.sum(0)
    dh1 = dz2 @ p["W2"].T
    if masks[0] is not None:
        dh1 = dh1 * masks[0]
    dz1 = dh1 * (z1 > 0)
    g["W1"], g["b1"] = x.T @ dz1, dz1.sum(0)
    if l2:
        for k in ("W1", "W2", "W3"):
            loss += l2 * np.sum(p[k] ** 2)
            g[k] = g[k] + 2.0 * l2 * p[k]
    return loss, g


def mlp_proba(p: dict, x: np.ndarray) -> np.ndarray:
    return softmax(mlp_forward(p, np.atleast_2d(x))[0])


# -- LSTM -----------------------------------------------------------------------


def lstm_init(rng, n_in: int, hidden: int, n_layers: int = 2) -> dict:
    p = {}
    for layer in range(n_layers):
        d = n_in if layer == 0 else hidden
        p[f"W{layer}"] = glorot(rng, d, 4 * hidden)
        p[f"U{layer}"] = glorot(rng, hidden, 4 * hidden)
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        p[f"b{layer}"] = b
    p["V"] = glorot(rng, hidden, 2)
    p["c"] = np.zeros(2)
    return p


def pad_sequences(seqs) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length (T_i, D) sequences into (B, T, D) plus a (B, T) validity mask."""
    seqs = [np.asarray(s, dtype=float) for s in seqs]
    T = max(len(s) for s in seqs)
    D = seqs[0].shape[1]
    x = np.zeros((len(seqs), T, D))
    m = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        x[i, :len(s)] = s
        m[i, :len(s)] = 1.0
    return x, m


def _layer_forward(x, mask, W, U, b, rmask):
    B, T, _ = x.shape
    H = U.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    out = np.zeros((B, T, H))
    cache = []
    for t in range(T):
        hr = h if rmask is None else h * rmask
        a = x[:, t] @ W + hr @ U + b
        i, f = sigmoid(a[:, :H]), sigmoid(a[:, H:2 * H])
        g, o = np.tanh(a[:, 2 * H:3 * H]), sigmoid(a[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = mask[:, t, None]
        cache.append((hr, c, i, f, g, o, tc, m))
        c = m * c_new + (1 - m) * c
        h = m * h_new + (1 - m) * h
        out[:, t] = h
    return out, cache


def _layer_backward(dout, x, W, U, rmask, cache):
    B, T, _ = x.shape
    H = U.shape[0]
    dW, dU, db = np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H)
    dx = np.zeros_like(x)
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        hr, c_prev, i, f, g, o, tc, m = cache[t]
        dh = dh + dout[:, t]
        dh_new, dc_new = m * dh, m * dc
        dh_prev, dc_prev = (1 - m) * dh, (1 - m) * dc
        do = dh_new * tc
        dc_new = dc_new + dh_new * o * (1 - tc**2)
        da = np.concatenate([dc_new * g * i * (1 - i), dc_new * c_prev * f * (1 - f),
                             dc_new * i * (1 - g**2), do * o * (1 - o)], axis=1)
        dc_prev = dc_prev + dc_new * f
        dW += x[:, t].T @ da
        dU += hr.T @ da
        db += da.sum(0)
        dx[:, t] = da @ W.T
        dhr = da @ U.T
        dh_prev = dh_prev + (dhr if rmask is None else dhr * rmask)
        dh, dc = dh_prev, dc_prev
    return dx, dW, dU, db


def lstm_n_layers(p: dict) -> int:
    return sum(1 for k in p if k.startswith("U"))


def lstm_forward(p, x, mask, rmasks=None):
    n = lstm_n_layers(p)
    rmasks = rmasks or [None] * n
    caches, inputs = [], []
    h = x
    for layer in range(n):
        inputs.append(h)
        h, cache = _layer_forward(h, mask, p[f"W{layer}"], p[f"U{layer}"], p[f"b{layer}"], rmasks[layer])
        caches.append(cache)
    last = h[:, -1]  # padded steps carry the state of the last valid step
    return last @ p["V"] + p["c"], (inputs, caches, last, h.shape)


def lstm_loss_grad(p, x, mask, y, l2_kernel: float = 0.0, l2_bias: float = 0.0, rmasks=None):
    n = lstm_n_layers(p)
    rmasks = rmasks or [None] * n
    logits, (inputs, caches, last, hshape) = lstm_forward(p, x, mask, rmasks)
    loss, d, _ = _xent(logits, y)
    g = {"V": last.T @ d, "c": d.sum(0)}
    dout = np.zeros(hshape)
    dout[:, -1] = d @ p["V"].T
    for layer in range(n - 1, -1, -1):
        dout, g[f"W{layer}"], g[f"U{layer}"], g[f"b{layer}"] = _layer_backward(
            dout, inputs[layer], p[f"W{layer}"], p[f"U{layer}"], rmasks[layer], caches[layer])
    for layer in range(n):
        for key, lam in ((f"W{layer}", l2_kernel), (f"b{layer}", l2_bias)):
            if lam:
                loss += lam * np.sum(p[key] ** 2)
                g[key] = g[key] + 2.0 * lam * p[key]
    return loss, g


def lstm_proba(p, seqs) -> np.ndarray:
    x, m = pad_sequences(seqs)
    return softmax(lstm_forward(p, x, m)[0])

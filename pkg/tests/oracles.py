"""Slow, literal reference implementations used as test oracles.

Nothing here imports the package code it is meant to check.
"""

import numpy as np


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    out = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        out[i] = np.sum(x * np.exp(-2j * np.pi * i * k / n))
    return out


def naive_hann(w):
    return np.array([0.5 - 0.5 * np.cos(2 * np.pi * i / w) for i in range(w)])


def stft_loss_oracle(y, y_hat, w, eps=1e-8):
    """Single-item STFT loss built on the O(n^2) DFT."""
    hop = w // 4
    win = naive_hann(w)
    mags_y, mags_h = [], []
    start = 0
    while start + w <= len(y):
        mags_y.append(np.abs(naive_dft(y[start : start + w] * win))[: w // 2 + 1])
        mags_h.append(np.abs(naive_dft(y_hat[start : start + w] * win))[: w // 2 + 1])
        start += hop
    my, mh = np.array(mags_y), np.array(mags_h)
    conv = np.sqrt(np.sum((my - mh) ** 2)) / np.sqrt(np.sum(my**2))
    logs = np.abs(np.log(np.maximum(my, eps)) - np.log(np.maximum(mh, eps)))
    return conv + logs.sum() / my.size


def eesr_oracle(y, y_hat, w):
    hop = w // 4
    k_count = len(y) // hop
    acc = 0.0
    for k in range(k_count):
        seg = slice(k * hop, min(k * hop + w, len(y)))
        e = max(sum(v * v for v in y[seg]) / w, 1e-12)
        e_hat = sum(v * v for v in y_hat[seg]) / w
        acc += abs(e_hat - e) / e
    return acc / k_count


def central_difference(f, x, eps=1e-6):
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f(x)
        flat[i] = old - eps
        down = f(x)
        flat[i] = old
        gf[i] = (up - down) / (2 * eps)
    return g


def length_oracle(blocks, l_out, x_max=2000):
    """Exhaustive forward search for the cheapest padding-free plan.

    ``blocks`` is a list of ``(kernel, dilation, pool)``. For every input
    length and every admissible pooling crop the pass is simulated sample
    count by sample count; at each audio/gain junction an optional extra crop
    of both operands is also tried. Returns ``(total_crop, X, T tuple)`` of
    the best plan, ranking by total crop, then X, then the T tuple.
    Branches that already cost more than the incumbent are cut.
    """
    best = None

    def better(key):
        return best is None or key < best

    def walk(j, x, mod_len, audio_len, cost, ts):
        nonlocal best
        if best is not None and cost > best[0]:
            return
        if j == len(blocks):
            if audio_len < l_out:
                return
            key = (cost + audio_len - l_out, x, tuple(ts))
            if better(key):
                best = key
            return
        k, d, p = blocks[j]
        conv_len = mod_len - (k - 1) * d
        for c in range(0, max(conv_len, 0) + 1):
            pooled = conv_len - c
            if pooled < 3 * p:
                break
            if pooled % p:
                continue
            t = pooled - 2 * p
            common = min(audio_len, t)
            base = cost + c + (audio_len - common) + (t - common)
            for extra in range(0, common - l_out + 1):
                step = base + 2 * extra
                if best is not None and step > best[0]:
                    break
                walk(j + 1, x, t, common - extra, step, ts + [t])

    for x in range(1, x_max + 1):
        # the audio path alone crops x - l_out samples
        if best is not None and x - l_out > best[0]:
            break
        walk(0, x, x, x, 0, [])
    return best

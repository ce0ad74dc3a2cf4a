"""Independent reference implementations used as test oracles."""

import numpy as np


def brute_overlay(box, H, W):
    """Evaluate the row/column inequalities cell by cell."""
    x0, y0, x1, y1 = box
    out = np.zeros((H, W), dtype=bool)
    for p in range(H):
        for q in range(W):
            out[p, q] = (y0 * H <= p < y1 * H) and (x0 * W <= q < x1 * W)
    return out


def naive_aggregate(nodes, H, W, K, scale_by_count=True):
    """Per-cell loop: sum covering embeddings, divide by (covering count / S)."""
    S = len(nodes)
    out = np.zeros((H, W, K))
    for p in range(H):
        for q in range(W):
            acc = np.zeros(K)
            n = 0
            for t, box in nodes:
                if brute_overlay(box, H, W)[p, q]:
                    acc += t
                    n += 1
            if n:
                out[p, q] = acc / (n / S) if scale_by_count else acc / n
    return out


def naive_fuse(g, c, w1, b1, w2, b2):
    """c + W2 relu(W1 g + b1) + b2 per pixel; g is K x H x W, c is D x H x W."""
    K, H, W = g.shape
    D = c.shape[0]
    hidden = w1.shape[0]
    out = c.copy()
    for p in range(H):
        for q in range(W):
            h = [max(0.0, b1[j] + sum(w1[j, k] * g[k, p, q] for k in range(K))) for j in range(hidden)]
            for d in range(D):
                out[d, p, q] += b2[d] + sum(w2[d, j] * h[j] for j in range(hidden))
    return out


def central_diff_check(fn, params, eps=1e-5, n_probe=None, rng=None):
    """Largest relative error between autograd and central differences.

    ``fn`` returns a scalar double tensor; ``params`` are leaf tensors with
    requires_grad. Probes every entry unless ``n_probe`` limits it.
    """
    import torch

    loss = fn()
    grads = torch.autograd.grad(loss, params)
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.data.view(-1)
        idx = range(flat.numel())
        if n_probe is not None and flat.numel() > n_probe:
            idx = (rng or np.random.default_rng(0)).choice(flat.numel(), n_probe, replace=False)
        for i in idx:
            i = int(i)
            orig = flat[i].item()
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            num = (up - down) / (2 * eps)
            ana = g.view(-1)[i].item()
            err = abs(num - ana) / max(abs(num), abs(ana), 1e-6)
            worst = max(worst, err)
    return worst

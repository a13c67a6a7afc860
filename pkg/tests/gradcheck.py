"""Finite-difference gradient checking against the network's backward pass.

Central differences are only meaningful where the loss is smooth across the
probe window. The network is piecewise linear (leaky-rectifier corners,
pooling argmax), and with thousands of activations some always sit within
1e-5 of a corner, so rather than hunting for a kink-free draw each probe is
validated: a coordinate counts as checkable only when the activation sign
pattern and every pooling choice are identical at w + eps and w - eps.
Checkable coordinates must then match the analytic gradient to 1e-4
relative, with an absolute floor at the float64 cancellation noise of the
loss difference.
"""

import numpy as np

from zsdn.network import forward_batch


def _branch_signature(model, x):
    _, cache = forward_batch(model, x, keep_cache=True)
    sig = [np.signbit(v) for k, v in sorted(cache.items()) if k.endswith(".pre")]
    sig.extend(idx for idx, _ in cache["pools"])
    return sig


def _same_signature(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def check_gradients(model, x, tgt, eps=1e-5, samples_per_tensor=8, rel_tol=1e-4):
    """Probe sampled weights; returns (checked, skipped, failures).

    ``failures`` lists (name, index, numeric, analytic) for checkable
    coordinates whose central difference disagrees with backward().
    """
    y, cache = forward_batch(model, x, keep_cache=True)
    loss0 = float(((y - tgt) ** 2).sum())
    grads = {}
    from zsdn.network import backward_batch

    grads = backward_batch(model, cache, 2 * (y - tgt))
    fd_floor = 20 * loss0 * np.finfo(np.float64).eps / eps

    def loss(m):
        yy, _ = forward_batch(m, x)
        return float(((yy - tgt) ** 2).sum())

    checked = 0
    skipped = 0
    failures = []
    for name, wa in model.weights.items():
        flat = wa.ravel()
        gf = grads[name].ravel()
        sel = np.random.default_rng(abs(hash(name)) % 2**32).choice(
            flat.size, size=min(samples_per_tensor, flat.size), replace=False
        )
        for i in sel:
            old = flat[i]
            flat[i] = old + eps
            sig_p = _branch_signature(model, x)
            lp = loss(model)
            flat[i] = old - eps
            sig_m = _branch_signature(model, x)
            lm = loss(model)
            flat[i] = old
            if not _same_signature(sig_p, sig_m):
                skipped += 1
                continue
            num = (lp - lm) / (2 * eps)
            err = abs(num - gf[i])
            if err > max(rel_tol * max(abs(num), abs(gf[i])), fd_floor):
                failures.append((name, int(i), num, float(gf[i])))
            checked += 1
    return checked, skipped, failures

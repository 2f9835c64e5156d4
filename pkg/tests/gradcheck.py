"""Central finite-difference gradient oracle shared by the test modules."""

import numpy as np


def numeric_grads(model, loss_fn, h=1e-5):
    out = {}
    for name, p in model.params().items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        out[name] = g
    return out


def max_rel_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for name in numeric:
        a, n = analytic[name], numeric[name]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        # entries where both are ~0 carry no information
        err[np.maximum(np.abs(a), np.abs(n)) < floor] = 0.0
        worst = max(worst, float(err.max(initial=0.0)))
    return worst

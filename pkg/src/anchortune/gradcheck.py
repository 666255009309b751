"""Central finite-difference gradient checking.

The checks run the same graphs the library builds for training, but at
float64 where the two-sided difference quotient is trustworthy. ``fn`` maps
a list of Tensors to a scalar Tensor.
"""

import numpy as np

from .autograd import Tensor


def numerical_grad(fn, arrays, index, eps=1e-6):
    """Central finite differences of fn w.r.t. arrays[index], elementwise."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[index])
    flat = grad.reshape(-1)
    target = base[index].reshape(-1)
    for i in range(target.size):
        orig = target[i]
        target[i] = orig + eps
        hi = fn([Tensor(a, dtype=np.float64) for a in base]).item()
        target[i] = orig - eps
        lo = fn([Tensor(a, dtype=np.float64) for a in base]).item()
        target[i] = orig
        flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def check_gradients(fn, arrays, eps=1e-6, wrt=None):
    """Compare analytic and numerical gradients; returns max relative error.

    Relative error per input is ||analytic - numerical||_inf scaled by the
    larger of the two gradient magnitudes (floored to avoid 0/0).
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    out = fn(tensors)
    out.backward()
    worst = 0.0
    indices = range(len(arrays)) if wrt is None else wrt
    for i in indices:
        analytic = tensors[i].grad
        if analytic is None:
            raise AssertionError(f"no gradient flowed to input {i}")
        numeric = numerical_grad(fn, arrays, i, eps)
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
        err = np.abs(analytic - numeric).max() / scale
        worst = max(worst, float(err))
    return worst


def check_param_gradients(build_loss, params, n_probes=3, eps=1e-6, seed=0):
    """Spot-check parameter gradients of a large graph by probing entries.

    ``build_loss()`` must rebuild the scalar loss from the live ``params``
    dict (name -> float64 Tensor) so the finite-difference evaluations see
    the perturbed values. Probes ``n_probes`` random entries per parameter.
    Returns a dict name -> max relative error.
    """
    rng = np.random.default_rng(seed)
    loss = build_loss()
    loss.backward()
    analytic = {name: p.grad.copy() for name, p in params.items()}
    for p in params.values():
        p.grad = None

    errors = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        count = min(n_probes, flat.size)
        idx = rng.choice(flat.size, size=count, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            hi = build_loss().item()
            flat[i] = orig - eps
            lo = build_loss().item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            ana = analytic[name].reshape(-1)[i]
            scale = max(abs(ana), abs(numeric), 1e-8)
            worst = max(worst, abs(ana - numeric) / scale)
        errors[name] = worst
    return errors

"""Central finite-difference gradient checking."""

import numpy as np

from .tensor import backward


def numerical_grad(fn, array, h=1e-5):
    """d fn() / d array by central differences, perturbing ``array`` in place."""
    grad = np.zeros_like(array)
    flat, gflat = array.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn()
        flat[i] = orig - h
        fm = fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b):
    """||a - b|| / max(||a||, ||b||), 0 when both vanish."""
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def check_gradients(loss_fn, tensors, h=1e-5):
    """Compare autodiff and finite-difference gradients of a scalar loss.

    ``loss_fn()`` must rebuild the graph from the current contents of each
    tensor in ``tensors`` (all with ``requires_grad``).  Returns the
    relative error per tensor, in order.
    """
    for t in tensors:
        t.grad = None
    backward(loss_fn())
    errors = []
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_grad(lambda: float(loss_fn().data), t.data, h)
        errors.append(relative_error(analytic, numeric))
    return errors

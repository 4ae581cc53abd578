"""Tiny numpy/torch dispatch layer.

The analytic formulas in this package (spherical gaussians, light geometry)
are written once and evaluated either on numpy arrays or on torch tensors,
so the differentiable path and the plain path share a single source of truth.
Only the handful of operations whose names and calling conventions agree
between the two libraries are used; the helpers below cover the rest.
"""

import numpy as np

try:
    import torch
except ImportError:  # torch is a hard dependency, but keep import errors readable
    torch = None


def is_tensor(x) -> bool:
    return torch is not None and isinstance(x, torch.Tensor)


def get_xp(*arrays):
    """Return the array module (numpy or torch) for the given operands."""
    for a in arrays:
        if is_tensor(a):
            return torch
    return np


def norm(xp, v, keepdims=False):
    # keepdims spelled differently in torch, so do it by hand
    n = xp.sqrt(xp.sum(v * v, -1))
    return n[..., None] if keepdims else n


def normalize(xp, v, eps=1e-12):
    return v / xp.clip(norm(xp, v, keepdims=True), eps, None)


def dot(xp, a, b):
    return xp.sum(a * b, -1)


def cross(xp, a, b):
    # written out so it works identically for numpy arrays and torch tensors
    x = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    y = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    z = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return xp.stack([x, y, z], -1)


def as_array(x):
    """Detach to numpy if needed."""
    if is_tensor(x):
        return x.detach().cpu().numpy()
    return np.asarray(x)

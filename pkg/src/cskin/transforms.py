"""Linearized 6-DOF transforms and blendweight-to-transform conversion.

A transform is stored as six numbers ``(r1, r2, r3, t1, t2, t3)``: a
linearized rotation ``r`` and a translation ``t``. Its 3x4 matrix is
``[skew(r) | t]``, so applying it to a point ``x`` gives ``r x x + t``.
The class is closed under linear combination, which is what lets the
runtime blend transforms with a plain matrix-vector product.
"""
import numpy as np

from .errors import LengthMismatch

PARAM_ORDER = ("r1", "r2", "r3", "t1", "t2", "t3")

IDENTITY34 = np.eye(3, 4)
IDENTITY34.flags.writeable = False


def hat(params):
    """Build the 3x4 matrix of one or many 6-vectors.

    Args:
        params: array of shape (..., 6).

    Returns:
        Array of shape (..., 3, 4).
    """
    p = np.asarray(params, dtype=np.float64)
    if p.shape[-1] != 6:
        raise LengthMismatch(f"expected trailing dimension 6, got {p.shape}")
    r1, r2, r3, t1, t2, t3 = np.moveaxis(p, -1, 0)
    z = np.zeros_like(r1)
    m = np.stack([
        np.stack([z, -r3, r2, t1], axis=-1),
        np.stack([r3, z, -r1, t2], axis=-1),
        np.stack([-r2, r1, z, t3], axis=-1),
    ], axis=-2)
    return m


def apply_params(params, points):
    """Apply ``hat(params)`` to points without forming the matrix: ``r x p + t``."""
    params = np.asarray(params)
    return np.cross(params[..., :3], points) + params[..., 3:]


def blend_params(c, theta):
    """Blend per-shape parameters: ``sum_k c[k] * theta[k]``.

    ``theta`` has shape (S, ...) with the shape axis first.
    """
    c = np.asarray(c, dtype=np.float64)
    theta = np.asarray(theta)
    if c.ndim != 1 or c.shape[0] != theta.shape[0]:
        raise LengthMismatch(f"blendweights have length {c.shape}, expected {theta.shape[0]}")
    return np.tensordot(c, theta, axes=(0, 0))


def blend_to_transform(c, theta_j):
    """Skinning matrix of one bone for blendweights ``c``.

    Args:
        c: (S,) blendweights.
        theta_j: (S, 6) parameters of this bone for every shape.

    Returns:
        The 3x4 matrix ``I + hat(sum_k c_k theta_j[k])``.
    """
    return IDENTITY34 + hat(blend_params(c, theta_j))

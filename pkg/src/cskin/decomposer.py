"""Compressed skinning decomposition by Adam steps with constraint projection.

The unknowns are a dense (N, P) weight matrix ``W`` and an (S, P, 6)
parameter array ``theta`` holding one linearized transform per shape and
bone. After every Adam step, ``W`` is projected onto non-negative,
K-sparse, row-normalized weights and ``theta`` is cut down to its ``L``
largest entries by magnitude.
"""
import contextlib
import os
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimensionMismatch, NonFiniteGradient


@dataclass
class SolverConfig:
    """Solver settings.

    ``bones`` is P, ``influences`` is K and ``nnz`` is the global budget L on
    non-zero transform parameters (``None`` disables the transform projection).
    ``p`` is the loss exponent and ``lam`` the weight of the Laplacian term.
    """

    bones: int = 40
    influences: int = 8
    nnz: int | None = 6000
    p: float = 2.0
    lam: float = 1e-4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.9
    eps: float = 1e-8
    iterations: int = 20000
    seed: int = 0
    init_sigma: float = 1e-2
    log_every: int = 100

    def __post_init__(self):
        if self.bones < 1:
            raise ValueError("bones must be >= 1")
        if not 1 <= self.influences <= self.bones:
            raise ValueError("influences must be in [1, bones]")
        if self.nnz is not None and self.nnz < 1:
            raise ValueError("nnz must be >= 1 or None")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.init_sigma <= 0:
            raise ValueError("init_sigma must be positive")

    @classmethod
    def hd(cls, **overrides):
        """High-detail preset: L^12 loss, 32 influences, no transform budget, no smoothing."""
        return cls(**{**dict(p=12.0, influences=32, nnz=None, lam=0.0), **overrides})


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@dataclass(eq=False)
class Decomposition:
    """A fitted skinning decomposition.

    Attributes:
        rest: (N, 3) rest pose.
        weight_indices: (N, K) bone index per influence slot.
        weight_values: (N, K) weight per slot; unused slots hold 0.
        theta: (S, P, 6) transform parameters, mostly zero.
    """

    rest: np.ndarray
    weight_indices: np.ndarray
    weight_values: np.ndarray
    theta: np.ndarray
    unit: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rest = np.asarray(self.rest, dtype=np.float64)
        self.weight_indices = np.asarray(self.weight_indices, dtype=np.int64)
        self.weight_values = np.asarray(self.weight_values, dtype=np.float64)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        n = self.rest.shape[0]
        if self.weight_indices.shape != self.weight_values.shape or self.weight_indices.shape[0] != n:
            raise DimensionMismatch("weight arrays must both be (N, K)")
        if self.theta.ndim != 3 or self.theta.shape[2] != 6:
            raise DimensionMismatch(f"theta must be (S, P, 6), got {self.theta.shape}")
        if self.weight_indices.size and (
                self.weight_indices.min() < 0 or self.weight_indices.max() >= self.n_bones):
            raise DimensionMismatch("weight index out of range")

    @classmethod
    def from_dense(cls, rest, W, theta, influences, **kw):
        """Pack a projected dense weight matrix into per-vertex (index, value) slots."""
        W = np.asarray(W, dtype=np.float64)
        k = min(influences, W.shape[1])
        top = np.sort(np.argsort(-W, axis=1, kind="stable")[:, :k], axis=1)
        vals = np.take_along_axis(W, top, axis=1)
        return cls(rest, top, vals, theta, **kw)

    @property
    def n_vertices(self):
        return self.rest.shape[0]

    @property
    def n_shapes(self):
        return self.theta.shape[0]

    @property
    def n_bones(self):
        return self.theta.shape[1]

    @property
    def max_influences(self):
        return self.weight_indices.shape[1]

    @property
    def nnz(self):
        return int(np.count_nonzero(self.theta))

    def dense_weights(self):
        W = np.zeros((self.n_vertices, self.n_bones))
        np.add.at(W, (np.arange(self.n_vertices)[:, None], self.weight_indices), self.weight_values)
        return W


def thread_limit():
    """Context limiting BLAS threads per ``CSKIN_THREADS`` (unset or 0: one thread)."""
    n = int(os.environ.get("CSKIN_THREADS", "0") or 0)
    if n < 0:
        return contextlib.nullcontext()
    return threadpool_limits(limits=max(n, 1), user_api="blas")


def _check_dims(model, W, theta):
    n, s = model.n_vertices, model.n_shapes
    if W.ndim != 2 or W.shape[0] != n:
        raise DimensionMismatch(f"W must be ({n}, P), got {W.shape}")
    if theta.ndim != 3 or theta.shape[0] != s or theta.shape[1] != W.shape[1] or theta.shape[2] != 6:
        raise DimensionMismatch(f"theta must be ({s}, {W.shape[1]}, 6), got {theta.shape}")


def predict_deltas(rest, W, theta):
    """Skinned delta of every shape: ``sum_j w_ij (r_kj x v_i + t_kj)``, shape (S, N, 3)."""
    blended = W @ theta  # (S, N, 6)
    return np.cross(blended[..., :3], rest) + blended[..., 3:]


def residual(model, W, theta):
    """Per-shape, per-vertex fitting residual, shape (S, N, 3)."""
    W = np.asarray(W, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_dims(model, W, theta)
    return model.deltas - predict_deltas(model.rest, W, theta)


def laplacian_energy(W, edges):
    if len(edges) == 0:
        return 0.0
    d = W[edges[:, 0]] - W[edges[:, 1]]
    return float(np.sum(d * d))


def _laplacian_grad(W, edges):
    g = np.zeros_like(W)
    if len(edges):
        d = W[edges[:, 0]] - W[edges[:, 1]]
        np.add.at(g, edges[:, 0], 2.0 * d)
        np.add.at(g, edges[:, 1], -2.0 * d)
    return g


def loss(residuals, p, W, edges, lam):
    """``sum ||residual||^p + lam * sum_edges ||w_a - w_b||^2``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    e2 = np.sum(np.square(residuals), axis=-1)
    data = float(np.sum(e2 ** (p / 2.0)))
    if lam:
        data += lam * laplacian_energy(np.asarray(W, dtype=np.float64),
                                       np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    return data


def _data_term(model, W, theta, p):
    """Data loss, its gradients with respect to W and theta, and the residual norms."""
    res = model.deltas - predict_deltas(model.rest, W, theta)
    e2 = np.sum(res * res, axis=-1)
    pos = e2 > 0
    data = float(np.sum(np.where(pos, e2, 0.0) ** (p / 2.0)))
    if p == 2:
        coef = np.full_like(e2, 2.0)
    else:
        # zero subgradient where the residual vanishes
        coef = np.where(pos, p * np.where(pos, e2, 1.0) ** ((p - 2.0) / 2.0), 0.0)
    g_pred = -coef[..., None] * res  # d loss / d predicted delta
    g_blend = np.concatenate([np.cross(model.rest, g_pred), g_pred], axis=-1)  # (S, N, 6)
    gW = np.sum(g_blend @ theta.transpose(0, 2, 1), axis=0)
    gT = W.T @ g_blend
    return data, gW, gT, np.sqrt(e2)


def loss_gradient(model, W, theta, config):
    """Exact gradient of :func:`loss` with respect to ``W`` and ``theta``.

    Returns:
        (grad_W, grad_theta) with shapes (N, P) and (S, P, 6).
    """
    W = np.asarray(W, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_dims(model, W, theta)
    _, gW, gT, _ = _data_term(model, W, theta, config.p)
    if config.lam:
        gW = gW + config.lam * _laplacian_grad(W, model.edges)
    if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gT))):
        raise NonFiniteGradient(None)
    return gW, gT


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.9, eps=1e-8):
    """One bias-corrected Adam update.

    Returns:
        (new_params, new_state); inputs are left untouched.
    """
    t = state.step + 1
    m = [beta1 * m + (1 - beta1) * g for m, g in zip(state.m, grads)]
    v = [beta2 * v + (1 - beta2) * g * g for v, g in zip(state.v, grads)]
    c1 = 1 - beta1 ** t
    c2 = 1 - beta2 ** t
    new = [x - lr * (mi / c1) / (np.sqrt(vi / c2) + eps) for x, mi, vi in zip(params, m, v)]
    return new, AdamState(m, v, t)


def project_weights(W, influences):
    """Clamp negatives, keep the ``influences`` largest per row, normalize rows.

    Ties go to the lower bone index. A row left with (numerically) zero sum
    becomes one-hot on its largest original entry.
    """
    W = np.asarray(W, dtype=np.float64)
    out = np.where(W > 0, W, 0.0)
    if influences < W.shape[1]:
        order = np.argsort(-out, axis=1, kind="stable")
        np.put_along_axis(out, order[:, influences:], 0.0, axis=1)
    s = out.sum(axis=1)
    dead = s < 1e-12
    out /= np.where(dead, 1.0, s)[:, None]
    if np.any(dead):
        rows = np.flatnonzero(dead)
        out[rows] = 0.0
        out[rows, np.argmax(W[rows], axis=1)] = 1.0
    return out


def project_transforms(theta, nnz):
    """Zero all but the ``nnz`` entries of largest magnitude (ties: lowest flat index)."""
    theta = np.array(theta, dtype=np.float64)
    if nnz is None or nnz >= theta.size:
        return theta
    flat = theta.reshape(-1)
    drop = np.argsort(-np.abs(flat), kind="stable")[nnz:]
    flat[drop] = 0.0
    return theta


def _error_stats(norms, scale):
    return float(np.mean(norms)) * scale, float(np.max(norms)) * scale


def decompose(model, config, progress=None, init=None, callback=None):
    """Fit a compressed skinning decomposition to ``model``.

    Args:
        model: the :class:`~cskin.model_io.BlendshapeModel` to approximate.
        config: a :class:`SolverConfig`.
        progress: optional text stream receiving ``iteration,loss,mae,mxe``
            CSV rows (errors in mm) every ``config.log_every`` iterations.
        init: optional ``(W, theta)`` starting point replacing the seeded
            Gaussian initialization.
        callback: optional ``callback(iteration, W, theta)`` invoked after
            the projections of every iteration.

    Returns:
        The final projected :class:`Decomposition`.
    """
    n, s, P = model.n_vertices, model.n_shapes, config.bones
    if n < 1 or s < 1:
        raise DimensionMismatch("model needs at least one vertex and one shape")
    if init is None:
        rng = np.random.default_rng(config.seed)
        W = rng.normal(0.0, config.init_sigma, size=(n, P))
        theta = rng.normal(0.0, config.init_sigma, size=(s, P, 6))
    else:
        W = np.array(init[0], dtype=np.float64)
        theta = np.array(init[1], dtype=np.float64)
    _check_dims(model, W, theta)
    if W.shape[1] != P:
        raise DimensionMismatch(f"initial W has {W.shape[1]} bones, config says {P}")
    edges = model.edges
    p, lam = config.p, config.lam
    state = AdamState.zeros_like((W, theta))

    def report(it, data, norms):
        if progress is None:
            return
        total = data + (lam * laplacian_energy(W, edges) if lam else 0.0)
        mae, mxe = _error_stats(norms, model.unit_scale_to_mm)
        progress.write(f"{it},{total!r},{mae!r},{mxe!r}\n")

    if progress is not None:
        progress.write("iteration,loss,mae,mxe\n")
    with thread_limit():
        for it in range(config.iterations + 1):
            data, gW, gT, norms = _data_term(model, W, theta, p)
            if it % config.log_every == 0 or it == config.iterations:
                report(it, data, norms)
            if it == config.iterations:
                break
            if p != 2 and data > 0:
                # descend data**(2/p): same minimizers, gradients stay O(length) as p grows
                scale = (2.0 / p) * data ** (2.0 / p - 1.0)
                gW *= scale
                gT *= scale
            if lam:
                gW += lam * _laplacian_grad(W, edges)
            if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gT))):
                raise NonFiniteGradient(it + 1)
            (W, theta), state = adam_step((W, theta), (gW, gT), state, config.lr,
                                          config.beta1, config.beta2, config.eps)
            W = project_weights(W, config.influences)
            theta = project_transforms(theta, config.nnz)
            if callback is not None:
                callback(it + 1, W, theta)
    return Decomposition.from_dense(model.rest, W, theta, config.influences,
                                    meta={"config": config})

"""Playback of a decomposition: CSR transform storage, blending and skinning.

Per frame the runtime does one sparse matrix-vector product (blendweights
to 6-DOF parameters per bone), builds one 3x4 matrix per bone, then runs
linear blend skinning over at most K influences per vertex.
"""
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decomposer import Decomposition
from .errors import IndexOutOfRange, LengthMismatch, MissingFile, ParseError
from .transforms import IDENTITY34, PARAM_ORDER, hat

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class CSRMatrix:
    """Compressed row storage of the (6P, S) transform matrix.

    Row ``6*j + d`` holds parameter ``d`` (in ``r1 r2 r3 t1 t2 t3`` order) of
    bone ``j``; column ``k`` is blendshape ``k``.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.row_ptr, dtype=np.int32)
        ci = np.asarray(self.col_idx, dtype=np.int32)
        va = np.asarray(self.values, dtype=np.float32)
        if rp.shape != (self.n_rows + 1,) or rp[0] != 0 or rp[-1] != len(ci):
            raise ParseError("row_ptr must have n_rows+1 entries from 0 to nnz")
        if np.any(np.diff(rp) < 0):
            raise ParseError("row_ptr must be nondecreasing")
        if len(va) != len(ci):
            raise ParseError("col_idx and values differ in length")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ParseError("column index out of range")
        rows = np.repeat(np.arange(self.n_rows), np.diff(rp))
        same_row = rows[1:] == rows[:-1]
        if np.any(ci[1:][same_row] <= ci[:-1][same_row]):
            raise ParseError("column indices must increase strictly within a row")
        for a in (rp, ci, va, rows):
            a.flags.writeable = False
        object.__setattr__(self, "row_ptr", rp)
        object.__setattr__(self, "col_idx", ci)
        object.__setattr__(self, "values", va)
        object.__setattr__(self, "_rows", rows)

    @property
    def nnz(self):
        return len(self.values)

    def matvec(self, c):
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (self.n_cols,):
            raise LengthMismatch(f"blendweights have shape {c.shape}, expected ({self.n_cols},)")
        return np.bincount(self._rows, weights=self.values * c[self.col_idx],
                           minlength=self.n_rows)

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float32)
        out[self._rows, self.col_idx] = self.values
        return out


def build_csr(theta):
    """CSR view of an (S, P, 6) parameter array; values are stored in float32."""
    theta = np.asarray(theta)
    s, p, _ = theta.shape
    dense = theta.transpose(1, 2, 0).reshape(6 * p, s).astype(np.float32)
    rows, cols = np.nonzero(dense)
    counts = np.bincount(rows, minlength=6 * p)
    row_ptr = np.concatenate([[0], np.cumsum(counts)])
    return CSRMatrix(6 * p, s, row_ptr, cols, dense[rows, cols])


def csr_to_theta(csr):
    """Inverse of :func:`build_csr`: the (S, P, 6) array."""
    p = csr.n_rows // 6
    return csr.to_dense().reshape(p, 6, csr.n_cols).transpose(2, 0, 1)


def blend_transforms(csr, c):
    """Skinning matrices ``M_j = I + hat(theta_j . c)`` for all bones, shape (P, 3, 4)."""
    params = csr.matvec(c).reshape(-1, 6)
    return IDENTITY34 + hat(params)


def apply_lbs(weight_indices, weight_values, M, rest):
    """Linear blend skinning of the rest pose with per-vertex sparse weights."""
    weight_indices = np.asarray(weight_indices)
    M = np.asarray(M)
    if weight_indices.size and (weight_indices.min() < 0 or weight_indices.max() >= len(M)):
        raise IndexOutOfRange(f"weight index outside [0, {len(M)})")
    blended = np.einsum("nk,nkab->nab", weight_values, M[weight_indices])
    return np.einsum("nab,nb->na", blended[..., :3], rest) + blended[..., 3]


def play(decomp, frames):
    """Deform the rest pose for every blendweight vector in ``frames``.

    Returns:
        Array of shape (T, N, 3).
    """
    csr = build_csr(decomp.theta)
    out = []
    for c in frames:
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (decomp.n_shapes,):
            raise LengthMismatch(f"frame has {c.size} blendweights, expected {decomp.n_shapes}")
        M = blend_transforms(csr, c)
        out.append(apply_lbs(decomp.weight_indices, decomp.weight_values, M, decomp.rest))
    return np.array(out).reshape(-1, decomp.n_vertices, 3)


@dataclass(frozen=True)
class MemoryReport:
    sparse_bytes: int
    dense_bytes: int

    @property
    def ratio(self):
        return self.dense_bytes / self.sparse_bytes


def memory_for(bones, shapes, nnz):
    """Byte counts of float32 dense storage vs. CSR with 32-bit indices."""
    return MemoryReport(sparse_bytes=4 * nnz + 4 * nnz + 4 * (6 * bones + 1),
                        dense_bytes=6 * bones * shapes * 4)


def memory_report(decomp):
    return memory_for(decomp.n_bones, decomp.n_shapes, build_csr(decomp.theta).nnz)


def sparsify_dense(theta, t_thresh, r_thresh):
    """Zero each rotation / translation 3-vector whose norm is below its threshold.

    ``t_thresh`` is in model length units, ``r_thresh`` in radians.
    """
    if t_thresh < 0 or r_thresh < 0:
        raise ValueError("thresholds must be non-negative")
    out = np.array(theta, dtype=np.float64)
    r = out[..., :3]
    t = out[..., 3:]
    r[np.linalg.norm(r, axis=-1) < r_thresh] = 0.0
    t[np.linalg.norm(t, axis=-1) < t_thresh] = 0.0
    return out


@dataclass(frozen=True)
class BenchReport:
    """Per-frame FLOP counts and best-of wall-clock times (seconds per frame)."""

    sparse_flops: int
    dense_flops: int
    sparse_time: float
    dense_time: float

    @property
    def flop_ratio(self):
        return self.dense_flops / self.sparse_flops if self.sparse_flops else float("inf")

    @property
    def speedup(self):
        return self.dense_time / self.sparse_time if self.sparse_time else float("inf")


def bench_blend(decomp, frames, repetitions):
    """Time the transform-blending step with CSR storage against a dense matrix."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    frames = np.asarray(frames, dtype=np.float64).reshape(-1, decomp.n_shapes)
    if len(frames) == 0:
        raise ValueError("need at least one frame")
    csr = build_csr(decomp.theta)
    dense = csr.to_dense()
    frames32 = frames.astype(np.float32)

    def best(fn, data):
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            for c in data:
                fn(c)
            times.append(time.perf_counter() - t0)
        return min(times) / len(data)

    sparse_time = best(csr.matvec, frames)
    dense_time = best(dense.dot, frames32)
    return BenchReport(sparse_flops=2 * csr.nnz, dense_flops=2 * dense.size,
                       sparse_time=sparse_time, dense_time=dense_time)


def _f32(a):
    """Nested lists of the shortest decimals that round-trip through float32."""
    a = np.asarray(a, dtype=np.float32)
    return np.array([float(str(x)) for x in a.ravel()], dtype=object).reshape(a.shape).tolist()


def save_decomposition(path, decomp):
    """Write a ``.csd`` file (JSON, float32 values, CSR transforms)."""
    csr = build_csr(decomp.theta)
    keep = decomp.weight_values != 0
    indices = [row[m].tolist() for row, m in zip(decomp.weight_indices, keep)]
    values = [_f32(row[m]) for row, m in zip(decomp.weight_values, keep)]
    doc = {
        "version": FORMAT_VERSION,
        "N": decomp.n_vertices,
        "S": decomp.n_shapes,
        "P": decomp.n_bones,
        "K": decomp.max_influences,
        "rest": _f32(decomp.rest),
        "weights": {"indices": indices, "values": values},
        "theta_csr": {
            "row_ptr": csr.row_ptr.tolist(),
            "col_idx": csr.col_idx.tolist(),
            "values": _f32(csr.values),
        },
        "param_order": " ".join(PARAM_ORDER),
    }
    if decomp.unit is not None:
        doc["unit"] = decomp.unit
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_decomposition(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"decomposition not found: {path}")
    try:
        doc = json.loads(path.read_text())
        if doc.get("version") != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported version {doc.get('version')!r}")
        if doc.get("param_order", " ".join(PARAM_ORDER)) != " ".join(PARAM_ORDER):
            raise ParseError(f"{path}: unsupported param_order {doc['param_order']!r}")
        n, s, p, k = (int(doc[key]) for key in ("N", "S", "P", "K"))
        rest = np.asarray(doc["rest"], dtype=np.float32).reshape(n, 3)
        w_idx = doc["weights"]["indices"]
        w_val = doc["weights"]["values"]
        tc = doc["theta_csr"]
        csr = CSRMatrix(6 * p, s, tc["row_ptr"], tc["col_idx"], tc["values"])
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ParseError):
            raise
        raise ParseError(f"{path}: {e}") from None
    if len(w_idx) != n or len(w_val) != n:
        raise ParseError(f"{path}: weights must have one row per vertex")
    indices = np.zeros((n, k), dtype=np.int64)
    values = np.zeros((n, k))
    for i, (ji, wi) in enumerate(zip(w_idx, w_val)):
        if len(ji) != len(wi) or len(ji) > k:
            raise ParseError(f"{path}: bad weight row {i}")
        indices[i, :len(ji)] = ji
        values[i, :len(wi)] = np.asarray(wi, dtype=np.float32)
    if indices.size and (indices.min() < 0 or indices.max() >= p):
        raise ParseError(f"{path}: weight index out of range")
    return Decomposition(rest, indices, values, csr_to_theta(csr), unit=doc.get("unit"))

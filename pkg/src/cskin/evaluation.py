"""Error metrics, histograms and a synthetic blendshape fixture."""
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .decomposer import Decomposition, predict_deltas, project_weights, residual
from .errors import DimensionMismatch
from .model_io import BlendshapeModel, UNIT_TO_MM, edges_from_faces, write_manifest, write_obj

HIST_BINS = 64


@dataclass(frozen=True, eq=False)
class ErrorStats:
    """Mean / max residual norm in millimeters plus a histogram of all norms (mm)."""

    mae: float
    mxe: float
    bin_edges: np.ndarray
    counts: np.ndarray


def error_norms(model, decomp):
    """Residual norm of every (shape, vertex) pair, in model units, shape (S, N)."""
    if decomp.n_vertices != model.n_vertices or decomp.n_shapes != model.n_shapes:
        raise DimensionMismatch(
            f"decomposition is N={decomp.n_vertices}, S={decomp.n_shapes}; "
            f"model is N={model.n_vertices}, S={model.n_shapes}")
    return np.linalg.norm(residual(model, decomp.dense_weights(), decomp.theta), axis=-1)


def evaluate(model, decomp):
    e = error_norms(model, decomp).ravel() * model.unit_scale_to_mm
    mae = float(np.mean(e))
    mxe = float(np.max(e))
    edges = np.linspace(0.0, mxe, HIST_BINS + 1)
    if mxe > 0:
        counts, _ = np.histogram(e, bins=edges)
    else:
        counts = np.zeros(HIST_BINS, dtype=np.int64)
        counts[0] = e.size
    return ErrorStats(mae, mxe, edges, counts)


def write_histogram(path, stats):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, n in zip(stats.bin_edges[:-1], stats.bin_edges[1:], stats.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(n)])


def synth_mesh(n, radius=10.0):
    """A closed, mildly deformed sphere with ``n`` vertices, roughly head-sized.

    Returns:
        (vertices, faces) with triangle faces as index tuples.
    """
    if n < 4:
        raise ValueError("need at least 4 vertices")
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    unit = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    faces = [tuple(int(v) for v in f) for f in ConvexHull(unit).simplices]
    bump = 1.0 + 0.08 * np.sin(3.0 * phi) * rho + 0.05 * z * z
    verts = unit * bump[:, None] * np.array([0.8, 0.9, 1.0]) * radius
    return verts, faces


def synth_blendshapes(seed, n, s, bones, influences, nnz, radius=10.0,
                      rot_scale=0.15, trans_scale=None, unit="cm"):
    """Blendshapes generated exactly by a known sparse skinning decomposition.

    Weights fall off smoothly from randomly placed bone centers and are
    projected to ``influences`` per vertex. Exactly ``nnz`` transform
    parameters are non-zero; rotations have magnitude in
    ``[0.3, 1] * rot_scale`` radians, translations in ``[0.3, 1] * trans_scale``.

    Returns:
        (model, ground_truth) where the model's deltas are the ground truth's
        skinned deltas, so its residual is identically zero.
    """
    if not 1 <= influences <= bones:
        raise ValueError("influences must be in [1, bones]")
    if not 0 <= nnz <= s * bones * 6:
        raise ValueError("nnz must be in [0, 6 * S * bones]")
    if trans_scale is None:
        trans_scale = 0.15 * radius
    rng = np.random.default_rng(seed)
    rest, faces = synth_mesh(n, radius)

    centers = rest[rng.choice(n, size=bones, replace=bones > n)]
    d2 = np.sum((rest[:, None] - centers[None]) ** 2, axis=-1)
    W = project_weights(np.exp(-d2 / (2.0 * (0.5 * radius) ** 2)), influences)

    theta = np.zeros(s * bones * 6)
    pos = rng.choice(theta.size, size=nnz, replace=False)
    mag = rng.uniform(0.3, 1.0, size=nnz) * rng.choice([-1.0, 1.0], size=nnz)
    is_rot = (pos % 6) < 3
    theta[pos] = mag * np.where(is_rot, rot_scale, trans_scale)
    theta = theta.reshape(s, bones, 6)

    deltas = predict_deltas(rest, W, theta)
    model = BlendshapeModel(rest, deltas, edges_from_faces(faces), UNIT_TO_MM[unit])
    truth = Decomposition.from_dense(rest, W, theta, influences, unit=unit)
    return model, truth


def add_local_detail(model, seed, amplitude=0.3, width=1.5):
    """Add one small Gaussian bump per shape, like a wrinkle.

    Bumps are centered on random vertices and pushed in a random direction,
    so the result is generally not reproducible by skinning.
    """
    rng = np.random.default_rng(seed)
    deltas = model.deltas.copy()
    for k in range(model.n_shapes):
        center = model.rest[rng.integers(model.n_vertices)]
        r2 = np.sum((model.rest - center) ** 2, axis=1)
        deltas[k] += amplitude * np.exp(-r2 / (2.0 * width ** 2))[:, None] * rng.normal(size=3)
    return BlendshapeModel(model.rest, deltas, model.edges, model.unit_scale_to_mm)


def random_animation(seed, frames, shapes, low=-0.5, high=1.5):
    """Random blendweights, deliberately reaching outside [0, 1]."""
    return np.random.default_rng(seed).uniform(low, high, size=(frames, shapes))


def write_animation(path, frames):
    np.savetxt(path, np.atleast_2d(frames), delimiter=",", fmt="%.9g")


def read_animation(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))


def write_blendshape_set(outdir, model, faces, unit="mm"):
    """Write rest/shape OBJ files plus ``manifest.json``; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rest_path = outdir / "rest.obj"
    write_obj(rest_path, model.rest, faces)
    shape_paths = []
    for k, shape in enumerate(model.shapes()):
        p = outdir / f"shape_{k:03d}.obj"
        write_obj(p, shape, faces)
        shape_paths.append(p)
    manifest = outdir / "manifest.json"
    write_manifest(manifest, rest_path, shape_paths, unit)
    return manifest

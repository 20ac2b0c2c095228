"""Write a small blendshape set to disk, load it back and look at the deltas."""
import tempfile
from pathlib import Path

import numpy as np

from cskin.evaluation import synth_blendshapes, synth_mesh, write_blendshape_set
from cskin.model_io import load_manifest, load_blendshape_set

# a head-sized sphere (radius 10 cm) with 8 expressions driven by 4 hidden bones
model, truth = synth_blendshapes(seed=0, n=200, s=8, bones=4, influences=2, nnz=48)
_, faces = synth_mesh(200)

workdir = Path(tempfile.mkdtemp())
manifest_path = write_blendshape_set(workdir, model, faces, unit="cm")
print("manifest:", manifest_path.read_text())

manifest = load_manifest(manifest_path)
loaded = load_blendshape_set(manifest)
print("N =", loaded.n_vertices, " S =", loaded.n_shapes, " unit scale to mm =",
      loaded.unit_scale_to_mm)
print("edges from faces:", len(loaded.edges))

# OBJ text keeps full float precision
print("max round-trip error:", np.abs(loaded.deltas - model.deltas).max())

# how far each expression moves the face, in mm
moves = np.linalg.norm(loaded.deltas, axis=-1) * loaded.unit_scale_to_mm
for k, m in enumerate(moves):
    print(f"shape {k}: mean {m.mean():6.2f} mm  max {m.max():6.2f} mm")

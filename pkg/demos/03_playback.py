"""Runtime playback: blend sparse transforms, skin, compare with delta blending."""
import numpy as np

from cskin.evaluation import random_animation, synth_blendshapes
from cskin.runtime import blend_transforms, build_csr, play

model, truth = synth_blendshapes(seed=1, n=200, s=8, bones=4, influences=2, nnz=48)

# transforms live in a (6P x S) CSR matrix; row 6j+d is parameter d of bone j
csr = build_csr(truth.theta)
print("CSR rows", csr.n_rows, "cols", csr.n_cols, "nnz", csr.nnz)
print("row_ptr", csr.row_ptr.tolist())

# one frame: a single sparse matvec then one 3x4 matrix per bone
c = np.zeros(8)
c[2] = 1.0
M = blend_transforms(csr, c)
print("bone 0 matrix for shape 2 alone:\n", M[0].round(4))

# weights outside [0, 1] are fine; the map from blendweights to poses stays linear
frames = random_animation(seed=0, frames=100, shapes=8)
poses = play(truth, frames)
direct = model.rest + np.einsum("tk,knd->tnd", frames, model.deltas)
err = np.linalg.norm(poses - direct, axis=-1).max()
print("max |skinned - blended| = %.2e cm (diag %.1f cm)" % (err, model.bbox_diagonal()))

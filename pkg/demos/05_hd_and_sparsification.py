"""High-p fitting for max error, and why a transform budget beats post-hoc thresholds."""
import dataclasses

import numpy as np

from cskin import SolverConfig, decompose, evaluate
from cskin.evaluation import add_local_detail, synth_blendshapes
from cskin.runtime import sparsify_dense

model, truth = synth_blendshapes(seed=0, n=200, s=8, bones=4, influences=2, nnz=48)

# add small local bumps that skinning can't represent exactly, like wrinkles
wrinkly = add_local_detail(model, seed=5)

# p=12 converges slowly; at a few thousand iterations p=2 still wins on both metrics,
# so give both the full 20k (about half a minute)
iters = 20000
l2 = decompose(wrinkly, SolverConfig(bones=8, influences=4, nnz=None, lam=0.0, iterations=iters))
hd = decompose(wrinkly, SolverConfig.hd(bones=8, influences=4, iterations=iters))
for name, fit in (("p=2 ", l2), ("p=12", hd)):
    s = evaluate(wrinkly, fit)
    print("%s MAE %.3f mm  MXE %.3f mm" % (name, s.mae, s.mxe))
# p=12 trades mean error for max error

iters = 5000

# unbudgeted fit, then drop rotations under 1 degree and translations under 1 mm
dense = decompose(model, SolverConfig(bones=4, influences=2, nnz=None, iterations=iters, seed=1))
theta = sparsify_dense(dense.theta, t_thresh=1.0 / model.unit_scale_to_mm, r_thresh=np.deg2rad(1.0))
kept = int(np.count_nonzero(theta))
post_hoc = dataclasses.replace(dense, theta=theta)

# same nonzero count, but enforced during the optimization
budgeted = decompose(model, SolverConfig(bones=4, influences=2, nnz=kept, iterations=iters, seed=1))
print("nonzeros: dense %d, thresholded %d, budgeted %d" % (dense.nnz, kept, budgeted.nnz))
print("MAE thresholded %.3f mm vs budgeted %.3f mm" %
      (evaluate(model, post_hoc).mae, evaluate(model, budgeted).mae))
# motions here are centimeters, so few parameters fall under 1 mm / 1 degree and
# the gap is small; on this seed the budgeted fit comes out ahead, on others they
# tie, and with more bones the order can flip

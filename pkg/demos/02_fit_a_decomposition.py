"""Fit sparse skinning to blendshapes with projected Adam, watching the log."""
import io

import numpy as np

from cskin import SolverConfig, decompose, evaluate
from cskin.evaluation import synth_blendshapes

model, truth = synth_blendshapes(seed=0, n=200, s=8, bones=4, influences=2, nnz=48)
print("bbox diagonal %.2f cm" % model.bbox_diagonal())

# same capacity as the generator: 4 bones, 2 influences, 48 transform nonzeros
config = SolverConfig(bones=4, influences=2, nnz=48, iterations=2000, log_every=250)
log = io.StringIO()
fit = decompose(model, config, progress=log)
print(log.getvalue())

stats = evaluate(model, fit)
print("MAE %.3f mm   MXE %.3f mm" % (stats.mae, stats.mxe))
print("transform nonzeros:", fit.nnz, "of", fit.theta.size)

# weights are convex and sparse after every step
W = fit.dense_weights()
print("weights >= 0:", bool(np.all(W >= 0)),
      " rows sum to 1:", bool(np.allclose(W.sum(1), 1)),
      " max influences:", int((W > 0).sum(1).max()))

# the zero-transform decomposition for comparison: its error is just the deltas
zero_mae = np.linalg.norm(model.deltas, axis=-1).mean() * model.unit_scale_to_mm
print("doing nothing would give MAE %.3f mm" % zero_mae)

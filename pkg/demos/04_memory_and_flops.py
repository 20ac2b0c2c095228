"""What transform sparsity buys at runtime: bytes and multiply-adds per frame."""
import numpy as np

from cskin.decomposer import Decomposition
from cskin.evaluation import random_animation
from cskin.runtime import bench_blend, memory_for, memory_report

# 40 bones, 300 shapes, 6000 of 72000 parameters kept
r = memory_for(bones=40, shapes=300, nnz=6000)
print("dense %d B, sparse %d B, ratio %.2f" % (r.dense_bytes, r.sparse_bytes, r.ratio))

# index overhead means a fully dense pattern is worse in CSR
print("fully dense pattern ratio %.2f" % memory_for(40, 300, 72000).ratio)

for density in (0.05, 0.1, 0.2, 0.5):
    print("density %.2f -> ratio %.2f" % (density, memory_for(40, 300, int(density * 72000)).ratio))

# build a decomposition with exactly that pattern and time the blending step
rng = np.random.default_rng(0)
theta = np.zeros((300, 40, 6))
flat = theta.reshape(-1)
flat[rng.choice(flat.size, 6000, replace=False)] = rng.normal(size=6000)
decomp = Decomposition(np.zeros((1, 3)), np.zeros((1, 1), int), np.ones((1, 1)), theta)
print(memory_report(decomp))

bench = bench_blend(decomp, random_animation(0, 200, 300), repetitions=5)
print("FLOPs/frame sparse %d dense %d ratio %.1f" %
      (bench.sparse_flops, bench.dense_flops, bench.flop_ratio))
# numpy gather+bincount against one BLAS call: timings reflect numpy overheads, not the FLOP count
print("time/frame sparse %.1f us dense %.1f us" % (bench.sparse_time * 1e6, bench.dense_time * 1e6))

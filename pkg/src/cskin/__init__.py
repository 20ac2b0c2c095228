"""Compressed skinning: sparse linear blend skinning decompositions of facial blendshapes."""
from .decomposer import (
    AdamState,
    Decomposition,
    SolverConfig,
    adam_step,
    decompose,
    loss,
    loss_gradient,
    project_transforms,
    project_weights,
    residual,
)
from .evaluation import ErrorStats, evaluate, synth_blendshapes, synth_mesh
from .model_io import BlendshapeModel, ShapeManifest, load_blendshape_set, load_manifest, load_model
from .runtime import (
    CSRMatrix,
    apply_lbs,
    bench_blend,
    blend_transforms,
    build_csr,
    load_decomposition,
    memory_report,
    play,
    save_decomposition,
    sparsify_dense,
)
from .transforms import blend_to_transform, hat

__version__ = "0.1.0"

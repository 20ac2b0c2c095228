"""Command line front end: ``cskin <subcommand> ...``."""
import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .decomposer import SolverConfig, decompose
from .errors import CskinError, DimensionMismatch
from .evaluation import (evaluate, random_animation, read_animation, synth_blendshapes,
                         synth_mesh, write_animation, write_blendshape_set, write_histogram)
from .model_io import UNIT_TO_MM, load_blendshape_set, load_manifest, read_obj, write_obj
from .runtime import (bench_blend, build_csr, load_decomposition, memory_report, play,
                      save_decomposition, sparsify_dense)


_UNSET = object()


def _nnz(text):
    if text.lower() in ("none", "all", "inf"):
        return None
    return int(text)


def cmd_decompose(args, out):
    manifest = load_manifest(args.manifest)
    model = load_blendshape_set(manifest)
    overrides = {k: v for k, v in dict(
        bones=args.bones, influences=args.influences, p=args.p, lam=args.lam,
        iterations=args.iters, seed=args.seed, lr=args.lr, log_every=args.log_every).items()
        if v is not None}
    if args.nnz is not _UNSET:
        overrides["nnz"] = args.nnz
    config = SolverConfig.hd(**overrides) if args.hd else SolverConfig(**overrides)
    log = open(args.log, "w") if args.log else None
    try:
        decomp = decompose(model, config, progress=log)
    finally:
        if log:
            log.close()
    decomp = dataclasses.replace(decomp, unit=manifest.unit)
    save_decomposition(args.output, decomp)
    stats = evaluate(model, decomp)
    print(f"wrote {args.output}: P={decomp.n_bones} K={decomp.max_influences} "
          f"nnz={decomp.nnz}", file=out)
    print(f"MAE {stats.mae:.6g} mm  MXE {stats.mxe:.6g} mm", file=out)


def cmd_evaluate(args, out):
    model = load_blendshape_set(load_manifest(args.manifest))
    stats = evaluate(model, load_decomposition(args.csd))
    print(f"MAE {stats.mae:.6g} mm", file=out)
    print(f"MXE {stats.mxe:.6g} mm", file=out)
    if args.hist:
        write_histogram(args.hist, stats)
        print(f"wrote histogram {args.hist}", file=out)


def cmd_play(args, out):
    decomp = load_decomposition(args.csd)
    frames = read_animation(args.anim)
    if frames.shape[1] != decomp.n_shapes:
        raise DimensionMismatch(
            f"{args.anim} has {frames.shape[1]} blendweights per frame, expected {decomp.n_shapes}")
    faces = read_obj(args.mesh)[1] if args.mesh else ()
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    poses = play(decomp, frames)
    for t, pose in enumerate(poses):
        if args.format == "obj":
            write_obj(outdir / f"frame_{t:05d}.obj", pose, faces)
        else:
            np.savetxt(outdir / f"frame_{t:05d}.csv", pose, delimiter=",", fmt="%.9g")
    print(f"wrote {len(poses)} frames to {outdir}", file=out)


def cmd_sparsify(args, out):
    decomp = load_decomposition(args.csd)
    unit = args.unit or decomp.unit or "mm"
    t_model = args.t_thresh / UNIT_TO_MM[unit]
    theta = sparsify_dense(decomp.theta, t_model, np.deg2rad(args.r_thresh))
    result = dataclasses.replace(decomp, theta=theta)
    save_decomposition(args.output, result)
    before, after = build_csr(decomp.theta).nnz, build_csr(theta).nnz
    print(f"nnz {before} -> {after}; wrote {args.output}", file=out)


def cmd_report_memory(args, out):
    decomp = load_decomposition(args.csd)
    r = memory_report(decomp)
    print(f"bones {decomp.n_bones}  shapes {decomp.n_shapes}  nnz {build_csr(decomp.theta).nnz}",
          file=out)
    print(f"dense {r.dense_bytes} B", file=out)
    print(f"sparse {r.sparse_bytes} B", file=out)
    print(f"ratio {r.ratio:.4f}", file=out)


def cmd_bench(args, out):
    decomp = load_decomposition(args.csd)
    frames = read_animation(args.anim)
    if frames.shape[1] != decomp.n_shapes:
        raise DimensionMismatch(
            f"{args.anim} has {frames.shape[1]} blendweights per frame, expected {decomp.n_shapes}")
    r = bench_blend(decomp, frames, args.reps)
    print(f"flops/frame sparse {r.sparse_flops} dense {r.dense_flops} "
          f"ratio {r.flop_ratio:.4f}", file=out)
    print(f"time/frame sparse {r.sparse_time * 1e6:.3f} us dense {r.dense_time * 1e6:.3f} us "
          f"speedup {r.speedup:.3f}", file=out)


def cmd_synth(args, out):
    model, truth = synth_blendshapes(args.seed, args.n, args.s, args.bones, args.influences,
                                     args.nnz, unit=args.unit)
    _, faces = synth_mesh(args.n)
    manifest = write_blendshape_set(args.output, model, faces, unit=args.unit)
    outdir = Path(args.output)
    save_decomposition(outdir / "truth.csd", truth)
    if args.frames:
        write_animation(outdir / "anim.csv", random_animation(args.seed, args.frames, args.s))
    print(f"wrote {manifest}", file=out)


def build_parser():
    ap = argparse.ArgumentParser(prog="cskin", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="fit a sparse skinning decomposition")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--bones", type=int)
    p.add_argument("--influences", type=int)
    p.add_argument("--nnz", type=_nnz, default=_UNSET,
                   help="transform nonzero budget; 'none' for unbounded")
    p.add_argument("--p", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hd", action="store_true", help="p=12, K=32, no transform budget, lambda=0")
    p.add_argument("--log", help="write iteration,loss,mae,mxe CSV here")
    p.add_argument("--log-every", type=int)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("evaluate", help="MAE / MXE of a decomposition in mm")
    p.add_argument("manifest")
    p.add_argument("csd")
    p.add_argument("--hist", help="write a 64-bin error histogram CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("play", help="deform the rest pose for every animation frame")
    p.add_argument("csd")
    p.add_argument("anim")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=("obj", "csv"), default="obj")
    p.add_argument("--mesh", help="OBJ whose faces are copied into output frames")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("sparsify", help="zero small rotations / translations")
    p.add_argument("csd")
    p.add_argument("--t-thresh", type=float, required=True, help="translation threshold, mm")
    p.add_argument("--r-thresh", type=float, required=True, help="rotation threshold, degrees")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--unit", choices=sorted(UNIT_TO_MM),
                   help="model unit, if the .csd does not record one")
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("report-memory", help="dense vs. CSR transform storage")
    p.add_argument("csd")
    p.set_defaults(func=cmd_report_memory)

    p = sub.add_parser("bench", help="time sparse vs. dense transform blending")
    p.add_argument("csd")
    p.add_argument("anim")
    p.add_argument("--reps", type=int, default=10)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic blendshape set with known ground truth")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--s", type=int, default=8)
    p.add_argument("--bones", type=int, default=4)
    p.add_argument("--influences", type=int, default=2)
    p.add_argument("--nnz", type=int, default=48)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unit", choices=sorted(UNIT_TO_MM), default="cm")
    p.add_argument("--frames", type=int, default=0, help="also write anim.csv with this many frames")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except (CskinError, OSError, ValueError) as e:
        print(f"cskin {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

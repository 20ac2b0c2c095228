import json

import numpy as np
import pytest

from cskin.decomposer import Decomposition
from cskin.errors import IndexOutOfRange, LengthMismatch, MissingFile, ParseError
from cskin.evaluation import random_animation, synth_blendshapes
from cskin.runtime import (CSRMatrix, apply_lbs, bench_blend, blend_transforms, build_csr,
                           csr_to_theta, load_decomposition, memory_for, memory_report, play,
                           save_decomposition, sparsify_dense)

from oracles import blendshape_eval, dense_lbs_loop


def sparse_theta(rng, s, p, density=0.2):
    theta = rng.normal(size=(s, p, 6))
    theta[rng.random(theta.shape) > density] = 0.0
    return theta


# CSR

def test_csr_empty():
    csr = build_csr(np.zeros((3, 2, 6)))
    assert csr.n_rows == 12 and csr.n_cols == 3
    np.testing.assert_array_equal(csr.row_ptr, 0)
    assert csr.nnz == 0


def test_csr_single_entry_row_layout():
    theta = np.zeros((3, 2, 6))
    theta[2, 1, 3] = 0.5
    csr = build_csr(theta)
    assert csr.nnz == 1
    assert csr.col_idx.tolist() == [2]
    assert np.diff(csr.row_ptr).tolist() == [0] * 9 + [1, 0, 0]
    assert csr.values.tolist() == [0.5]
    assert csr.row_ptr.dtype == np.int32 and csr.values.dtype == np.float32


def test_csr_round_trip(rng):
    theta = sparse_theta(rng, 5, 4).astype(np.float32)
    np.testing.assert_array_equal(csr_to_theta(build_csr(theta)), theta)


def test_csr_matvec_example():
    csr = CSRMatrix(6, 2, [0, 1, 2, 2, 2, 2, 2], [0, 1], [0.5, -1.0])
    np.testing.assert_array_equal(csr.matvec([1.0, 2.0]), [0.5, -2.0, 0, 0, 0, 0])


def test_csr_matvec_matches_dense(rng):
    theta = sparse_theta(rng, 7, 5)
    csr = build_csr(theta)
    dense = csr.to_dense().astype(np.float64)
    for _ in range(10):
        c = rng.uniform(-0.5, 1.5, size=7)
        np.testing.assert_allclose(csr.matvec(c), dense @ c, rtol=0, atol=1e-6)
    with pytest.raises(LengthMismatch):
        csr.matvec(np.zeros(6))


def test_csr_validation():
    with pytest.raises(ParseError):
        CSRMatrix(2, 2, [0, 1], [0], [1.0])
    with pytest.raises(ParseError):
        CSRMatrix(2, 2, [0, 2, 1], [0, 1], [1.0, 1.0])
    with pytest.raises(ParseError):
        CSRMatrix(1, 2, [0, 1], [2], [1.0])
    with pytest.raises(ParseError):
        CSRMatrix(1, 3, [0, 2], [1, 1], [1.0, 1.0])


# blending and skinning

def test_blend_transforms_zero_is_identity(rng):
    M = blend_transforms(build_csr(sparse_theta(rng, 3, 4)), np.zeros(3))
    np.testing.assert_array_equal(M, np.broadcast_to(np.eye(3, 4), (4, 3, 4)))


def test_apply_lbs_examples():
    rest = np.array([[1.0, 2.0, 3.0], [-1.0, 0.0, 0.5]])
    idx = np.array([[0, 1], [1, 0]])
    val = np.array([[0.25, 0.75], [1.0, 0.0]])
    M = np.stack([np.eye(3, 4), np.eye(3, 4)])
    np.testing.assert_allclose(apply_lbs(idx, val, M, rest), rest, atol=1e-15)
    M[1, 0, 3] = 1.0
    out = apply_lbs(idx, val, M, rest)
    np.testing.assert_allclose(out[1], rest[1] + [1.0, 0, 0])
    np.testing.assert_allclose(out[0], rest[0] + [0.75, 0, 0])
    with pytest.raises(IndexOutOfRange):
        apply_lbs(idx + 1, val, M, rest)


def test_apply_lbs_matches_loop(rng):
    n, P, K = 9, 5, 3
    rest = rng.normal(size=(n, 3))
    idx = np.stack([rng.choice(P, K, replace=False) for _ in range(n)])
    val = rng.dirichlet(np.ones(K), size=n)
    M = rng.normal(size=(P, 3, 4))
    W = np.zeros((n, P))
    np.put_along_axis(W, idx, val, axis=1)
    np.testing.assert_allclose(apply_lbs(idx, val, M, rest), dense_lbs_loop(W, M, rest), atol=1e-12)


def test_play_examples(rng):
    model, truth = synth_blendshapes(1, 60, 4, 3, 2, 20)
    np.testing.assert_allclose(play(truth, [np.zeros(4)])[0], truth.rest, atol=1e-12)
    with pytest.raises(LengthMismatch):
        play(truth, [np.zeros(3)])


def test_play_equals_blendshapes():
    model, truth = synth_blendshapes(2, 120, 6, 4, 2, 40)
    frames = random_animation(5, 100, 6)
    diag = model.bbox_diagonal()
    poses = play(truth, frames)
    for c, pose in zip(frames, poses):
        ref = blendshape_eval(model.rest, model.deltas, c)
        assert np.max(np.linalg.norm(pose - ref, axis=1)) <= 1e-5 * diag


# memory / FLOPs

def test_memory_examples():
    r = memory_for(40, 300, 6000)
    assert r.dense_bytes == 288000
    assert r.sparse_bytes == 6000 * 4 + 6000 * 4 + 241 * 4 == 48964
    assert r.ratio == pytest.approx(5.88, abs=0.005)
    assert memory_for(40, 300, 6 * 40 * 300).ratio < 1
    assert memory_for(40, 300, 0).sparse_bytes == 4 * 241


def test_memory_report_counts_nonzeros(rng):
    theta = sparse_theta(rng, 6, 3)
    d = Decomposition(np.zeros((2, 3)), np.zeros((2, 1), int), np.ones((2, 1)), theta)
    assert memory_report(d) == memory_for(3, 6, int(np.count_nonzero(theta)))


def test_bench_flop_ratio(rng):
    theta = np.zeros((300, 40, 6))
    flat = theta.reshape(-1)
    flat[rng.choice(flat.size, 6000, replace=False)] = rng.uniform(0.1, 1, 6000)
    d = Decomposition(np.zeros((1, 3)), np.zeros((1, 1), int), np.ones((1, 1)), theta)
    r = bench_blend(d, random_animation(0, 3, 300), repetitions=2)
    assert (r.dense_flops, r.sparse_flops) == (144000, 12000)
    assert r.flop_ratio == 12.0
    assert r.sparse_time > 0 and r.dense_time > 0
    full = Decomposition(np.zeros((1, 3)), np.zeros((1, 1), int), np.ones((1, 1)),
                         rng.uniform(0.1, 1, (4, 2, 6)))
    assert bench_blend(full, np.ones((1, 4)), 1).flop_ratio == 1.0
    with pytest.raises(ValueError):
        bench_blend(d, random_animation(0, 3, 300), repetitions=0)


# sparsification

def test_sparsify_examples():
    theta = np.zeros((1, 1, 6))
    theta[0, 0, :3] = [0.01, 0, 0]
    theta[0, 0, 3:] = [0.05, 0, 0]
    out = sparsify_dense(theta, t_thresh=0.1, r_thresh=np.deg2rad(1.0))
    np.testing.assert_array_equal(out, 0.0)
    assert np.deg2rad(1.0) == pytest.approx(0.017453, abs=1e-6)


def test_sparsify_keeps_large_and_zero_thresholds(rng):
    theta = rng.normal(size=(3, 4, 6))
    np.testing.assert_array_equal(sparsify_dense(theta, 0.0, 0.0), theta)
    out = sparsify_dense(theta, 0.8, 0.8)
    assert np.count_nonzero(out) <= np.count_nonzero(theta)
    r_kept = np.linalg.norm(theta[..., :3], axis=-1) >= 0.8
    np.testing.assert_array_equal(out[..., :3][r_kept], theta[..., :3][r_kept])
    with pytest.raises(ValueError):
        sparsify_dense(theta, -1.0, 0.0)


# file format

def test_csd_round_trip(tmp_path):
    _, truth = synth_blendshapes(3, 40, 3, 3, 2, 15)
    path = tmp_path / "t.csd"
    save_decomposition(path, truth)
    back = load_decomposition(path)
    assert back.unit == "cm"
    np.testing.assert_array_equal(back.theta, truth.theta.astype(np.float32))
    np.testing.assert_array_equal(back.dense_weights(), truth.dense_weights().astype(np.float32))
    np.testing.assert_array_equal(back.rest, truth.rest.astype(np.float32))
    save_decomposition(tmp_path / "u.csd", back)
    assert (tmp_path / "u.csd").read_bytes() == path.read_bytes()


def test_csd_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_decomposition(tmp_path / "missing.csd")
    bad = tmp_path / "bad.csd"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_decomposition(bad)
    _, truth = synth_blendshapes(3, 40, 3, 3, 2, 15)
    save_decomposition(bad, truth)
    doc = json.loads(bad.read_text())
    doc["weights"]["indices"][0][0] = 7
    bad.write_text(json.dumps(doc))
    with pytest.raises(ParseError):
        load_decomposition(bad)
    doc["version"] = 99
    bad.write_text(json.dumps(doc))
    with pytest.raises(ParseError):
        load_decomposition(bad)

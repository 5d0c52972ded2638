"""g-vector laws, leaf similarity, tilde quasiaffinity, direct-sum splitting."""

import math

import numpy as np
import pytest

from treeshift.cyclicity import ge_rank, krylov_rank
from treeshift.errors import NotAContraction, ShapeMismatch
from treeshift.shifts import ShiftOperator
from treeshift.similarity import (
    build_leaf_similarity,
    build_tilde_quasiaffinity,
    direct_sum_decomposition,
    g_norm,
    g_vector,
    ratio_bounded,
)
from treeshift.sparse import SparseVector
from treeshift.trees import make_family, materialize_window
from treeshift.weights import (
    ConstantWeights,
    HashRandomWeights,
    MapWeights,
    RayWeights,
    WeightAssignment,
)


def random_tilde_operator(seed):
    """Contractive random weights near the branch, unit padding beyond."""
    base = HashRandomWeights(seed, 0.55, 0.95)
    model = make_family("tilde")
    values = {}
    for k in range(1, 13):
        values[str(k)] = base.weight(model, str(k))
        values[f"{k}'"] = base.weight(model, f"{k}'")
    for k in range(0, -13, -1):
        values[str(k)] = base.weight(model, str(k))
    scale = math.hypot(values["1"], values["1'"])
    values["1"] *= 0.999 / scale
    values["1'"] *= 0.999 / scale
    return ShiftOperator(model, MapWeights(values, default=1.0))


# -- g vectors -----------------------------------------------------------------------

def test_g_vector_laws_random_families():
    for seed in range(6):
        op = random_tilde_operator(seed)
        for k in range(2, 9):
            assert (op.apply_adjoint(g_vector(op, k)) - g_vector(op, k - 1)).norm() <= 1e-12
        assert op.apply_adjoint(g_vector(op, 1)).norm() <= 1e-12
        for k in range(1, 8):
            for l in range(k + 1, 9):
                assert g_vector(op, k).dot(g_vector(op, l)) == 0.0


def test_g_norm_value():
    op = ShiftOperator(make_family("tilde"), ConstantWeights(1.0))
    assert g_norm(op, 4) == pytest.approx(math.sqrt(2.0))


# -- leaf similarity -------------------------------------------------------------------

def test_leaf_similarity_unit_weights():
    model = make_family("comb", {"primed_leaf": 2})
    op = ShiftOperator(model, ConstantWeights(1.0))
    window = materialize_window(model, -6, 6)
    witness = build_leaf_similarity(op, window)
    assert witness.residual <= 1e-12
    assert witness.target_primed_weights[2] == pytest.approx(1.0)
    assert witness.mode == "similar"


def test_leaf_similarity_lemma_values():
    model = make_family("comb", {"primed_leaf": 2, "unprimed_leaf": 4})
    op = ShiftOperator(model, RayWeights(spine=0.5, primed=1.0))
    window = materialize_window(model, -6, 4)
    witness = build_leaf_similarity(op, window)
    assert witness.residual <= 1e-12
    assert witness.target_primed_weights[2] == pytest.approx(math.sqrt(5.0 / 17.0))
    assert g_vector(op, 1).coeffs == {"1": pytest.approx(2.0), "1'": pytest.approx(-1.0)}
    assert g_vector(op, 2).coeffs == {"2": pytest.approx(4.0), "2'": pytest.approx(-1.0)}


def test_leaf_similarity_rejects_wrong_shape():
    op = ShiftOperator(make_family("bilateral-path"), ConstantWeights(0.5))
    window = materialize_window(op.model, -4, 4)
    with pytest.raises(ShapeMismatch):
        build_leaf_similarity(op, window)
    tilde_op = ShiftOperator(make_family("tilde"), ConstantWeights(0.5))
    with pytest.raises(ShapeMismatch):
        build_leaf_similarity(tilde_op, materialize_window(tilde_op.model, -4, 4))


def test_block_structure_invertible():
    model = make_family("comb", {"primed_leaf": 3})
    op = ShiftOperator(model, RayWeights(spine=0.6, primed=0.55))
    window = materialize_window(model, -5, 5)
    witness = build_leaf_similarity(op, window)
    for block in witness.blocks:
        assert abs(block["det"]) > 0.0
    x = witness.x_matrix()
    assert ge_rank(x) == len(window)  # full column rank: injective on the window
    assert np.linalg.cond(x) < 1e3


# -- ratio certificates ------------------------------------------------------------------

def test_ratio_equal_rays_bounded_at_one():
    op = ShiftOperator(make_family("tilde"), ConstantWeights(0.7))
    cert = ratio_bounded(op)
    assert cert.status == "bounded"
    assert cert.sup == pytest.approx(1.0)
    assert cert.exact


def test_ratio_unbounded_powers_of_two():
    op = ShiftOperator(make_family("tilde"), RayWeights(spine=0.5, primed=1.0))
    cert = ratio_bounded(op)
    assert cert.status == "unbounded-evidence"
    assert cert.value == pytest.approx(2.0 ** cert.at)


def test_ratio_decreasing_products_bounded():
    class PrimedExp(WeightAssignment):
        def weight(self, model, v):
            if v.endswith("'"):
                return math.exp(-(2.0 ** (-int(v[:-1]))))
            return 1.0

        def max_weight(self):
            return 1.0

    op = ShiftOperator(make_family("tilde"), PrimedExp())
    cert = ratio_bounded(op)
    assert cert.status == "bounded"
    assert cert.sup <= 1.0


# -- tilde quasiaffinity -------------------------------------------------------------------

def test_tilde_unit_weights_similar():
    op = ShiftOperator(make_family("tilde"),
                       RayWeights(spine=1.0, primed=1.0,
                                  branch_spine=1 / math.sqrt(2),
                                  branch_primed=1 / math.sqrt(2)))
    window = materialize_window(op.model, -6, 6)
    witness = build_tilde_quasiaffinity(op, window)
    assert witness.residual <= 1e-12
    assert witness.mode == "similar"
    # w_{k'} = |g_{k-1}| / |g_k|, all norms equalish for unit rays
    for k, w in witness.target_primed_weights.items():
        assert 0.0 < w <= 1.0 + 1e-12


def test_tilde_unbounded_ratio_quasiaffine_only():
    op = ShiftOperator(make_family("tilde"), RayWeights(spine=0.5, primed=0.85))
    window = materialize_window(op.model, -6, 6)
    witness = build_tilde_quasiaffinity(op, window)
    assert witness.mode == "quasiaffine-only"
    assert witness.residual <= 1e-12
    # the splitting degrades: coefficients m^{-3/2} placed where the product
    # ratio first exceeds m give a square-summable x whose spine part has
    # harmonically divergent mass
    def spine_to_input_ratio(stages):
        x = SparseVector()
        ratio, k, m = 1.0, 0, 1
        while m <= stages:
            k += 1
            ratio *= 0.85 / 0.5
            if ratio > m:
                x.coeffs[f"{k}'"] = m ** -1.5
                m += 1
        dec = direct_sum_decomposition(x, op)
        return sum(v * v for v in dec.nu.values()) / x.norm_sq()

    assert spine_to_input_ratio(4) > 3.0
    assert spine_to_input_ratio(16) > spine_to_input_ratio(4) * 1.5


def test_tilde_requires_contraction():
    op = ShiftOperator(make_family("tilde"), ConstantWeights(1.0))
    window = materialize_window(op.model, -5, 5)
    with pytest.raises(NotAContraction):
        build_tilde_quasiaffinity(op, window)


def test_witness_transfer_preserves_krylov_rank():
    for seed in (1, 2):
        op = random_tilde_operator(seed)
        window = materialize_window(op.model, -5, 5)
        witness = build_tilde_quasiaffinity(op, window)
        assert witness.mode == "similar"
        x_mat = witness.x_matrix()
        t_mat = witness.target_matrix()
        s_mat = witness.shift_matrix()
        assert np.linalg.norm(x_mat @ t_mat.T - s_mat.T @ x_mat) <= 1e-12
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(len(window))
        assert krylov_rank(t_mat.T, f) == krylov_rank(s_mat.T, x_mat @ f)


def test_two_leaf_shift_krylov_verified_cyclic():
    # the two-leaf shape is similar to a backward shift plus a nilpotent
    # block; composing the backward cyclic candidate (re-indexed onto the
    # spine) with the primed block's seed gives a window-verified cyclic
    # vector for the tree shift itself
    from treeshift.cyclicity import (BackwardShiftSpec, construct_backward_cyclic,
                                     verify_krylov_span)
    from treeshift.shifts import vector_to_dense
    from treeshift.trees import materialize_window

    j0, k0 = 3, 2
    model = make_family("comb", {"primed_leaf": k0, "unprimed_leaf": j0})
    base = HashRandomWeights(31, 0.6, 0.95)
    op = ShiftOperator(model, base)

    spine = BackwardShiftSpec(1, lambda j, m: base.weight(model, str(j0 - m)))
    cand = construct_backward_cyclic(spine, 12)
    deepest = max(k for _, k in cand.schedule)

    big = materialize_window(model, -(deepest + j0 + 2), j0, breadth=8)
    mat = op.dense_truncation(big)
    f = SparseVector({str(j0 - k): xi for (_, k), xi in zip(cand.schedule, cand.xi)})
    f.coeffs["1'"] = 1.0
    dense_f = vector_to_dense(big, f)

    report = [u for u in big.order if big.level_of(u) >= -40]
    rows = np.array([big.index_of(u) for u in report])
    n_cols = deepest + j0 + 1
    cols = np.empty((len(report), n_cols))
    y = dense_f.copy()
    for k in range(n_cols):
        cols[:, k] = y[rows]
        if k + 1 < n_cols:
            y = mat @ y
    record = verify_krylov_span(cols, len(report), tol=1e-5)
    assert record.cyclic
    assert record.rank == record.dimension == len(report)


# -- direct sum decomposition ------------------------------------------------------------

def test_decomposition_primed_basis_vector():
    op = ShiftOperator(make_family("tilde"), ConstantWeights(1.0))
    dec = direct_sum_decomposition(SparseVector.basis("1'"), op)
    assert dec.mu[1] == pytest.approx(-math.sqrt(2.0))
    assert dec.nu[1] == pytest.approx(1.0)
    assert dec.residual <= 1e-12


def test_decomposition_pure_spine():
    op = ShiftOperator(make_family("tilde"), ConstantWeights(1.0))
    dec = direct_sum_decomposition(SparseVector.basis("5"), op)
    assert not dec.g_part
    assert dec.e_part.coeffs == {"5": 1.0}


def test_decomposition_pure_g():
    op = random_tilde_operator(9)
    g3 = g_vector(op, 3)
    dec = direct_sum_decomposition(g3, op)
    assert dec.e_part.norm() <= 1e-12
    assert dec.mu[3] == pytest.approx(g_norm(op, 3))
    assert dec.residual <= 1e-12


def test_decomposition_reconstructs_random_vectors(rng):
    op = random_tilde_operator(12)
    for _ in range(10):
        x = SparseVector()
        for _ in range(6):
            k = rng.randint(1, 8)
            key = f"{k}'" if rng.random() < 0.5 else str(rng.randint(-8, 8))
            x.coeffs[key] = rng.uniform(-2, 2)
        dec = direct_sum_decomposition(x, op)
        assert dec.residual <= 1e-12

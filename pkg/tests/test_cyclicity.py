"""Backward-shift cyclic construction, Krylov oracle, verdict engine."""

import copy
import math

import numpy as np
import pytest

from treeshift.asymptotics import adjoint_profile, alpha_profile, classify
from treeshift.cyclicity import (
    BackwardShiftSpec,
    VERDICT_ANCHORS,
    backward_spec_from_json,
    candidate_vector,
    cokernel_dimension,
    construct_backward_cyclic,
    cyclicity_verdict,
    default_schedule,
    ge_rank,
    krylov_rank,
    range_membership_report,
    sigma_m,
    uniform_weight_rule,
    verify_cyclic_candidate,
)
from treeshift.errors import DimensionCap, ScheduleTooShort, ZeroWeight
from treeshift.shifts import ShiftOperator
from treeshift.sparse import SparseVector
from treeshift.trees import make_family, materialize_window, validate_finite
from treeshift.weights import ConstantWeights, MapWeights

from conftest import full_window, random_finite_tree


# -- schedule and sigma ------------------------------------------------------------

def test_schedule_shape():
    sched = default_schedule(2, 8)
    ks = [k for _, k in sched]
    assert ks == [1, 3, 6, 10, 15, 21, 28, 36]
    gaps = [b - a for a, b in zip(ks, ks[1:])]
    assert gaps == sorted(gaps) and gaps[0] > 0  # gaps strictly increase
    assert [j for j, _ in sched] == [0, 1] * 4


def test_sigma_one_geometric_value():
    L = 12
    spec = BackwardShiftSpec(1, 1.0)
    cand = construct_backward_cyclic(spec, L)
    # before any modification fires, xi_l = 2^-l and unit weights make
    # Sigma_1 = sum_{l>1} 4^{-(l-1)}; replay it on a fresh candidate
    from treeshift.cyclicity import CyclicCandidate
    fresh = CyclicCandidate(schedule=default_schedule(1, L),
                            xi=[2.0 ** (-l) for l in range(1, L + 1)])
    want = sum(4.0 ** (-(l - 1)) for l in range(2, L + 1))
    assert sigma_m(fresh, spec, 1) == pytest.approx(want, abs=1e-12)


def test_schedule_covers_every_branch():
    for branches, L in ((2, 16), (3, 12), (4, 16)):
        sched = default_schedule(branches, L)
        for j in range(branches):
            hits = sum(1 for jj, _ in sched if jj == j)
            assert hits >= math.ceil(L / (2 * branches))


def test_sigma_last_stage_empty_tail():
    spec = BackwardShiftSpec(1, 1.0)
    cand = construct_backward_cyclic(spec, 12)
    assert sigma_m(cand, spec, 12) == 0.0


def test_construction_postcondition_and_idempotence():
    for weights in (1.0, uniform_weight_rule(3, 0.5, 1.0)):
        spec = BackwardShiftSpec(2, weights)
        cand = construct_backward_cyclic(spec, 16)
        for m in range(1, 17):
            assert sigma_m(cand, spec, m) <= 2.0 ** (-m)
        # a second pass of the modification loop fires no rescaling
        again = copy.deepcopy(cand)
        for m in range(1, 17):
            assert sigma_m(again, spec, m) <= 2.0 ** (-m)
        assert all(x > 0.0 for x in cand.xi)


def test_rescaling_never_increases_earlier_sigmas():
    from treeshift.cyclicity import CyclicCandidate
    spec = BackwardShiftSpec(2, uniform_weight_rule(11, 0.5, 1.0))
    L = 12
    cand = CyclicCandidate(schedule=default_schedule(2, L),
                           xi=[2.0 ** (-l) for l in range(1, L + 1)])
    history = {}
    for m in range(1, L + 1):
        s = sigma_m(cand, spec, m)
        if s > 2.0 ** (-m):
            factor = math.sqrt(2.0 ** m * s) * (1.0 + 1e-12)
            for l in range(m + 1, L + 1):
                cand.xi[l - 1] /= factor
        for j in range(1, m + 1):
            now = sigma_m(cand, spec, j)
            assert now <= history.get(j, np.inf) * (1 + 1e-12) + 1e-15
            history[j] = now


def test_equation_identity_on_truncation():
    # B^k f rescaled by the stage coefficient lands on a basis vector plus a
    # tail whose squared norm is exactly the stage sum at that k
    spec = BackwardShiftSpec(2, uniform_weight_rule(5, 0.5, 1.0))
    cand = construct_backward_cyclic(spec, 10)
    depth = max(k for _, k in cand.schedule)
    big = spec.dense_matrix(depth)
    f = candidate_vector(spec, cand, depth)
    prefix = {j: spec.prefix_products(j, depth) for j in range(2)}
    for m in (1, 2, 3, 6):
        j_m, k_m = cand.schedule[m - 1]
        k_prev = cand.schedule[m - 2][1] if m >= 2 else -1
        for k in range(k_prev + 1, k_m + 1):
            y = f.copy()
            for _ in range(k):
                y = big @ y
            denom = cand.xi[m - 1] * prefix[j_m][k_m] / prefix[j_m][k_m - k]
            y /= denom
            e = np.zeros_like(y)
            e[j_m * (depth + 1) + (k_m - k)] = 1.0
            tail = 0.0
            for l in range(m + 1, cand.length + 1):
                j_l, k_l = cand.schedule[l - 1]
                num = cand.xi[l - 1] * prefix[j_l][k_l] / prefix[j_l][k_l - k]
                tail += (num / denom) ** 2
            assert np.linalg.norm(y - e) ** 2 == pytest.approx(tail, abs=1e-12)


def test_construct_guards():
    with pytest.raises(ZeroWeight):
        construct_backward_cyclic(BackwardShiftSpec(1, 1.0, zeros=[(0, 4)]), 8)
    with pytest.raises(ScheduleTooShort):
        construct_backward_cyclic(BackwardShiftSpec(3, 1.0), 8)


def test_range_membership_report_finite():
    spec = BackwardShiftSpec(1, 0.9)
    cand = construct_backward_cyclic(spec, 8)
    value = range_membership_report(spec, cand, 3)
    assert 0.0 < value < math.inf


# -- rank oracles --------------------------------------------------------------------

def test_krylov_rank_jordan_block():
    mat = np.diag([1.0, 1.0, 1.0], k=1)  # nilpotent, shifts e_k -> e_{k-1}
    assert krylov_rank(mat, np.array([0.0, 0.0, 0.0, 1.0])) == 4


def test_krylov_rank_identity():
    assert krylov_rank(np.eye(5), np.ones(5)) == 1


def test_krylov_rank_two_block_nilpotent(rng):
    block = np.diag([1.0, 1.0], k=1)
    mat = np.block([[block, np.zeros((3, 3))], [np.zeros((3, 3)), block]])
    for _ in range(100):
        x = np.array([rng.uniform(-1, 1) for _ in range(6)])
        assert krylov_rank(mat, x) <= 3


def test_ge_rank_agrees_with_numpy(rng):
    for _ in range(10):
        a = np.array([[rng.gauss(0, 1) for _ in range(8)] for _ in range(8)])
        a[:, 3] = a[:, 1] * 2.0 - a[:, 0]
        assert ge_rank(a) == np.linalg.matrix_rank(a, tol=1e-8)


def test_cokernel_formula_on_rooted_trees(rng):
    for _ in range(6):
        tree = random_finite_tree(rng, 40)
        op = ShiftOperator(tree, MapWeights({v: rng.uniform(0.1, 1.0)
                                             for v in tree.vertices() if v != tree.root}))
        window = full_window(tree)
        mat = op.dense_truncation(window)
        br, _ = tree.branching_total()
        assert cokernel_dimension(mat) == 1 + br


def test_cokernel_bilateral_window_is_boundary_artifact():
    from treeshift.asymptote import boundary_deficiency
    op = ShiftOperator(make_family("bilateral-path"), ConstantWeights(0.7))
    window = materialize_window(op.model, -5, 5)
    mat = op.dense_truncation(window)
    raw = cokernel_dimension(mat)
    assert raw == 1
    assert raw - boundary_deficiency(window) == 0


def test_dimension_cap():
    with pytest.raises(DimensionCap):
        krylov_rank(np.eye(10), np.ones(10), cap=5)
    spec = BackwardShiftSpec(2, 1.0)
    cand = construct_backward_cyclic(spec, 16)
    with pytest.raises(DimensionCap):
        verify_cyclic_candidate(spec, cand, 3000)


# -- candidate verification ------------------------------------------------------------

def test_verify_single_branch_reference_numbers():
    spec = BackwardShiftSpec(1, 1.0)
    cand = construct_backward_cyclic(spec, 12)
    record = verify_cyclic_candidate(spec, cand, 40)
    assert record.rank == record.dimension == 41
    assert record.max_residual <= 1e-6
    assert record.cyclic


def test_verify_two_branch_reference_numbers():
    spec = BackwardShiftSpec(2, 0.9)
    cand = construct_backward_cyclic(spec, 16)
    record = verify_cyclic_candidate(spec, cand, 50)
    assert record.rank == record.dimension == 102
    assert record.max_residual <= 1e-5


def test_verify_rank_only_at_deeper_window():
    spec = BackwardShiftSpec(2, 1.0)
    cand = construct_backward_cyclic(spec, 16)
    record = verify_cyclic_candidate(spec, cand, 60)
    assert record.rank == record.dimension == 122


def test_zeroed_coefficient_detected():
    spec = BackwardShiftSpec(1, 1.0)
    cand = construct_backward_cyclic(spec, 12)
    K = 78  # window reaching the deepest support point
    baseline = verify_cyclic_candidate(spec, cand, K)
    broken = copy.deepcopy(cand)
    broken.xi[-1] = 0.0
    record = verify_cyclic_candidate(spec, broken, K)
    assert record.rank < baseline.rank
    assert baseline.max_residual <= 1e-6
    assert record.max_residual > 1e-2


# -- dense-range / direct-sum cyclicity laws -------------------------------------------

def _weighted_cycle(rng, n):
    """Invertible dense-range cyclic matrix: a weighted cyclic permutation."""
    mat = np.zeros((n, n))
    for k in range(n):
        mat[(k + 1) % n, k] = rng.uniform(0.5, 1.5)
    return mat


def test_image_of_cyclic_vector_is_cyclic(rng):
    n = 12
    mat = _weighted_cycle(rng, n)
    f = np.array([rng.uniform(0.5, 1.5) for _ in range(n)])
    assert krylov_rank(mat, f) == n
    assert krylov_rank(mat, mat @ f) == n


def test_direct_sum_with_nilpotent_block_is_cyclic(rng):
    n = 10
    t = _weighted_cycle(rng, n)
    f = np.zeros(n)
    f[0] = 1.0
    assert krylov_rank(t, f) == n
    jordan = np.diag([1.0] * 3, k=1)
    combined = np.block([[t, np.zeros((n, 4))], [np.zeros((4, n)), jordan]])
    e = np.zeros(4)
    e[-1] = 1.0
    assert krylov_rank(combined, np.concatenate([f, e])) == n + 4


def test_commuting_ray_swap_is_not_hyperinvariance(rng):
    # the unitary swapping the two rays of the leafless Br=1 tree commutes
    # with the equal-weight shift on the window interior
    model = make_family("tilde")
    op = ShiftOperator(model, ConstantWeights(0.7))
    window = materialize_window(model, -5, 5)

    def swap(x):
        out = SparseVector()
        for u, c in x.items():
            if u.endswith("'"):
                out.coeffs[u[:-1]] = c
            elif int(u) >= 1:
                out.coeffs[u + "'"] = c
            else:
                out.coeffs[u] = c
        return out

    for u in window.forward_interior():
        lhs = swap(op.apply(SparseVector.basis(u)))
        rhs = op.apply(swap(SparseVector.basis(u)))
        assert (lhs - rhs).norm() <= 1e-12


# -- verdict engine ---------------------------------------------------------------------

def _classify(op, lo, hi):
    window = materialize_window(op.model, lo, hi)
    profile = alpha_profile(op, window)
    adjoint = adjoint_profile(op, window)
    return classify(op, profile, adjoint), window


def test_verdict_backward_shift_rules():
    cyclic = cyclicity_verdict(BackwardShiftSpec(2, 0.9, zeros=[(0, 3)]), None)
    assert (cyclic.verdict, cyclic.rule) == ("cyclic", "R3")
    assert cyclic.anchors == VERDICT_ANCHORS["R3"]
    blocked = cyclicity_verdict(BackwardShiftSpec(2, 0.9, zeros=[(0, 3), (1, 5)]), None)
    assert (blocked.verdict, blocked.rule) == ("non-cyclic", "R3")


def test_verdict_r1_rooted_branching(rng):
    tree = validate_finite(["r", "a", "b"], [("r", "a"), ("r", "b")])
    op = ShiftOperator(tree, MapWeights({"a": 0.6, "b": 0.8}))
    window = full_window(tree)
    cls = classify(op, alpha_profile(op, window), adjoint_profile(op, window))
    verdict = cyclicity_verdict(tree, cls, window)
    assert (verdict.verdict, verdict.rule) == ("non-cyclic", "R1")


def test_verdict_r2_rootless_binary():
    op = ShiftOperator(make_family("rootless-binary"), ConstantWeights(1 / math.sqrt(2)))
    cls, window = _classify(op, 0, 4)
    verdict = cyclicity_verdict(op.model, cls, window)
    assert (verdict.verdict, verdict.rule) == ("non-cyclic", "R2")


def test_verdict_r6_tilde_c1dot():
    op = ShiftOperator(make_family("tilde"), MapWeights({"1": 0.6, "1'": 0.7}, default=1.0))
    cls, window = _classify(op, -6, 6)
    assert cls.forward == "C1dot"
    verdict = cyclicity_verdict(op.model, cls, window)
    assert (verdict.verdict, verdict.rule) == ("non-cyclic", "R6")


def test_verdict_unknown_with_blockers():
    op = ShiftOperator(make_family("bilateral-path"), ConstantWeights(0.5))
    cls, window = _classify(op, -5, 5)
    verdict = cyclicity_verdict(op.model, cls, window)
    assert verdict.verdict == "unknown"
    assert verdict.blockers


def test_backward_spec_json():
    spec = backward_spec_from_json({"branches": 2,
                                    "weights": {"kind": "constant", "value": 0.9},
                                    "zeros": [[0, 3]]})
    assert spec.branches == 2
    assert spec.weight(0, 3) == 0.0
    assert spec.weight(1, 3) == 0.9

"""Isometric asymptotes of a contractive shift and of its adjoint.

The asymptote of the shift is itself a weighted shift on the stable subtree,
with weights rescaled by square roots of consecutive forward limits; it is
classified as a unilateral shift, a completely-non-unitary unilateral shift,
or a bilateral-plus-unilateral sum, depending on rootedness and on whether
the generation sums of its infinite weight products vanish.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdjointStable, StableSubtreeEmpty
from .asymptotics import (
    AdjointAsymptotics,
    AlphaEvaluator,
    AsymptoticProfile,
    CONVERGED,
    DEFAULT_MAX_DEPTH,
    DEFAULT_ZERO_THRESHOLD,
    EXACT_ONE,
    EXACT_ZERO,
    StableSubtree,
)
from .shifts import ShiftOperator
from .sparse import SparseVector
from .trees import BilateralPath, CombTree, FiniteTree, RootedPath, TreeWindow
from .weights import ConstantWeights, ExpRayWeights, MapWeights, StepWeights

UNILATERAL = "unilateral"
CNU_UNILATERAL = "cnu-unilateral"
BILATERAL_PLUS = "bilateral-plus-unilateral"

_USABLE = (CONVERGED, EXACT_ONE)


@dataclass
class AsymptoteDescriptor:
    """Weights and classification of the isometric asymptote U = S_beta."""

    beta: dict  # vertex -> weight, on stable-subtree interior window vertices
    classification: str
    multiplicity: float  # count or math.inf
    multiplicity_exact: bool
    cnu_value: float | None
    cnu_by_level: dict
    stable: StableSubtree
    operator: ShiftOperator = field(repr=False)
    alpha: AlphaEvaluator = field(repr=False)

    def to_json(self):
        mult = "inf" if self.multiplicity == math.inf else int(self.multiplicity)
        return {"beta": {k: v for k, v in sorted(self.beta.items())},
                "class": self.classification, "multiplicity": mult,
                "cnu_test": self.cnu_value}

    def dense_truncation(self, window: TreeWindow):
        """Matrix of U compressed to the stable members of the window; returns
        (matrix, member order)."""
        members = [u for u in window.order if u in self.stable.members]
        index = {u: i for i, u in enumerate(members)}
        mat = np.zeros((len(members), len(members)))
        for j, u in enumerate(members):
            for v in self.stable.children_in(u):
                if v in index:
                    mat[index[v], j] = self.beta[v] if v in self.beta else self._beta_at(v)
        return mat, members

    def _beta_at(self, v):
        a_child = self.alpha(v)
        a_parent = self.alpha(self.operator.model.parent(v))
        return self.operator.weight(v) * math.sqrt(a_child.estimate / a_parent.estimate)


def cnu_level_value(operator: ShiftOperator, alpha: AlphaEvaluator, members, depth: int,
                    threshold: float) -> float:
    """Truncated generation sum of the asymptote's squared weight products.

    The product of beta^2 along the chain from the depth-D ancestor down to a
    member telescopes to (product of lambda^2) * alpha(member)/alpha(anchor),
    so no per-ancestor beta values are needed.
    """
    model = operator.model
    total = 0.0
    for v in members:
        prod = 1.0
        w = v
        for _ in range(depth):
            prod *= operator.weight(w) ** 2
            w = model.parent(w)
            if w is None:
                break
        anchor = alpha(w).estimate if w is not None else 1.0
        if anchor <= threshold:
            continue
        total += prod * alpha(v).estimate / anchor
    return total


def cnu_test(descriptor: AsymptoteDescriptor, window: TreeWindow,
             depth: int = DEFAULT_MAX_DEPTH) -> float:
    """Value of the c.n.u. diagnostic at the top window level (the value is
    level-independent in the limit; per-level truncations are kept on the
    descriptor for the cross-level consistency check)."""
    stable = descriptor.stable
    for lvl in window.levels():
        members = stable.members_at(lvl)
        if members:
            return cnu_level_value(descriptor.operator, descriptor.alpha, members,
                                   depth, stable.zero_threshold)
    raise StableSubtreeEmpty("no stable vertices in the window")


def isometric_asymptote(operator: ShiftOperator, profile: AsymptoticProfile,
                        stable: StableSubtree, depth: int = DEFAULT_MAX_DEPTH,
                        zero_threshold: float | None = None) -> AsymptoteDescriptor:
    """Construct U = S_beta on the stable subtree and classify it."""
    if not stable.members:
        raise StableSubtreeEmpty("the shift is stable; no isometric asymptote of interest")
    if zero_threshold is None:
        zero_threshold = stable.zero_threshold
    alpha = profile.evaluator or AlphaEvaluator(operator, profile.tol)
    model = operator.model

    beta = {}
    for v in stable.members:
        p = model.parent(v)
        if p is None or p not in stable.members:
            continue
        rv, rp = profile.record(v), profile.record(p)
        if rv.status in _USABLE and rp.status in _USABLE:
            beta[v] = operator.weight(v) * math.sqrt(rv.estimate / rp.estimate)

    br, br_exact = stable.branching
    if model.is_rooted:
        mult = br + 1 if br != math.inf else math.inf
        cls, cnu_value, by_level = UNILATERAL, None, {}
    else:
        by_level = {}
        for lvl in stable.window.levels():
            members = stable.members_at(lvl)
            if members:
                by_level[lvl] = cnu_level_value(operator, alpha, members, depth,
                                                zero_threshold)
        top = min(by_level)
        cnu_value = by_level[top]
        if cnu_value <= zero_threshold:
            cls, mult = CNU_UNILATERAL, br
        else:
            cls, mult = BILATERAL_PLUS, br
    return AsymptoteDescriptor(beta, cls, mult, br_exact, cnu_value, by_level,
                               stable, operator, alpha)


@dataclass
class AdjointAsymptoteDescriptor:
    """The adjoint's asymptote acts level-to-level on the h eigenvectors."""

    shift_type: str  # simple-unilateral | simple-bilateral
    coefficients: dict  # level -> sqrt(a_level / a_parent_level)
    h_vectors: dict

    def to_json(self):
        return {"type": self.shift_type,
                "coefficients": {str(k): v for k, v in sorted(self.coefficients.items())}}


def _has_last_level(model) -> bool:
    if isinstance(model, CombTree):
        return model.unprimed_leaf is not None
    if isinstance(model, FiniteTree):
        return True
    return False


def adjoint_isometric_asymptote(operator: ShiftOperator,
                                adjoint: AdjointAsymptotics,
                                zero_threshold: float = DEFAULT_ZERO_THRESHOLD
                                ) -> AdjointAsymptoteDescriptor:
    if adjoint.rooted_certified:
        raise AdjointStable("rooted tree: the adjoint orbits are stable")
    levels = sorted(adjoint.h_vectors)
    if all(adjoint.h_vectors[lvl].norm_sq <= zero_threshold for lvl in levels):
        raise AdjointStable("all adjoint limit eigenvalues vanish at this threshold")
    coefficients = {}
    for lvl in levels:
        a = adjoint.h_vectors[lvl].norm_sq
        below = adjoint.h_vectors.get(lvl - 1)
        if below is not None and below.norm_sq > zero_threshold:
            coefficients[lvl] = math.sqrt(a / below.norm_sq)
    shift_type = "simple-unilateral" if _has_last_level(operator.model) else "simple-bilateral"
    return AdjointAsymptoteDescriptor(shift_type, coefficients, dict(adjoint.h_vectors))


def intertwining_residual(operator: ShiftOperator, descriptor: AsymptoteDescriptor,
                          profile: AsymptoticProfile, window: TreeWindow) -> float:
    """max over stable interior basis vectors of || A^(1/2) S e_u - U A^(1/2) e_u ||."""
    model = operator.model
    worst = 0.0
    interior = set(window.forward_interior())
    for u in descriptor.stable.members & interior:
        lhs = SparseVector()
        for v in model.children(u):
            rec = profile.record(v) if v in window else descriptor.alpha(v)
            lhs.coeffs[v] = operator.weight(v) * math.sqrt(max(rec.estimate, 0.0))
        rhs = SparseVector()
        root_a = math.sqrt(profile.record(u).estimate)
        for v in descriptor.stable.children_in(u):
            if v in descriptor.beta:
                rhs.coeffs[v] = root_a * descriptor.beta[v]
        worst = max(worst, (lhs - rhs).norm())
    return worst


def adjoint_intertwining_residual(operator: ShiftOperator,
                                  descriptor: AdjointAsymptoteDescriptor) -> float:
    """max over levels of || A_*^(1/2) S* h_l - U_* A_*^(1/2) h_l ||.

    Per level, A_*^(1/2) projects onto the h vector and scales by its norm, so
    the residual reduces to |<S* h_l, h_(l-1)> - a_l| / sqrt(a_(l-1)).
    """
    worst = 0.0
    for lvl, h in descriptor.h_vectors.items():
        below = descriptor.h_vectors.get(lvl - 1)
        if below is None or below.norm_sq <= 0.0:
            continue
        image = operator.apply_adjoint(h.coefficients)
        inner = image.dot(below.coefficients)
        worst = max(worst, abs(inner - h.norm_sq) / math.sqrt(below.norm_sq))
    return worst


@dataclass
class SimilarityAnswer:
    answer: str  # yes | no | undetermined
    reason: str

    def to_json(self):
        return {"answer": self.answer, "reason": self.reason}


def similar_to_isometry(operator: ShiftOperator, profile: AsymptoticProfile,
                        zero_threshold: float = DEFAULT_ZERO_THRESHOLD) -> SimilarityAnswer:
    """Similarity to an isometry holds iff the forward limits are bounded away
    from zero; Yes needs a symbolic global infimum, No a vanishing limit."""
    for u in profile.window.order:
        rec = profile.record(u)
        if rec.status == EXACT_ZERO:
            return SimilarityAnswer("no", f"forward limit vanishes exactly at {u}")
        if rec.status == CONVERGED and rec.estimate <= zero_threshold:
            return SimilarityAnswer("no", f"forward limit below {zero_threshold} at {u}")
    if operator.is_certified_isometry():
        return SimilarityAnswer("yes", "certified isometry: all forward limits are 1")
    model, w = operator.model, operator.weights
    if isinstance(w, ExpRayWeights) and isinstance(model, (RootedPath, BilateralPath)):
        inf_value = math.exp(2.0 * w.tail_log_sum(w.start_level - 1))
        return SimilarityAnswer("yes", f"closed-form infimum {inf_value:.6g} > 0")
    if isinstance(w, ConstantWeights) and isinstance(model, (RootedPath, BilateralPath)):
        if w.value < 1.0:
            return SimilarityAnswer("no", "constant weight < 1 on a chain: limits vanish")
    return SimilarityAnswer("undetermined", "no symbolic infimum for this family")


def _full_product_positive(weights, model):
    """Closed-form sign of the two-sided infinite weight product, or None."""
    if isinstance(weights, ConstantWeights):
        return weights.value >= 1.0
    if isinstance(weights, ExpRayWeights):
        return True  # log-sum is a finite geometric series
    if isinstance(weights, StepWeights):
        return weights.low >= 1.0 and weights.high >= 1.0
    if isinstance(weights, MapWeights) and weights.default is not None:
        if weights.default >= 1.0:
            return all(v > 0.0 for v in weights.values.values())
        return False
    return None


def similar_to_coisometry(operator: ShiftOperator, window: TreeWindow,
                          adjoint: AdjointAsymptotics) -> SimilarityAnswer:
    """Structural gate (rootless, no branching) and then positivity of the
    full weight product via family closed forms or window log-sums."""
    model = operator.model
    if model.is_rooted:
        return SimilarityAnswer("no", "rooted tree cannot carry a co-isometry similarity")
    if any(len(model.children(u)) > 1 for u in window):
        return SimilarityAnswer("no", "branching vertex present: |Chi(u)| <= 1 fails")
    if model.branching_total() is not None and model.branching_total()[0] > 0:
        return SimilarityAnswer("no", "family has positive branching index")
    closed = _full_product_positive(operator.weights, model)
    if closed is True:
        return SimilarityAnswer("yes", "full weight product positive (closed form)")
    if closed is False:
        return SimilarityAnswer("no", "full weight product vanishes (closed form)")
    log_sum = sum(math.log(operator.weight(u)) for u in window if model.parent(u) is not None)
    if log_sum < math.log(1e-12):
        return SimilarityAnswer("no", f"window log-sum {log_sum:.3g} diverges")
    return SimilarityAnswer("undetermined", "no closed form; window log-sum inconclusive")


def boundary_deficiency(window: TreeWindow, members=None) -> int:
    """Rows of a window truncation unreachable only because their parent lies
    outside the window: the artificial part of a window cokernel."""
    count = 0
    for u in window.top_boundary():
        if members is None or u in members:
            count += 1
    return count


def descriptor_to_json_line(descriptor: AsymptoteDescriptor) -> str:
    return json.dumps(descriptor.to_json())

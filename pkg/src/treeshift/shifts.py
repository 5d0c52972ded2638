"""The weighted shift operator: sparse application, closed-form powers, norm,
and the dense truncation that backs every brute-force oracle comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnknownVertex, WindowTooLarge
from .sparse import SparseVector
from .trees import BilateralPath, CombTree, FiniteTree, RootedPath, RootlessBinary, TreeWindow
from .weights import BinarySpineWeights, ConstantWeights, RayWeights, WeightAssignment

DENSE_CAP = 4096
CONTRACTION_SLACK = 1e-12


@dataclass
class NormBound:
    """Operator norm report: `value` is the certified sup when `certified`,
    otherwise just the window-restricted lower estimate."""

    value: float
    window_value: float
    certified: bool


def _children_bound_outside(model, window):
    """Max children count a vertex outside the window can have."""
    if isinstance(model, FiniteTree):
        return 0
    if isinstance(model, CombTree):
        return 1 if "0" in window else 2
    if isinstance(model, (RootedPath, BilateralPath)):
        return 1
    return model.max_children()


class ShiftOperator:
    """Weighted shift S on a directed tree: e_u -> sum over children v of lambda_v e_v."""

    def __init__(self, model, weights: WeightAssignment):
        self.model = model
        self.weights = weights

    def weight(self, v: str) -> float:
        return self.weights.weight(self.model, v)

    def apply(self, x: SparseVector) -> SparseVector:
        out = SparseVector()
        for u, c in x.items():
            if u not in self.model:
                raise UnknownVertex(u)
            for v in self.model.children(u):
                out.coeffs[v] = out.coeffs.get(v, 0.0) + c * self.weight(v)
        out.coeffs = {k: c for k, c in out.coeffs.items() if c != 0.0}
        return out

    def apply_adjoint(self, x: SparseVector) -> SparseVector:
        out = SparseVector()
        for u, c in x.items():
            if u not in self.model:
                raise UnknownVertex(u)
            p = self.model.parent(u)
            if p is None:
                continue
            out.coeffs[p] = out.coeffs.get(p, 0.0) + c * self.weight(u)
        out.coeffs = {k: c for k, c in out.coeffs.items() if c != 0.0}
        return out

    def power_closed(self, u: str, n: int) -> SparseVector:
        """S^n e_u from the closed form: sum over v in Chi^n(u) of the
        product of the weights along the path from u down to v."""
        if n < 1:
            raise ValueError("n must be >= 1")
        self.model.require_vertex(u)
        frontier = {u: 1.0}
        for _ in range(n):
            nxt: dict[str, float] = {}
            for w, prod in frontier.items():
                for v in self.model.children(w):
                    nxt[v] = prod * self.weight(v)
            frontier = nxt
            if not frontier:
                break
        return SparseVector(frontier)

    def adjoint_power_closed(self, u: str, n: int) -> SparseVector:
        """S*^n e_u: a single weighted ancestor term, or 0 when the n-fold
        parent does not exist."""
        if n < 1:
            raise ValueError("n must be >= 1")
        self.model.require_vertex(u)
        prod = 1.0
        w = u
        for _ in range(n):
            p = self.model.parent(w)
            if p is None:
                return SparseVector()
            prod *= self.weight(w)
            w = p
        return SparseVector({w: prod})

    def _column_norm(self, u: str) -> float:
        return math.sqrt(sum(self.weight(v) ** 2 for v in self.model.children(u)))

    def operator_norm(self, window: TreeWindow) -> NormBound:
        """sup over u of sqrt(sum of squared children weights).

        Finite models are scanned exhaustively.  For procedural models the
        scan covers the window and its outside parents, and the tail beyond
        the window is bounded by max_weight * sqrt(children bound); the
        result is certified whenever that bound exists.
        """
        if isinstance(self.model, FiniteTree):
            value = max(self._column_norm(u) for u in self.model.vertices())
            return NormBound(value, value, True)
        if self.is_certified_isometry():
            return NormBound(1.0, 1.0, True)
        scan = set(window.order)
        for u in window.top_boundary():
            scan.add(self.model.parent(u))
        window_value = max(self._column_norm(u) for u in scan)
        top = self.weights.max_weight()
        if top is None:
            return NormBound(window_value, window_value, False)
        outside = top * math.sqrt(_children_bound_outside(self.model, window))
        return NormBound(max(window_value, outside), window_value, True)

    def is_contraction(self, window: TreeWindow) -> bool:
        return self.operator_norm(window).value <= 1.0 + CONTRACTION_SLACK

    def is_certified_isometry(self) -> bool:
        """Family-level isometry certificates (children square-sums all 1)."""
        m, w = self.model, self.weights
        if isinstance(w, ConstantWeights):
            if isinstance(m, RootlessBinary):
                return abs(2.0 * w.value ** 2 - 1.0) <= 1e-12
            if isinstance(m, (RootedPath, BilateralPath)):
                return abs(w.value - 1.0) <= 1e-12
        if isinstance(w, BinarySpineWeights) and isinstance(m, RootlessBinary):
            return True
        if isinstance(w, RayWeights) and isinstance(m, CombTree):
            if m.leaf_set():
                return False
            s1 = w.branch_spine if w.branch_spine is not None else w.spine
            p1 = w.branch_primed if w.branch_primed is not None else w.primed
            return (abs(w.spine - 1.0) <= 1e-12 and abs(w.primed - 1.0) <= 1e-12
                    and abs(s1 * s1 + p1 * p1 - 1.0) <= 1e-12)
        return False

    def dense_truncation(self, window: TreeWindow, cap: int = DENSE_CAP) -> np.ndarray:
        """Matrix of the compression P_W S P_W in the level-major basis order."""
        if len(window) > cap:
            raise WindowTooLarge(len(window), cap)
        n = len(window)
        mat = np.zeros((n, n))
        for j, u in enumerate(window.order):
            for v in self.model.children(u):
                if v in window:
                    mat[window.index_of(v), j] = self.weight(v)
        return mat


def vector_to_dense(window: TreeWindow, x: SparseVector, strict: bool = True) -> np.ndarray:
    """Coordinates of a sparse vector in the window basis.

    With strict=True any support outside the window is an error; otherwise it
    is silently compressed away (the P_W projection).
    """
    out = np.zeros(len(window))
    for u, c in x.items():
        if u in window:
            out[window.index_of(u)] = c
        elif strict:
            raise UnknownVertex(u)
    return out


def dense_to_vector(window: TreeWindow, arr) -> SparseVector:
    return SparseVector({u: float(arr[i]) for i, u in enumerate(window.order)})

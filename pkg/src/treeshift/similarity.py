"""Explicit similarity and quasiaffinity witnesses for the Br=1 tree shapes.

Both constructions intertwine the adjoint of the shift with the adjoint of a
decoupled target operator (a spine shift plus an independent primed-ray
shift) through an operator X that fixes the spine basis vectors and sends
each primed basis vector to the normalized difference vector g_k.  X is
block-diagonal over the two-dimensional spaces spanned by {e_k, e_k'}, so
invertibility is certified block by block: the blocks have uniformly bounded
inverses exactly when the primed-to-spine weight-product ratios stay
bounded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotAContraction, ShapeMismatch
from .shifts import ShiftOperator
from .sparse import SparseVector
from .trees import CombTree, TreeWindow
from .weights import ExpRayWeights, ConstantWeights, MapWeights, RayWeights


def _require_comb(operator: ShiftOperator, need_leaf: bool) -> CombTree:
    model = operator.model
    if not isinstance(model, CombTree):
        raise ShapeMismatch(f"expected a comb/tilde model, got {model.describe()}")
    if need_leaf and model.primed_leaf is None:
        raise ShapeMismatch("construction needs a primed leaf")
    if not need_leaf and model.leaf_set():
        raise ShapeMismatch("construction needs the leafless tilde shape")
    return model


def ray_products(operator: ShiftOperator, upto: int):
    """(spine, primed) cumulative weight products lambda_1..k and lambda_1'..k'."""
    spine, primed = [1.0], [1.0]
    for j in range(1, upto + 1):
        spine.append(spine[-1] * operator.weight(str(j)))
        primed.append(primed[-1] * operator.weight(f"{j}'"))
    return spine, primed


def g_vector(operator: ShiftOperator, k: int) -> SparseVector:
    """g_k = (prod 1/lambda_j) e_k - (prod 1/lambda_j') e_k'."""
    if k < 1:
        raise ValueError("k must be >= 1")
    spine, primed = ray_products(operator, k)
    return SparseVector({str(k): 1.0 / spine[k], f"{k}'": -1.0 / primed[k]})


def g_norm(operator: ShiftOperator, k: int) -> float:
    spine, primed = ray_products(operator, k)
    return math.hypot(1.0 / spine[k], 1.0 / primed[k])


@dataclass
class RatioCertificate:
    """Boundedness report for the primed-to-spine product ratios."""

    status: str  # bounded | unbounded-evidence
    sup: float
    exact: bool
    at: int | None = None
    value: float | None = None

    def to_json(self):
        doc = {"status": self.status, "sup": self.sup, "exact": self.exact}
        if self.at is not None:
            doc.update({"at": self.at, "value": self.value})
        return doc


def ratio_bounded(operator: ShiftOperator, horizon: int = 64,
                  blow_up: float = 1e6) -> RatioCertificate:
    """Track partial maxima of prod_{j<=k} lambda_j'/lambda_j.

    Closed forms cover per-ray constants and padded maps; otherwise the
    partial maxima run to the horizon, with an evidence certificate as soon
    as a partial product exceeds the blow-up bound.
    """
    w = operator.weights
    if isinstance(w, RayWeights):
        first = ((w.branch_primed if w.branch_primed is not None else w.primed)
                 / (w.branch_spine if w.branch_spine is not None else w.spine))
        step = w.primed / w.spine
        if step <= 1.0:
            return RatioCertificate("bounded", max(first, first * step), True)
        if first > blow_up:
            return RatioCertificate("unbounded-evidence", first, True, at=1, value=first)
        k = 1 + max(1, int(math.ceil(math.log(blow_up / first) / math.log(step))))
        return RatioCertificate("unbounded-evidence", first * step ** (k - 1), True,
                                at=k, value=first * step ** (k - 1))
    exact = isinstance(w, (ConstantWeights, ExpRayWeights))
    if isinstance(w, MapWeights) and w.default is not None:
        support = [abs(int(v[:-1] if v.endswith("'") else v)) for v in w.values]
        horizon = max(horizon, max(support, default=0) + 1)
        exact = True
    ratio = 1.0
    sup = 0.0
    for k in range(1, horizon + 1):
        ratio *= operator.weight(f"{k}'") / operator.weight(str(k))
        sup = max(sup, ratio)
        if ratio > blow_up:
            return RatioCertificate("unbounded-evidence", sup, exact, at=k, value=ratio)
    return RatioCertificate("bounded", sup, exact)


@dataclass
class SimilarityWitness:
    """Intertwining operator X plus the decoupled target it conjugates to."""

    kind: str  # leaf-similarity | tilde-quasiaffinity
    mode: str  # similar | quasiaffine-only
    blocks: list  # per-k block reports
    residual: float
    ratio: RatioCertificate | None
    window: TreeWindow
    operator: ShiftOperator = field(repr=False)
    primed_leaf: int | None = None
    unprimed_leaf: int | None = None
    target_primed_weights: dict = field(default_factory=dict)  # k -> weight into k'
    g_norms: dict = field(default_factory=dict)

    def block_inverse_bound(self) -> float:
        return max((b["inverse_norm"] for b in self.blocks), default=1.0)

    def to_json(self):
        return {"kind": self.kind, "mode": self.mode, "residual": self.residual,
                "blocks": self.blocks,
                "ratio": self.ratio.to_json() if self.ratio else None,
                "block_inverse_bound": self.block_inverse_bound()}

    # -- dense window realizations (oracle food) --

    def _primed_max(self):
        top = max((lvl for lvl in self.window.levels() if f"{lvl}'" in self.window),
                  default=0)
        if self.primed_leaf is not None:
            top = min(top, self.primed_leaf)
        return top

    def x_matrix(self) -> np.ndarray:
        win = self.window
        n = len(win)
        mat = np.zeros((n, n))
        for j, u in enumerate(win.order):
            if u.endswith("'") and int(u[:-1]) <= self._primed_max():
                k = int(u[:-1])
                g = g_vector(self.operator, k).scaled(1.0 / self.g_norms[k])
                for v, c in g.items():
                    mat[win.index_of(v), j] = c
            else:
                mat[j, j] = 1.0
        return mat

    def target_matrix(self) -> np.ndarray:
        """W + N (or the tilde analogue) on the window basis: the spine shifts
        with the original weights, the primed ray shifts with the g-norm
        ratios, and the branch edge into 1' carries nothing."""
        win = self.window
        n = len(win)
        mat = np.zeros((n, n))
        for j, u in enumerate(win.order):
            if u.endswith("'"):
                k = int(u[:-1])
                tgt = f"{k + 1}'"
                if tgt in win and (k + 1) in self.target_primed_weights:
                    mat[win.index_of(tgt), j] = self.target_primed_weights[k + 1]
            else:
                nxt = str(int(u) + 1)
                if nxt in win and (self.unprimed_leaf is None or int(u) < self.unprimed_leaf):
                    mat[win.index_of(nxt), j] = self.operator.weight(nxt)
        return mat

    def shift_matrix(self) -> np.ndarray:
        return self.operator.dense_truncation(self.window)


def _x_apply(operator: ShiftOperator, primed_max: int, norms, x: SparseVector) -> SparseVector:
    out = SparseVector()
    for u, c in x.items():
        if u.endswith("'") and 1 <= int(u[:-1]) <= primed_max:
            k = int(u[:-1])
            out.add_scaled(g_vector(operator, k), c / norms[k])
        else:
            out.coeffs[u] = out.coeffs.get(u, 0.0) + c
    out.coeffs = {k: c for k, c in out.coeffs.items() if c != 0.0}
    return out


def _witness(operator, window, kind, mode, ratio, primed_max, norms,
             unprimed_leaf) -> SimilarityWitness:
    """Assemble blocks, target weights, and the adjoint intertwining residual."""
    spine, primed = ray_products(operator, primed_max)
    blocks = []
    for k in range(1, primed_max + 1):
        p, q = 1.0 / spine[k], 1.0 / primed[k]
        block = np.array([[1.0, p / norms[k]], [0.0, -q / norms[k]]])
        blocks.append({"k": k, "det": float(np.linalg.det(block)),
                       "inverse_norm": float(np.linalg.norm(np.linalg.inv(block), 2))})
    target_primed = {k: norms[k - 1] / norms[k] for k in range(2, primed_max + 1)}

    def target_adjoint(u):
        if u.endswith("'"):
            k = int(u[:-1])
            if k == 1:
                return SparseVector()
            return SparseVector({f"{k - 1}'": target_primed[k]})
        return SparseVector({str(int(u) - 1): operator.weight(u)})

    residual = 0.0
    for u in window.order:
        p = window.model.parent(u)
        if p is None or p not in window:
            continue
        lhs = _x_apply(operator, primed_max, norms, target_adjoint(u))
        rhs = operator.apply_adjoint(_x_apply(operator, primed_max, norms,
                                              SparseVector.basis(u)))
        residual = max(residual, (lhs - rhs).norm())

    return SimilarityWitness(kind=kind, mode=mode, blocks=blocks, residual=residual,
                             ratio=ratio, window=window, operator=operator,
                             primed_leaf=primed_max if kind == "leaf-similarity" else None,
                             unprimed_leaf=unprimed_leaf,
                             target_primed_weights=target_primed, g_norms=norms)


def build_leaf_similarity(operator: ShiftOperator, window: TreeWindow) -> SimilarityWitness:
    """Similarity of a Br=1 shift with a primed leaf to the direct sum of a
    spine shift and a nilpotent block on the primed ray."""
    model = _require_comb(operator, need_leaf=True)
    k0 = model.primed_leaf
    norms = {k: g_norm(operator, k) for k in range(0, k0 + 1)}
    norms[0] = 1.0
    witness = _witness(operator, window, "leaf-similarity", "similar", None, k0,
                       norms, model.unprimed_leaf)
    return witness


def build_tilde_quasiaffinity(operator: ShiftOperator, window: TreeWindow,
                              horizon: int = 64) -> SimilarityWitness:
    """Quasiaffinity (always) or similarity (bounded ratios) of a leafless
    Br=1 shift to the direct sum of a bilateral and a unilateral shift."""
    _require_comb(operator, need_leaf=False)
    norm = operator.operator_norm(window)
    if norm.value > 1.0 + 1e-12:
        raise NotAContraction(norm.value)
    primed_max = max((lvl for lvl in window.levels() if f"{lvl}'" in window), default=0)
    if primed_max < 1:
        raise ShapeMismatch("window does not reach the primed ray")
    cert = ratio_bounded(operator, horizon=max(horizon, primed_max))
    mode = "similar" if cert.status == "bounded" else "quasiaffine-only"
    norms = {k: g_norm(operator, k) for k in range(0, primed_max + 1)}
    norms[0] = 1.0
    return _witness(operator, window, "tilde-quasiaffinity", mode, cert, primed_max,
                    norms, None)


@dataclass
class Decomposition:
    e_part: SparseVector
    g_part: SparseVector
    mu: dict
    nu: dict
    residual: float


def direct_sum_decomposition(x: SparseVector, operator: ShiftOperator) -> Decomposition:
    """Split x into a spine part and a g-span part on the tilde shape.

    mu_k is the coefficient against the normalized g_k; nu_n the remaining
    spine coefficient.  Reconstruction is exact on finite supports.
    """
    _require_comb(operator, need_leaf=False)
    kmax = 0
    for u in x.support():
        idx = int(u[:-1]) if u.endswith("'") else int(u)
        kmax = max(kmax, abs(idx))
    spine, primed = ray_products(operator, kmax)

    mu, nu = {}, {}
    g_part = SparseVector()
    e_part = SparseVector()
    for k in range(1, kmax + 1):
        xi_p = x[f"{k}'"]
        xi_k = x[str(k)]
        norm_k = math.hypot(1.0 / spine[k], 1.0 / primed[k])
        mu_k = -xi_p * norm_k * primed[k]
        nu_k = xi_k + (primed[k] / spine[k]) * xi_p
        if mu_k != 0.0:
            mu[k] = mu_k
            g_part.add_scaled(g_vector(operator, k), mu_k / norm_k)
        if nu_k != 0.0:
            nu[k] = nu_k
            e_part.coeffs[str(k)] = nu_k
    for u, c in x.items():
        if not u.endswith("'") and int(u) <= 0:
            nu[int(u)] = c
            e_part.coeffs[u] = c
    residual = (x - (e_part + g_part)).norm()
    return Decomposition(e_part, g_part, mu, nu, residual)


def witness_to_json_line(witness: SimilarityWitness) -> str:
    return json.dumps(witness.to_json())

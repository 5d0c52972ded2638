"""Asymptotic limits of a contractive weighted shift and of its adjoint.

Forward side: each basis vector e_u is an eigenvector of the limit of
S*^n S^n, with eigenvalue the limit of the monotone nonincreasing partial
sums s_n(u) = sum over Chi^n(u) of the squared weight products down from u.
Monotonicity means every partial sum is a certified upper bound; lower
bounds do not exist in general, so convergence is reported as a status, not
silently assumed:

* ``exact-zero``  -- the descendant frontier died out (finite trees, leaves)
* ``exact-one``   -- family-certified isometry, all limits are exactly 1
* ``converged``   -- three consecutive partial-sum decrements below tol
* ``max-depth``   -- depth or frontier budget exhausted; the estimate is
                     still an upper bound

Adjoint side: the limit of S^n S*^n has one eigenvector per level, the
vector h_u supported on the generation of u with infinite-product
coefficients; its squared norm a_u is estimated from truncated products over
the materialized generation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import NotAContraction, StructuralViolation
from .sparse import SparseVector
from .shifts import CONTRACTION_SLACK, ShiftOperator
from .trees import BilateralPath, CombTree, FiniteTree, RootedPath, TreeWindow

DEFAULT_TOL = 1e-10
DEFAULT_MAX_DEPTH = 64
DEFAULT_ZERO_THRESHOLD = 1e-9
DEFAULT_ONE_THRESHOLD = 1e-6
FRONTIER_CAP = 4096
CONSECUTIVE_SMALL = 3

CONVERGED = "converged"
MAX_DEPTH = "max-depth"
EXACT_ZERO = "exact-zero"
EXACT_ONE = "exact-one"

_SETTLED = (CONVERGED, EXACT_ZERO, EXACT_ONE)


@dataclass
class VertexEstimate:
    vertex: str
    estimate: float
    upper: float
    status: str
    depth: int

    def settled(self) -> bool:
        return self.status in _SETTLED

    def to_json(self):
        return {"vertex": self.vertex, "estimate": self.estimate, "upper": self.upper,
                "status": self.status, "depth": self.depth}


class AlphaEvaluator:
    """Cached per-vertex evaluation of the forward limit eigenvalues."""

    def __init__(self, operator: ShiftOperator, tol: float = DEFAULT_TOL,
                 max_depth: int = DEFAULT_MAX_DEPTH, frontier_cap: int = FRONTIER_CAP):
        self.operator = operator
        self.tol = tol
        self.max_depth = max_depth
        self.frontier_cap = frontier_cap
        self.isometry = operator.is_certified_isometry()
        self._cache: dict[str, VertexEstimate] = {}

    def __call__(self, u: str) -> VertexEstimate:
        hit = self._cache.get(u)
        if hit is None:
            hit = self._compute(u)
            self._cache[u] = hit
        return hit

    def _compute(self, u: str) -> VertexEstimate:
        if self.isometry:
            return VertexEstimate(u, 1.0, 1.0, EXACT_ONE, 0)
        op = self.operator
        model = op.model
        # Flat unit-weight prefixes keep the partial sums exactly constant, so
        # convergence may not be declared before the frontier has passed them.
        min_depth = CONSECUTIVE_SMALL + 5
        floor = op.weights.convergence_floor_level(model)
        if floor is not None:
            min_depth = max(min_depth, floor - model.level(u) + CONSECUTIVE_SMALL + 2)
        frontier = {u: 1.0}
        s_prev = 1.0
        consecutive = 0
        for n in range(1, self.max_depth + 1):
            nxt: dict[str, float] = {}
            for w, prod in frontier.items():
                for v in model.children(w):
                    nxt[v] = prod * op.weight(v) ** 2
            if not nxt:
                return VertexEstimate(u, 0.0, 0.0, EXACT_ZERO, n)
            s = sum(nxt.values())
            if s > s_prev + 1e-12:
                raise NotAContraction(s)  # partial sums must be nonincreasing
            if abs(s - s_prev) < self.tol:
                consecutive += 1
                if consecutive >= CONSECUTIVE_SMALL and n >= min_depth:
                    return VertexEstimate(u, s, s, CONVERGED, n)
            else:
                consecutive = 0
            frontier = nxt
            s_prev = s
            if len(frontier) > self.frontier_cap:
                break
        return VertexEstimate(u, s_prev, s_prev, MAX_DEPTH, self.max_depth)


@dataclass
class AsymptoticProfile:
    """Per-window-vertex estimates of the forward (alpha) or adjoint (a) limits."""

    kind: str  # "forward" | "adjoint"
    records: dict
    window: TreeWindow
    tol: float
    contraction_certified: bool
    evaluator: AlphaEvaluator | None = None

    def record(self, u: str) -> VertexEstimate:
        return self.records[u]

    def estimate(self, u: str) -> float:
        return self.records[u].estimate

    def all_settled(self) -> bool:
        return all(r.settled() for r in self.records.values())

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(self.records[u].to_json()) for u in self.window.order)


def _require_contraction(operator: ShiftOperator, window: TreeWindow):
    norm = operator.operator_norm(window)
    if norm.value > 1.0 + CONTRACTION_SLACK:
        raise NotAContraction(norm.value)
    return norm


def alpha_profile(operator: ShiftOperator, window: TreeWindow, tol: float = DEFAULT_TOL,
                  max_depth: int = DEFAULT_MAX_DEPTH,
                  evaluator: AlphaEvaluator | None = None) -> AsymptoticProfile:
    """Forward limit eigenvalue for every window vertex."""
    norm = _require_contraction(operator, window)
    if evaluator is None:
        evaluator = AlphaEvaluator(operator, tol, max_depth)
    records = {u: evaluator(u) for u in window.order}
    return AsymptoticProfile("forward", records, window, tol, norm.certified, evaluator)


@dataclass
class StableSubtree:
    """Window view of the subtree carrying the non-stable part of the space."""

    members: set
    window: TreeWindow
    zero_threshold: float
    branching: tuple  # (value, exact)
    model: object

    def __contains__(self, u):
        return u in self.members

    def members_at(self, lvl):
        return [u for u in self.window.vertices_at(lvl) if u in self.members]

    def children_in(self, u):
        return [v for v in self.model.children(u) if v in self.members]


def _stable_branching(profile: AsymptoticProfile, members: set):
    model = profile.window.model
    count = 0
    for u in members:
        kids = [v for v in model.children(u) if v in members]
        if len(kids) > 1:
            count += len(kids) - 1
    if isinstance(model, FiniteTree):
        return (count, True)
    symbolic = model.branching_total()
    if members == set(profile.window.order) and symbolic is not None:
        if profile.all_settled() or symbolic[0] == 0:
            return symbolic
    if isinstance(model, (RootedPath, BilateralPath)):
        return (0, True)
    if isinstance(model, CombTree):
        # The only candidate branch vertex is "0"; its membership pattern is
        # visible whenever the window contains it.
        if "0" in profile.window:
            return (count, True)
    return (count, False)


def stable_subtree(profile: AsymptoticProfile,
                   zero_threshold: float = DEFAULT_ZERO_THRESHOLD) -> StableSubtree:
    """Vertices with forward limit above the threshold, with the structural
    laws (parent-closed, leafless, root-preserving) asserted on the window."""
    window = profile.window
    model = window.model
    members = {u for u in window.order if profile.estimate(u) > zero_threshold}

    for u in members:
        p = model.parent(u)
        if p is not None and p in window and p not in members:
            raise StructuralViolation("parent-closed", u)
    interior = set(window.forward_interior())
    for u in members & interior:
        if not any(v in members for v in model.children(u)):
            raise StructuralViolation("leafless", u)
    if model.is_rooted and members and model.root in window and model.root not in members:
        raise StructuralViolation("root-preserving", model.root)

    return StableSubtree(members, window, zero_threshold,
                         _stable_branching(profile, members), model)


@dataclass
class HVector:
    """Adjoint-limit eigenvector of one level: truncated-product coefficients
    over the materialized generation."""

    level: int
    coefficients: SparseVector
    norm_sq: float
    status: str
    depth: int
    gen_exact: bool


def _generation_complete(model, anchor_level: int) -> bool:
    """True when no branch vertex can appear above the current anchor."""
    if isinstance(model, (RootedPath, BilateralPath)):
        return True
    if isinstance(model, CombTree):
        return anchor_level <= 0
    return False


def _adjoint_level(operator: ShiftOperator, u: str, depth: int, tol: float,
                   frontier_cap: int):
    """(estimate record, HVector) for the level of u on a rootless model."""
    model = operator.model
    members = [u]
    anchor = u
    gen_exact = _generation_complete(model, model.level(u))
    for d in range(1, depth + 1):
        parent = model.parent(anchor)
        if parent is None:
            break
        siblings = [v for v in model.children(parent) if v != anchor]
        new = dict.fromkeys(siblings)
        for _ in range(d - 1):
            grown: dict[str, None] = {}
            for w in new:
                for v in model.children(w):
                    grown[v] = None
            new = grown
            if len(members) + len(new) > frontier_cap:
                break
        if len(members) + len(new) > frontier_cap:
            anchor = parent
            break
        members.extend(new)
        anchor = parent
        if _generation_complete(model, model.level(anchor)):
            gen_exact = True
            break

    # Extend every ancestor product to the full depth; record the partial
    # sums to certify convergence of the product tails.
    chains = {}
    for v in members:
        prods = []
        prod = 1.0
        w = v
        for _ in range(depth):
            prod *= operator.weight(w) ** 2
            prods.append(prod)
            w = model.parent(w)
            if w is None:
                break
        chains[v] = prods
    sums = []
    for d in range(depth):
        sums.append(sum(p[min(d, len(p) - 1)] for p in chains.values()))
    consecutive = 0
    tail_ok = False
    for d in range(1, len(sums)):
        if abs(sums[d] - sums[d - 1]) < tol:
            consecutive += 1
            if consecutive >= CONSECUTIVE_SMALL:
                tail_ok = True
        else:
            consecutive = 0
    estimate = sums[-1] if sums else 0.0
    status = CONVERGED if (gen_exact and tail_ok) else MAX_DEPTH
    coeffs = SparseVector({v: math.sqrt(chains[v][-1]) for v in members})
    lvl = model.level(u)
    h = HVector(lvl, coeffs, estimate, status, depth, gen_exact)
    return VertexEstimate(u, estimate, estimate if gen_exact else 1.0, status, depth), h


@dataclass
class AdjointAsymptotics:
    profile: AsymptoticProfile
    h_vectors: dict  # level -> HVector
    rooted_certified: bool = False


ADJOINT_GEN_CAP = 512


def adjoint_profile(operator: ShiftOperator, window: TreeWindow,
                    depth: int = DEFAULT_MAX_DEPTH, tol: float = DEFAULT_TOL,
                    frontier_cap: int = ADJOINT_GEN_CAP) -> AdjointAsymptotics:
    """Adjoint limit eigenvalues a_u per level, plus the h eigenvectors.

    Rooted trees are certified stable with no numerics.  Rootless ones get
    one computation per window level (the vectors and values are constant
    along a level by construction).
    """
    norm = _require_contraction(operator, window)
    model = window.model
    if model.is_rooted:
        records = {u: VertexEstimate(u, 0.0, 0.0, EXACT_ZERO, 0) for u in window.order}
        prof = AsymptoticProfile("adjoint", records, window, tol, norm.certified)
        return AdjointAsymptotics(prof, {}, rooted_certified=True)

    records = {}
    h_by_level = {}
    for lvl in window.levels():
        rep = window.vertices_at(lvl)[0]
        rec, h = _adjoint_level(operator, rep, depth, tol, frontier_cap)
        h_by_level[lvl] = h
        for u in window.vertices_at(lvl):
            records[u] = VertexEstimate(u, rec.estimate, rec.upper, rec.status, rec.depth)
    prof = AsymptoticProfile("adjoint", records, window, tol, norm.certified)
    return AdjointAsymptotics(prof, h_by_level)


@dataclass
class ClassificationC:
    """Forward/adjoint asymptotic class with per-claim provenance."""

    forward: str  # C0dot | C1dot | mixed | undetermined
    adjoint: str  # Cdot0 | Cdot1 | mixed | undetermined
    forward_certified: bool
    adjoint_certified: bool
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"forward": self.forward, "adjoint": self.adjoint,
                "forward_certified": self.forward_certified,
                "adjoint_certified": self.adjoint_certified, "notes": list(self.notes)}


def _categorize(records, zero_threshold, one_threshold):
    cats = {}
    certified = True
    for u, r in records.items():
        if r.status == EXACT_ONE:
            cats[u] = "one"
        elif r.status == EXACT_ZERO:
            cats[u] = "zero"
        elif r.estimate <= zero_threshold:
            # The estimate is an upper bound, so smallness is one-sided safe.
            cats[u] = "zero"
            certified = False
        elif r.estimate >= one_threshold and r.status == CONVERGED:
            cats[u] = "one"
            certified = False
        else:
            cats[u] = "undetermined"
            certified = False
    return cats, certified


def _classify_side(records, zero_threshold, one_threshold):
    cats, certified = _categorize(records, zero_threshold, one_threshold)
    values = set(cats.values())
    if "undetermined" in values:
        return "undetermined", False
    if values == {"one"}:
        return "one", certified
    if values <= {"zero"}:
        return "zero", certified
    return "mixed", certified


def classify(operator: ShiftOperator, forward: AsymptoticProfile,
             adjoint: AdjointAsymptotics,
             zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
             one_threshold: float = DEFAULT_ONE_THRESHOLD) -> ClassificationC:
    notes = []
    fwd_side, fwd_cert = _classify_side(forward.records, zero_threshold, one_threshold)
    fwd = {"one": "C1dot", "zero": "C0dot"}.get(fwd_side, fwd_side)
    notes.append(f"forward: {fwd} ({'certified' if fwd_cert else 'numerical'})")

    if adjoint.rooted_certified:
        adj, adj_cert = "Cdot0", True
        notes.append("adjoint: Cdot0 (certified: rooted tree)")
    else:
        adj_side, adj_cert = _classify_side(adjoint.profile.records, zero_threshold,
                                            one_threshold)
        adj = {"one": "Cdot1", "zero": "Cdot0"}.get(adj_side, adj_side)
        notes.append(f"adjoint: {adj} ({'certified' if adj_cert else 'numerical'})")
    return ClassificationC(fwd, adj, fwd_cert, adj_cert, notes)

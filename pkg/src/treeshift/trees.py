"""Directed tree models: finite explicit trees and procedural (lazily generated) families.

A directed tree is a connected directed graph in which every vertex has at
most one parent and there is no directed circuit.  Finite models validate
these conditions exhaustively; procedural families guarantee them by
construction and expose pure ``children``/``parent`` queries so that the
infinite vertex set never has to be materialized.  All numeric work happens
on a :class:`TreeWindow`, a finite, parent-closed slab of consecutive levels.

Vertex ids are strings.  Procedural families use structured tokens:

* path / spine vertices: the level as a decimal integer, e.g. ``"-3"``
* the primed ray of the tilde/comb families: ``"4'"`` for the vertex four
  steps below the branching vertex ``"0"``
* off-spine vertices of the rootless binary tree: ``"m:w"`` where ``m`` is
  the spine level the vertex hangs off and ``w`` is a binary word starting
  with ``"1"`` (the spine child of ``"m"`` is ``"m+1"``, its sibling is
  ``"m:1"``).
"""

from __future__ import annotations

import json
import math
from collections import deque

from .errors import (
    CircuitFound,
    DisconnectedGraph,
    MultipleParents,
    RootMismatch,
    VertexNotFound,
)

INFINITE = math.inf

FAMILY_TAGS = ("rooted-path", "bilateral-path", "rootless-binary", "tilde", "comb")


def _is_primed(v: str) -> bool:
    return v.endswith("'")


def _primed_index(v: str) -> int:
    return int(v[:-1])


class DirectedTreeModel:
    """Query contract shared by finite and procedural models."""

    kind = "abstract"
    family = None

    def children(self, u: str) -> tuple[str, ...]:
        raise NotImplementedError

    def parent(self, u: str):
        raise NotImplementedError

    def __contains__(self, u: str) -> bool:
        raise NotImplementedError

    @property
    def is_rooted(self) -> bool:
        raise NotImplementedError

    @property
    def root(self):
        return None

    def level(self, u: str) -> int:
        """Integer level; 0 at the root (rooted) or the family base vertex."""
        raise NotImplementedError

    def spine_vertex(self, lvl: int):
        """Canonical vertex at a level, used to seed windows.  None if absent."""
        raise NotImplementedError

    def branching_total(self):
        """(Br(T), exact) when the family determines it symbolically, else None."""
        return None

    def leaf_set(self):
        """Symbolically known leaf set, or None when only windows can tell."""
        return None

    def max_children(self) -> int:
        raise NotImplementedError

    def require_vertex(self, u: str):
        if u not in self:
            raise VertexNotFound(u)

    def describe(self) -> str:
        rooted = "rooted" if self.is_rooted else "rootless"
        br = self.branching_total()
        br_txt = "?" if br is None else ("inf" if br[0] == INFINITE else str(br[0]))
        return f"{self.kind}({self.family or 'finite'}): {rooted}, Br={br_txt}"


class FiniteTree(DirectedTreeModel):
    """Explicit finite directed tree, always rooted (finite trees cannot be rootless)."""

    kind = "finite"

    def __init__(self, vertices, parent_map, root):
        self._vertices = set(vertices)
        self._parent = dict(parent_map)
        self._root = root
        kids: dict[str, list[str]] = {v: [] for v in self._vertices}
        for v, p in self._parent.items():
            kids[p].append(v)
        self._children = {u: tuple(sorted(vs)) for u, vs in kids.items()}
        self._level = {root: 0}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self._children[u]:
                self._level[v] = self._level[u] + 1
                queue.append(v)

    def children(self, u):
        self.require_vertex(u)
        return self._children[u]

    def parent(self, u):
        self.require_vertex(u)
        return self._parent.get(u)

    def __contains__(self, u):
        return u in self._vertices

    @property
    def is_rooted(self):
        return True

    @property
    def root(self):
        return self._root

    def level(self, u):
        self.require_vertex(u)
        return self._level[u]

    def spine_vertex(self, lvl):
        at = sorted(v for v, l in self._level.items() if l == lvl)
        return at[0] if at else None

    def vertices(self):
        return sorted(self._vertices, key=lambda v: (self._level[v], v))

    def depth(self) -> int:
        return max(self._level.values())

    def branching_total(self):
        total = sum(len(c) - 1 for c in self._children.values() if len(c) > 1)
        return (total, True)

    def leaf_set(self):
        return {u for u in self._vertices if not self._children[u]}

    def max_children(self):
        return max((len(c) for c in self._children.values()), default=0)


def validate_finite(vertices, edges, declared_root=None) -> FiniteTree:
    """Check connectivity, unique parents and circuit-freeness; return the model.

    Raises DisconnectedGraph, MultipleParents, CircuitFound or RootMismatch.
    """
    verts = list(dict.fromkeys(vertices))
    if not verts:
        raise ValueError("vertex list is empty")
    vset = set(verts)
    parent: dict[str, str] = {}
    for u, v in dict.fromkeys(tuple(e) for e in edges):
        if u not in vset or v not in vset:
            raise VertexNotFound(u if u not in vset else v)
        if u == v:
            raise CircuitFound([u, v])
        if v in parent and parent[v] != u:
            raise MultipleParents(v)
        parent[v] = u

    # Circuit detection: walk parent chains with a three-color sweep.
    state = {v: 0 for v in verts}  # 0 unseen, 1 on current chain, 2 done
    for start in verts:
        if state[start]:
            continue
        chain = []
        u = start
        while u is not None and state[u] == 0:
            state[u] = 1
            chain.append(u)
            u = parent.get(u)
        if u is not None and state[u] == 1:
            cycle = chain[chain.index(u):]
            raise CircuitFound(cycle + [u])
        for w in chain:
            state[w] = 2

    roots = [v for v in verts if v not in parent]
    if len(roots) != 1:
        raise DisconnectedGraph(f"found {len(roots)} parentless vertices: {sorted(roots)[:4]}")
    root = roots[0]

    # Connectivity: every vertex must reach the unique root along parents.
    for v in verts:
        u = v
        seen = 0
        while u != root:
            u = parent.get(u)
            seen += 1
            if u is None or seen > len(verts):
                raise DisconnectedGraph(f"vertex {v!r} does not reach the root")

    if declared_root is not None and declared_root != root:
        raise RootMismatch(declared_root, root)
    return FiniteTree(verts, parent, root)


class RootedPath(DirectedTreeModel):
    """Z+ with root 0 and edges (n, n+1)."""

    kind = "procedural"
    family = "rooted-path"

    def children(self, u):
        self.require_vertex(u)
        return (str(int(u) + 1),)

    def parent(self, u):
        self.require_vertex(u)
        n = int(u)
        return None if n == 0 else str(n - 1)

    def __contains__(self, u):
        try:
            return int(u) >= 0
        except ValueError:
            return False

    @property
    def is_rooted(self):
        return True

    @property
    def root(self):
        return "0"

    def level(self, u):
        self.require_vertex(u)
        return int(u)

    def spine_vertex(self, lvl):
        return str(lvl) if lvl >= 0 else None

    def branching_total(self):
        return (0, True)

    def leaf_set(self):
        return set()

    def max_children(self):
        return 1


class BilateralPath(DirectedTreeModel):
    """Z with edges (n, n+1); rootless, leafless; level-0 base is vertex 0."""

    kind = "procedural"
    family = "bilateral-path"

    def children(self, u):
        self.require_vertex(u)
        return (str(int(u) + 1),)

    def parent(self, u):
        self.require_vertex(u)
        return str(int(u) - 1)

    def __contains__(self, u):
        try:
            int(u)
            return True
        except ValueError:
            return False

    @property
    def is_rooted(self):
        return False

    def level(self, u):
        self.require_vertex(u)
        return int(u)

    def spine_vertex(self, lvl):
        return str(lvl)

    def branching_total(self):
        return (0, True)

    def leaf_set(self):
        return set()

    def max_children(self):
        return 1


class CombTree(DirectedTreeModel):
    """Rootless Br=1 family: an integer spine plus one primed ray off vertex 0.

    ``primed_leaf=k0`` ends the primed ray at the leaf ``k0'``;
    ``unprimed_leaf=j0`` (requires ``j0 >= k0``) ends the spine at the leaf
    ``j0``.  With both None this is the leafless tree with vertex set
    Z u {k': k >= 1} and the extra edge (0, 1').
    """

    kind = "procedural"
    family = "comb"

    def __init__(self, primed_leaf=None, unprimed_leaf=None):
        if primed_leaf is not None and primed_leaf < 1:
            raise ValueError("primed_leaf must be >= 1")
        if unprimed_leaf is not None:
            if primed_leaf is None:
                raise ValueError("an unprimed leaf requires a primed leaf (canonical labelling)")
            if unprimed_leaf < primed_leaf:
                raise ValueError("unprimed_leaf must be >= primed_leaf")
        self.primed_leaf = primed_leaf
        self.unprimed_leaf = unprimed_leaf

    def children(self, u):
        self.require_vertex(u)
        if _is_primed(u):
            k = _primed_index(u)
            if self.primed_leaf is not None and k >= self.primed_leaf:
                return ()
            return (f"{k + 1}'",)
        n = int(u)
        if self.unprimed_leaf is not None and n >= self.unprimed_leaf:
            return ()
        if n == 0:
            return ("1", "1'")
        return (str(n + 1),)

    def parent(self, u):
        self.require_vertex(u)
        if _is_primed(u):
            k = _primed_index(u)
            return "0" if k == 1 else f"{k - 1}'"
        return str(int(u) - 1)

    def __contains__(self, u):
        if _is_primed(u):
            try:
                k = _primed_index(u)
            except ValueError:
                return False
            return k >= 1 and (self.primed_leaf is None or k <= self.primed_leaf)
        try:
            n = int(u)
        except ValueError:
            return False
        return self.unprimed_leaf is None or n <= self.unprimed_leaf

    @property
    def is_rooted(self):
        return False

    def level(self, u):
        self.require_vertex(u)
        return _primed_index(u) if _is_primed(u) else int(u)

    def spine_vertex(self, lvl):
        if self.unprimed_leaf is not None and lvl > self.unprimed_leaf:
            return None
        return str(lvl)

    def branching_total(self):
        return (1, True)

    def leaf_set(self):
        out = set()
        if self.primed_leaf is not None:
            out.add(f"{self.primed_leaf}'")
        if self.unprimed_leaf is not None:
            out.add(str(self.unprimed_leaf))
        return out

    def max_children(self):
        return 2


class TildeTree(CombTree):
    """The leafless Br=1 comb: integer spine and an infinite primed ray."""

    family = "tilde"

    def __init__(self):
        super().__init__(None, None)


class RootlessBinary(DirectedTreeModel):
    """Rootless tree with |Chi(u)| = 2 everywhere; spine indexed by Z."""

    kind = "procedural"
    family = "rootless-binary"

    @staticmethod
    def _parse(u):
        if ":" in u:
            m, w = u.split(":", 1)
            return int(m), w
        return int(u), ""

    def children(self, u):
        self.require_vertex(u)
        m, w = self._parse(u)
        if not w:
            return (str(m + 1), f"{m}:1")
        return (f"{m}:{w}0", f"{m}:{w}1")

    def parent(self, u):
        self.require_vertex(u)
        m, w = self._parse(u)
        if not w:
            return str(m - 1)
        if len(w) == 1:
            return str(m)
        return f"{m}:{w[:-1]}"

    def __contains__(self, u):
        try:
            m, w = self._parse(u)
        except ValueError:
            return False
        if not w:
            return True
        return w[0] == "1" and all(c in "01" for c in w)

    @property
    def is_rooted(self):
        return False

    def level(self, u):
        self.require_vertex(u)
        m, w = self._parse(u)
        return m + len(w)

    def spine_vertex(self, lvl):
        return str(lvl)

    def branching_total(self):
        return (INFINITE, True)

    def leaf_set(self):
        return set()

    def max_children(self):
        return 2


def make_family(tag: str, params: dict | None = None) -> DirectedTreeModel:
    params = params or {}
    if tag == "rooted-path":
        return RootedPath()
    if tag == "bilateral-path":
        return BilateralPath()
    if tag == "rootless-binary":
        return RootlessBinary()
    if tag == "tilde":
        return TildeTree()
    if tag == "comb":
        return CombTree(params.get("primed_leaf"), params.get("unprimed_leaf"))
    raise ValueError(f"unknown family {tag!r}; expected one of {FAMILY_TAGS}")


def tree_from_json(doc) -> DirectedTreeModel:
    """Build a model from the JSON input schema (finite or procedural)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if "family" in doc:
        return make_family(doc["family"], doc.get("params"))
    return validate_finite(doc["vertices"], doc["edges"], doc.get("root"))


def load_tree(path) -> DirectedTreeModel:
    with open(path) as fh:
        return tree_from_json(json.load(fh))


class TreeWindow:
    """Finite, parent-closed slab of a tree between two levels.

    Vertices are kept in the canonical dense-truncation order: level-major,
    then id-lexicographic.
    """

    def __init__(self, model, level_lo, level_hi, breadth, ordered):
        self.model = model
        self.level_lo = level_lo
        self.level_hi = level_hi
        self.breadth = breadth
        self.order = list(ordered)
        self._index = {v: i for i, v in enumerate(self.order)}
        self._levels = {v: model.level(v) for v in self.order}
        self.by_level: dict[int, list[str]] = {}
        for v in self.order:
            self.by_level.setdefault(self._levels[v], []).append(v)

    def __contains__(self, u):
        return u in self._index

    def __len__(self):
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def index_of(self, u) -> int:
        if u not in self._index:
            raise VertexNotFound(u)
        return self._index[u]

    def level_of(self, u) -> int:
        if u not in self._levels:
            raise VertexNotFound(u)
        return self._levels[u]

    def levels(self):
        return sorted(self.by_level)

    def vertices_at(self, lvl):
        return list(self.by_level.get(lvl, ()))

    def forward_interior(self):
        """Vertices whose full children set is materialized in the window."""
        out = []
        for u in self.order:
            if all(v in self._index for v in self.model.children(u)):
                out.append(u)
        return out

    def top_boundary(self):
        """Window vertices whose parent exists in the model but not in the window."""
        out = []
        for u in self.order:
            p = self.model.parent(u)
            if p is not None and p not in self._index:
                out.append(u)
        return out

    def check_parent_closed(self):
        for u in self.order:
            p = self.model.parent(u)
            if p is not None and self.model.level(p) >= self.level_lo and p not in self._index:
                return False
        return True


def materialize_window(model, level_lo, level_hi, breadth=64) -> TreeWindow:
    """BFS a window downward from the canonical seed at ``level_lo``.

    Per-level breadth is clamped on the children side only, so the window is
    parent-closed by construction.  For finite trees the seed is every vertex
    of the lowest populated level in range.
    """
    if level_lo > level_hi:
        raise ValueError("window level range is empty")
    if breadth < 1:
        raise ValueError("breadth cap must be positive")

    if isinstance(model, FiniteTree):
        lvl = max(level_lo, 0)
        current: list[str] = []
        while lvl <= level_hi and not current:
            current = sorted(v for v in model.vertices() if model.level(v) == lvl)
            if not current:
                lvl += 1
    else:
        lvl = max(level_lo, 0) if model.is_rooted else level_lo
        seed = model.spine_vertex(lvl)
        if seed is None or lvl > level_hi:
            raise VertexNotFound(f"window [{level_lo},{level_hi}] contains no vertices")
        current = [seed]

    collected: list[str] = []
    current = current[:breadth]
    while current and lvl <= level_hi:
        collected.extend(current)
        nxt: list[str] = []
        for u in current:
            nxt.extend(model.children(u))
        current = sorted(set(nxt))[:breadth]
        lvl += 1
    if not collected:
        raise VertexNotFound(f"window [{level_lo},{level_hi}] contains no vertices")
    collected.sort(key=lambda v: (model.level(v), v))
    return TreeWindow(model, level_lo, level_hi, breadth, collected)


def chi_n(model, verts, n: int) -> set:
    """n-fold children image of a finite vertex set; chi_0 is the identity."""
    if n < 0:
        raise ValueError("n must be >= 0")
    current = set(verts)
    for _ in range(n):
        nxt = set()
        for u in current:
            nxt.update(model.children(u))
        current = nxt
        if not current:
            break
    return current


def gen_n(model, u: str, n: int) -> set:
    """n-th generation of u: union over j <= n of Chi^j(Par^j(u)).

    Terms with a nonexistent j-fold parent are skipped, so the result always
    contains u itself.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    model.require_vertex(u)
    out = {u}
    anc = u
    for j in range(1, n + 1):
        anc = model.parent(anc)
        if anc is None:
            break
        out |= chi_n(model, {anc}, j)
    return out


def level_index(model, u: str) -> int:
    return model.level(u)


def branching_index(model, window: TreeWindow | None = None):
    """Branching index Br(T) = sum over vertices of (children count - 1)+.

    Returns (value, exact).  Finite models and the built-in families are
    exact; otherwise the window-restricted partial sum is flagged inexact.
    """
    symbolic = model.branching_total()
    if symbolic is not None:
        return symbolic
    if window is None:
        raise ValueError("a window is required for models without a symbolic Br")
    partial = 0
    for u in window:
        c = len(model.children(u))
        if c > 1:
            partial += c - 1
    return (partial, False)


def leaves(model, window: TreeWindow | None = None) -> set:
    """Leaf set; symbolic for the built-in families, exact for finite models."""
    known = model.leaf_set()
    if known is not None:
        if window is not None:
            return {u for u in known if u in window}
        return set(known)
    if window is None:
        raise ValueError("a window is required for models without a symbolic leaf set")
    return {u for u in window if not model.children(u)}

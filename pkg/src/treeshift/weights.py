"""Weight assignments over the non-root vertices of a directed tree.

Two representations: an explicit per-vertex map (finite trees, or padded with
a default for procedural ones), and named parametric rules evaluated from the
vertex level, so infinite trees never need materialized weights.  All weights
are strictly positive; zero weights live only in the standalone backward-shift
type of the cyclicity module.
"""

from __future__ import annotations

import hashlib
import json
import math

from .errors import WeightError
from .trees import _is_primed, _primed_index


class WeightAssignment:
    kind = "abstract"

    def weight(self, model, v: str) -> float:
        raise NotImplementedError

    def max_weight(self):
        """Upper bound on any individual weight, or None when unbounded/unknown."""
        return None

    def convergence_floor_level(self, model):
        """Deepest level a descent must pass before flat partial sums are
        trusted: unit-weight prefixes produce exactly-zero decrements that a
        difference test cannot tell from convergence."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError

    def _check_non_root(self, model, v):
        if model.is_rooted and v == model.root:
            raise WeightError(f"the root {v!r} carries no weight")


class MapWeights(WeightAssignment):
    """Explicit map, optionally padded with a default beyond its support."""

    kind = "map"

    def __init__(self, values: dict, default: float | None = None):
        self.values = {k: float(c) for k, c in values.items()}
        for k, c in self.values.items():
            if c <= 0.0:
                raise WeightError(f"weight at {k!r} must be strictly positive, got {c}")
        if default is not None and default <= 0.0:
            raise WeightError("default weight must be strictly positive")
        self.default = default

    def weight(self, model, v):
        self._check_non_root(model, v)
        if v in self.values:
            return self.values[v]
        if self.default is None:
            raise WeightError(f"no weight assigned to vertex {v!r}")
        return self.default

    def max_weight(self):
        top = max(self.values.values(), default=0.0)
        if self.default is not None:
            top = max(top, self.default)
        return top

    def convergence_floor_level(self, model):
        if self.default is None or abs(self.default - 1.0) > 1e-15 or not self.values:
            return None
        return max(model.level(v) for v in self.values) + 1

    def to_json(self):
        doc = {"kind": "map", "values": dict(self.values)}
        if self.default is not None:
            doc["default"] = self.default
        return doc


class ConstantWeights(WeightAssignment):
    kind = "constant"

    def __init__(self, value: float):
        if value <= 0.0:
            raise WeightError("constant weight must be strictly positive")
        self.value = float(value)

    def weight(self, model, v):
        self._check_non_root(model, v)
        return self.value

    def max_weight(self):
        return self.value

    def to_json(self):
        return {"kind": "constant", "value": self.value}


class FamilyWeights(WeightAssignment):
    kind = "family"
    name = "abstract"

    def params(self) -> dict:
        raise NotImplementedError

    def to_json(self):
        return {"kind": "family", "name": self.name, "params": self.params()}


class ExpRayWeights(FamilyWeights):
    """lambda_v = exp(-base^(-level v)) for levels >= start_level, 1 below.

    On a single-child chain the forward limits have closed geometric-series
    exponents, so these weights make convenient certified C_{1.} instances.
    """

    name = "exp-ray"

    def __init__(self, base: float = 2.0, start_level: int = 1):
        if base <= 1.0:
            raise WeightError("exp-ray base must exceed 1")
        self.base = float(base)
        self.start_level = int(start_level)

    def weight(self, model, v):
        self._check_non_root(model, v)
        lvl = model.level(v)
        if lvl < self.start_level:
            return 1.0
        return math.exp(-self.base ** (-lvl))

    def max_weight(self):
        return 1.0

    def convergence_floor_level(self, model):
        return self.start_level

    def params(self):
        return {"base": self.base, "start_level": self.start_level}

    def tail_log_sum(self, from_level: int) -> float:
        """sum over l > from_level of log lambda at level l (single-child chain)."""
        m = max(from_level + 1, self.start_level)
        return -(self.base ** (-m)) * self.base / (self.base - 1.0)


class GeometricWeights(FamilyWeights):
    """lambda_v = scale * ratio^{|level v|}: geometric decay away from the base."""

    name = "geometric"

    def __init__(self, scale: float, ratio: float):
        if scale <= 0.0 or ratio <= 0.0:
            raise WeightError("geometric scale and ratio must be strictly positive")
        self.scale = float(scale)
        self.ratio = float(ratio)

    def weight(self, model, v):
        self._check_non_root(model, v)
        return self.scale * self.ratio ** abs(model.level(v))

    def max_weight(self):
        return self.scale if self.ratio <= 1.0 else None

    def params(self):
        return {"scale": self.scale, "ratio": self.ratio}


class StepWeights(FamilyWeights):
    """lambda_v = high for levels above the cut, low at and below it."""

    name = "step"

    def __init__(self, low: float, high: float, cut: int = 0):
        if low <= 0.0 or high <= 0.0:
            raise WeightError("step weights must be strictly positive")
        self.low = float(low)
        self.high = float(high)
        self.cut = int(cut)

    def weight(self, model, v):
        self._check_non_root(model, v)
        return self.high if model.level(v) > self.cut else self.low

    def max_weight(self):
        return max(self.low, self.high)

    def convergence_floor_level(self, model):
        return self.cut + 1 if abs(self.low - 1.0) <= 1e-15 else None

    def params(self):
        return {"low": self.low, "high": self.high, "cut": self.cut}


class RayWeights(FamilyWeights):
    """Per-ray constants for the tilde/comb shape, with optional overrides for
    the two children of the branching vertex."""

    name = "rays"

    def __init__(self, spine: float, primed: float,
                 branch_spine: float | None = None, branch_primed: float | None = None):
        for val in (spine, primed, branch_spine, branch_primed):
            if val is not None and val <= 0.0:
                raise WeightError("ray weights must be strictly positive")
        self.spine = float(spine)
        self.primed = float(primed)
        self.branch_spine = float(branch_spine) if branch_spine is not None else None
        self.branch_primed = float(branch_primed) if branch_primed is not None else None

    def weight(self, model, v):
        self._check_non_root(model, v)
        if _is_primed(v):
            if _primed_index(v) == 1 and self.branch_primed is not None:
                return self.branch_primed
            return self.primed
        if int(v) == 1 and self.branch_spine is not None:
            return self.branch_spine
        return self.spine

    def max_weight(self):
        vals = [self.spine, self.primed]
        if self.branch_spine is not None:
            vals.append(self.branch_spine)
        if self.branch_primed is not None:
            vals.append(self.branch_primed)
        return max(vals)

    def params(self):
        out = {"spine": self.spine, "primed": self.primed}
        if self.branch_spine is not None:
            out["branch_spine"] = self.branch_spine
        if self.branch_primed is not None:
            out["branch_primed"] = self.branch_primed
        return out


class BinarySpineWeights(FamilyWeights):
    """Isometric weights on the rootless binary tree with a distinguished spine.

    Spine vertices get exp(-1/(|l|+1)^2); the sibling of each spine child gets
    the complementary weight so every children-square-sum is exactly 1; all
    deeper off-spine vertices get 1/sqrt(2).  This isometry has a nontrivial
    unitary part because the spine products stay positive.
    """

    name = "binary-spine"

    def weight(self, model, v):
        self._check_non_root(model, v)
        if ":" not in v:
            l = int(v)
            return math.exp(-1.0 / (abs(l) + 1) ** 2)
        m, w = v.split(":", 1)
        if w == "1":
            spine_child = math.exp(-1.0 / (abs(int(m) + 1) + 1) ** 2)
            return math.sqrt(1.0 - spine_child * spine_child)
        return 1.0 / math.sqrt(2.0)

    def max_weight(self):
        return 1.0

    def params(self):
        return {}


class HashRandomWeights(FamilyWeights):
    """Deterministic pseudo-random weight per vertex, uniform in [low, high].

    The value is derived from a keyed blake2b digest of the vertex id, so it
    is reproducible across runs and independent of materialization order.
    """

    name = "hash-random"

    def __init__(self, seed: int, low: float, high: float):
        if not (0.0 < low <= high):
            raise WeightError("need 0 < low <= high")
        self.seed = int(seed)
        self.low = float(low)
        self.high = float(high)

    def weight(self, model, v):
        self._check_non_root(model, v)
        digest = hashlib.blake2b(f"{self.seed}:{v}".encode(), digest_size=8).digest()
        unit = int.from_bytes(digest, "big") / 2.0 ** 64
        return self.low + (self.high - self.low) * unit

    def max_weight(self):
        return self.high

    def params(self):
        return {"seed": self.seed, "low": self.low, "high": self.high}


_FAMILIES = {
    cls.name: cls
    for cls in (ExpRayWeights, GeometricWeights, StepWeights, RayWeights,
                BinarySpineWeights, HashRandomWeights)
}


def weights_from_json(doc) -> WeightAssignment:
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc.get("kind")
    if kind == "map":
        return MapWeights(doc["values"], doc.get("default"))
    if kind == "constant":
        return ConstantWeights(doc["value"])
    if kind == "family":
        name = doc.get("name")
        if name not in _FAMILIES:
            raise WeightError(f"unknown weight family {name!r}")
        return _FAMILIES[name](**doc.get("params", {}))
    raise WeightError(f"unknown weight kind {kind!r}")


def load_weights(path) -> WeightAssignment:
    with open(path) as fh:
        return weights_from_json(json.load(fh))

"""Shared helpers: seeded random finite trees and contractive weight maps."""

import random

import pytest

from treeshift.shifts import ShiftOperator
from treeshift.trees import FiniteTree, materialize_window, validate_finite
from treeshift.weights import MapWeights


def random_finite_tree(rng: random.Random, n: int) -> FiniteTree:
    """Random rooted tree on n vertices: each vertex hangs off an earlier one."""
    vertices = [f"v{i:03d}" for i in range(n)]
    edges = [(vertices[rng.randrange(i)], vertices[i]) for i in range(1, n)]
    return validate_finite(vertices, edges)


def random_weight_map(rng: random.Random, tree: FiniteTree, lo=0.05, hi=1.0) -> dict:
    return {v: rng.uniform(lo, hi) for v in tree.vertices() if v != tree.root}


def full_window(tree: FiniteTree):
    return materialize_window(tree, 0, tree.depth(), breadth=10 ** 6)


def contractive_operator(rng: random.Random, tree: FiniteTree) -> ShiftOperator:
    """Random weights rescaled so the operator norm sits just under 1."""
    values = random_weight_map(rng, tree, 0.2, 1.0)
    op = ShiftOperator(tree, MapWeights(values))
    norm = op.operator_norm(full_window(tree)).value
    scale = 0.999 / norm
    return ShiftOperator(tree, MapWeights({k: v * scale for k, v in values.items()}))


@pytest.fixture
def rng():
    return random.Random(20240817)

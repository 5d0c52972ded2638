"""Command-line front end: ingest tree and weight specs, run the analyses,
emit text or line-delimited JSON reports.

Exit codes: 0 ok, 2 structural violation, 3 not a contraction, 4 asymptote
precondition failed, 5 dimension cap, 6 shape mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import errors
from .asymptote import (
    adjoint_intertwining_residual,
    adjoint_isometric_asymptote,
    boundary_deficiency,
    intertwining_residual,
    isometric_asymptote,
    similar_to_coisometry,
    similar_to_isometry,
)
from .asymptotics import adjoint_profile, alpha_profile, classify, stable_subtree
from .cyclicity import (
    backward_spec_from_json,
    cokernel_dimension,
    construct_backward_cyclic,
    cyclicity_verdict,
    range_membership_report,
    verify_cyclic_candidate,
)
from .shifts import ShiftOperator, vector_to_dense
from .similarity import build_leaf_similarity, build_tilde_quasiaffinity
from .sparse import SparseVector
from .trees import branching_index, leaves, load_tree, materialize_window
from .weights import load_weights

EXIT_STRUCTURE = 2
EXIT_CONTRACTION = 3
EXIT_ASYMPTOTE = 4
EXIT_DIMENSION = 5
EXIT_SHAPE = 6

_STRUCTURE_ERRORS = (errors.DisconnectedGraph, errors.MultipleParents,
                     errors.CircuitFound, errors.RootMismatch, errors.VertexNotFound,
                     errors.WeightError, errors.StructuralViolation, ValueError,
                     KeyError, OSError)


class Reporter:
    def __init__(self, as_json: bool):
        self.as_json = as_json

    def record(self, kind: str, payload: dict):
        if self.as_json:
            print(json.dumps({"record": kind, **payload}, sort_keys=True))

    def text(self, line: str):
        if not self.as_json:
            print(line)


def _parse_levels(txt: str):
    lo, _, hi = txt.partition(":")
    return int(lo), int(hi)


def _window(args, model):
    lo, hi = _parse_levels(args.levels)
    return materialize_window(model, lo, hi, args.breadth)


def _branching_text(value):
    return "inf" if value == math.inf else str(int(value))


def cmd_validate(args, out: Reporter) -> int:
    model = load_tree(args.tree)
    window = _window(args, model)
    br, br_exact = branching_index(model, window)
    leafset = sorted(leaves(model, None if model.leaf_set() is not None else window))
    out.text(f"{model.describe()}")
    out.text(f"leaves: {leafset if leafset else 'none'}")
    out.text(f"window [{window.level_lo}:{window.level_hi}] has {len(window)} vertices")
    out.record("tree", {"kind": model.kind, "family": model.family,
                        "rooted": model.is_rooted, "root": model.root,
                        "leaves": leafset, "branching": _branching_text(br),
                        "branching_exact": br_exact, "window_size": len(window)})
    return 0


def _analysis(args, need_adjoint=True):
    model = load_tree(args.tree)
    weights = load_weights(args.weights)
    operator = ShiftOperator(model, weights)
    window = _window(args, model)
    profile = alpha_profile(operator, window, tol=args.tol, max_depth=args.depth)
    adjoint = adjoint_profile(operator, window, depth=args.depth, tol=args.tol) \
        if need_adjoint else None
    return model, operator, window, profile, adjoint


def cmd_analyze(args, out: Reporter) -> int:
    model, operator, window, profile, adjoint = _analysis(args)
    norm = operator.operator_norm(window)
    out.text(f"norm: {norm.value:.12g} ({'certified' if norm.certified else 'window only'})")
    out.text(f"contraction: {'yes' if norm.value <= 1.0 + 1e-12 else 'no'}")
    out.record("norm", {"value": norm.value, "window_value": norm.window_value,
                        "certified": norm.certified})
    out.text("forward limits:")
    for u in window.order:
        rec = profile.record(u)
        out.text(f"  alpha[{u}] = {rec.estimate:.12g} ({rec.status}, depth {rec.depth})")
        out.record("alpha", rec.to_json())
    stable = stable_subtree(profile, args.zero_th)
    br_value, br_exact = stable.branching
    out.text(f"stable subtree: {len(stable.members)}/{len(window)} window vertices, "
             f"Br(T')={_branching_text(br_value)}{'' if br_exact else ' (window partial)'}")
    out.record("stable-subtree", {"members": sorted(stable.members),
                                  "branching": _branching_text(br_value),
                                  "branching_exact": br_exact})
    out.text("adjoint limits (by level):")
    for lvl in window.levels():
        rep = adjoint.profile.record(window.vertices_at(lvl)[0])
        out.text(f"  a[level {lvl}] = {rep.estimate:.12g} ({rep.status})")
    for u in window.order:
        out.record("a", adjoint.profile.record(u).to_json())
    cls = classify(operator, profile, adjoint, zero_threshold=args.zero_th)
    out.text(f"classification: {cls.forward} / {cls.adjoint}")
    for note in cls.notes:
        out.text(f"  {note}")
    out.record("classification", cls.to_json())
    sim_iso = similar_to_isometry(operator, profile, args.zero_th)
    sim_co = similar_to_coisometry(operator, window, adjoint)
    out.text(f"similar to isometry: {sim_iso.answer} ({sim_iso.reason})")
    out.text(f"similar to co-isometry: {sim_co.answer} ({sim_co.reason})")
    out.record("similar-to-isometry", sim_iso.to_json())
    out.record("similar-to-coisometry", sim_co.to_json())
    return 0


def cmd_asymptote(args, out: Reporter) -> int:
    model, operator, window, profile, adjoint = _analysis(args, need_adjoint=False)
    stable = stable_subtree(profile, args.zero_th)
    descriptor = isometric_asymptote(operator, profile, stable, depth=args.depth)
    out.record("asymptote", descriptor.to_json())
    out.text(f"isometric asymptote: {descriptor.classification}, multiplicity "
             f"{_branching_text(descriptor.multiplicity)}")
    if descriptor.cnu_value is not None:
        out.text(f"cnu diagnostic: {descriptor.cnu_value:.6g}")
    for v in sorted(descriptor.beta):
        out.text(f"  beta[{v}] = {descriptor.beta[v]:.12g}")
    residual = intertwining_residual(operator, descriptor, profile, window)
    out.text(f"intertwining residual: {residual:.3e}")
    out.record("intertwining", {"residual": residual})
    return 0


def cmd_adjoint_asymptote(args, out: Reporter) -> int:
    model, operator, window, profile, adjoint = _analysis(args)
    descriptor = adjoint_isometric_asymptote(operator, adjoint, args.zero_th)
    out.record("adjoint-asymptote", descriptor.to_json())
    out.text(f"adjoint asymptote: {descriptor.shift_type}")
    for lvl in sorted(descriptor.coefficients):
        out.text(f"  level {lvl}: coefficient {descriptor.coefficients[lvl]:.12g}")
    residual = adjoint_intertwining_residual(operator, descriptor)
    out.text(f"intertwining residual: {residual:.3e}")
    out.record("intertwining", {"residual": residual})
    return 0


def cmd_cyclic(args, out: Reporter) -> int:
    if args.backward:
        with open(args.backward) as fh:
            spec = backward_spec_from_json(json.load(fh))
        verdict = cyclicity_verdict(spec, None)
        out.text(f"verdict: {verdict.verdict} [{verdict.rule}] {verdict.reason}")
        out.record("verdict", verdict.to_json())
        if not spec.zero_positions:
            candidate = construct_backward_cyclic(spec, args.schedule)
            record = verify_cyclic_candidate(spec, candidate, args.window_k,
                                             rank_tol=args.rank_tol)
            out.text(f"candidate verified: rank {record.rank}/{record.dimension}, "
                     f"residual {record.max_residual:.3e}")
            membership = range_membership_report(spec, candidate, 2)
            out.text(f"range membership partial sum (n=2): {membership:.6g}")
            out.record("krylov", {"rank": record.rank, "dimension": record.dimension,
                                  "residual": record.max_residual, "cyclic": record.cyclic,
                                  "range_membership_n2": membership})
            if args.json:
                for line in candidate.to_json_lines().splitlines():
                    print(line)
            else:
                for j, k, x in candidate.entries():
                    out.text(f"  f[{j},{k}] = {x:.12g}")
        return 0
    model, operator, window, profile, adjoint = _analysis(args)
    cls = classify(operator, profile, adjoint, zero_threshold=args.zero_th)
    verdict = cyclicity_verdict(model, cls, window)
    out.text(f"classification: {cls.forward} / {cls.adjoint}")
    out.text(f"verdict: {verdict.verdict} [{verdict.rule}] {verdict.reason}")
    for blocker in verdict.blockers:
        out.text(f"  blocker: {blocker}")
    out.record("verdict", verdict.to_json())
    return 0


def cmd_similarity(args, out: Reporter) -> int:
    model = load_tree(args.tree)
    weights = load_weights(args.weights)
    operator = ShiftOperator(model, weights)
    window = _window(args, model)
    if getattr(model, "primed_leaf", None) is not None:
        witness = build_leaf_similarity(operator, window)
    else:
        witness = build_tilde_quasiaffinity(operator, window)
    out.text(f"witness: {witness.kind}, mode {witness.mode}")
    out.text(f"intertwining residual: {witness.residual:.3e}")
    out.text(f"block inverse bound: {witness.block_inverse_bound():.6g}")
    if witness.ratio is not None:
        out.text(f"ratio certificate: {witness.ratio.to_json()}")
    out.record("witness", witness.to_json())
    return 0


def cmd_oracle(args, out: Reporter) -> int:
    """Dense-truncation cross-checks of the closed-form operations."""
    model = load_tree(args.tree)
    weights = load_weights(args.weights)
    operator = ShiftOperator(model, weights)
    window = _window(args, model)
    mat = operator.dense_truncation(window)

    interior = [u for u in window.forward_interior()]
    worst_apply = 0.0
    for u in interior:
        image = operator.apply(SparseVector.basis(u))
        dense = mat @ vector_to_dense(window, SparseVector.basis(u))
        worst_apply = max(worst_apply, float(np.max(np.abs(
            dense - vector_to_dense(window, image, strict=False)))))
    adj = float(np.max(np.abs(mat.T - operator.dense_truncation(window).T)))
    worst_power = 0.0
    for u in interior[: min(len(interior), 16)]:
        closed = operator.power_closed(u, 2)
        iterated = operator.apply(operator.apply(SparseVector.basis(u)))
        worst_power = max(worst_power, (closed - iterated).norm())
    coker = cokernel_dimension(mat, args.rank_tol)
    artificial = boundary_deficiency(window)
    truncated = len(window) - len(interior)
    if truncated:
        out.text(f"boundary truncation: {truncated} window vertices have children "
                 f"outside the window; interior checks exclude them")
    out.text(f"apply vs matrix (interior): {worst_apply:.3e}")
    out.text(f"power closed-form vs iteration: {worst_power:.3e}")
    out.text(f"adjoint transpose check: {adj:.3e}")
    out.text(f"window cokernel: {coker} ({artificial} boundary-artificial)")
    out.record("oracle", {"apply_residual": worst_apply, "power_residual": worst_power,
                          "cokernel": coker, "boundary_artificial": artificial})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treeshift",
                                     description="weighted shifts on directed trees")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, required=True):
        p.add_argument("--tree", required=required, help="tree spec JSON path")
        p.add_argument("--weights", required=required, help="weight spec JSON path")
        p.add_argument("--levels", default="-8:8",
                       help="window level range a:b (use --levels=-8:8 for negatives)")
        p.add_argument("--breadth", type=int, default=64, help="per-level breadth cap")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--zero-th", dest="zero_th", type=float, default=1e-9)
        p.add_argument("--rank-tol", dest="rank_tol", type=float, default=1e-8)
        p.add_argument("--depth", type=int, default=64)
        p.add_argument("--json", action="store_true", help="line-delimited JSON output")

    p = sub.add_parser("validate", help="structural validation and summary")
    p.add_argument("--tree", required=True)
    p.add_argument("--levels", default="-8:8")
    p.add_argument("--breadth", type=int, default=64)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    for name, fn in (("analyze", cmd_analyze), ("asymptote", cmd_asymptote),
                     ("adjoint-asymptote", cmd_adjoint_asymptote),
                     ("similarity", cmd_similarity), ("oracle", cmd_oracle)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("cyclic")
    common(p, required=False)
    p.add_argument("--backward", help="backward shift spec JSON (instead of a tree)")
    p.add_argument("--schedule", type=int, default=16, help="schedule length L")
    p.add_argument("--window-k", dest="window_k", type=int, default=50)
    p.set_defaults(func=cmd_cyclic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "cyclic" and not args.backward and not (args.tree and args.weights):
        parser.error("cyclic needs either --backward or both --tree and --weights")
    out = Reporter(getattr(args, "json", False))
    try:
        return args.func(args, out)
    except errors.NotAContraction as exc:
        print(f"error: not a contraction: {exc}", file=sys.stderr)
        return EXIT_CONTRACTION
    except (errors.StableSubtreeEmpty, errors.AdjointStable) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASYMPTOTE
    except (errors.DimensionCap, errors.WindowTooLarge) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except errors.ShapeMismatch as exc:
        print(f"error: ShapeMismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except _STRUCTURE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STRUCTURE


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()

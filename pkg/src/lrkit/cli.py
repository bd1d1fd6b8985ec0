"""Command line front-end: ``lrkit refine|check|compare|eval|tessellate|slice|convert``.

Exit codes are 0 on success, 1 when a diagnostic or an embedded scenario
expectation fails (or a document is invalid) and 2 on usage or parse errors.

Scenario files (``.scn``) are JSON objects::

    {"space": {"degrees": [3, 3], "knots": [[...], [...]]},   # LR and T-splines
     "space": {"degrees": [3, 3], "domain": [[0, 6], [0, 6]]}, # hierarchical
     "steps": [{"method": "lr-meshrectangle", "direction": 0, "value": 3.5,
                "extent": [[2, 6]], "multiplicity": 1, "expect": {...}}, ...],
     "diagnostics": ["independence", "partition", "reproduction"],
     "expect": {...}}

Step methods are ``lr-meshrectangle``, ``structured`` (``anchors``: points),
``hb-region`` (``level``, ``box``), ``ts-anchor`` (``point``) and the
read-only ``ts-infer`` (``anchor``). ``compare`` reads a ``compare`` object
holding a growth scenario (see :func:`lrkit.diagnostics.growth_compare`).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import LRKitError, ParseError, ValidationError

EXIT_OK, EXIT_FAIL, EXIT_PARSE = 0, 1, 2


def _fmt(x) -> str:
    if isinstance(x, float):
        return "0" if x == 0 else f"{x:.6g}"
    return str(x)


def _num(v):
    f = float(v)
    return int(f) if f.is_integer() else f


# scenarios -----------------------------------------------------------------


def load_scenario(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"scenario is not valid JSON: {e.msg}", e.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object")
    return data


def _engine(sc: dict) -> str:
    kinds = {"lr-meshrectangle": "lr", "structured": "lr", "hb-region": "hb", "ts-anchor": "ts", "ts-infer": "ts"}
    engines = set()
    for step in sc.get("steps", []):
        if step.get("method") not in kinds:
            raise ParseError(f"unknown step method {step.get('method')!r}")
        engines.add(kinds[step["method"]])
    if len(engines) > 1:
        raise ParseError("a scenario must use a single refinement engine")
    return engines.pop() if engines else sc.get("engine", "lr")


class _Run:
    """State of one scenario run: the current object plus report lines."""

    def __init__(self, sc: dict):
        from .hbsplines import HierarchySelection
        from .lrsplines import from_tensor
        from .splinecore import KnotVector
        from .tsplines import TMesh

        self.sc = sc
        self.engine = _engine(sc)
        self.truncated = bool(sc.get("truncated", True))
        space = sc.get("space", {})
        degrees = tuple(int(p) for p in space.get("degrees", ()))
        self.lines = []
        self.failures = []
        self.step_facts = []
        self.facts = {}
        if self.engine == "hb":
            domain = tuple((int(a), int(b)) for a, b in space["domain"])
            self.state = HierarchySelection(domain, degrees)
        elif self.engine == "ts":
            s, t = space["knots"]
            self.state = TMesh.from_tensor(s, t)
        else:
            kvs = [KnotVector(k, p) for k, p in zip(space["knots"], degrees)]
            self.state = from_tensor(kvs, degrees)

    def collection(self, state=None, truncated=None):
        from .hbsplines import hb_to_collection
        from .tsplines import tmesh_to_collection

        state = self.state if state is None else state
        if self.engine == "hb":
            return hb_to_collection(state, self.truncated if truncated is None else truncated)
        if self.engine == "ts":
            return tmesh_to_collection(state)
        return state

    def count(self, state=None) -> int:
        state = self.state if state is None else state
        if self.engine == "hb":
            return len(state.active_functions())
        if self.engine == "ts":
            return len(state.functions)
        return len(state)

    def check(self, label: str, name: str, got, want) -> None:
        if isinstance(want, float) and name.endswith("_max"):
            ok = got < want
        elif isinstance(want, float) and name.endswith("_min"):
            ok = got > want
        else:
            ok = got == want
        self.lines.append(f"  expect {name} = {_fmt(want)}: got {_fmt(got)} [{'ok' if ok else 'FAIL'}]")
        if not ok:
            self.failures.append(f"{label}: {name}")

    def step(self, i: int, step: dict) -> None:
        method = step["method"]
        before = self.state
        facts = getattr(self, "_" + method.replace("-", "_"))(step)
        expect = step.get("expect", {})
        if method != "ts-infer":
            coarse, fine = self.collection(before), self.collection()
            facts["nested"] = dg.nestedness(coarse, fine).nested
            if "reverse_nested" in expect:
                facts["reverse_nested"] = dg.nestedness(fine, coarse).nested
        self.step_facts.append(facts)
        label = f"step {i + 1}"
        desc = ", ".join(f"{k} {_fmt(v)}" for k, v in facts.items())
        self.lines.append(f"{label}: {method}: {desc}")
        for name in sorted(expect):
            self.check(label, name, facts.get(name), expect[name])

    # engines

    def _lr_meshrectangle(self, step):
        from .lrmesh import MeshRectangle
        from .lrsplines import refine

        r = MeshRectangle(
            int(step["direction"]),
            float(step["value"]),
            tuple((float(a), float(b)) for a, b in step["extent"]),
            int(step.get("multiplicity", 1)),
        )
        self.state, st = refine(self.state, r, return_stats=True)
        return {"split": st.split, "produced": st.produced, "removed": st.removed, "count": self.count()}

    def _structured(self, step):
        from .lrsplines import anchor, structured_refine

        want = {tuple(float(x) for x in p) for p in step["anchors"]}
        sel = [i for i, s in enumerate(self.state.splines) if tuple(float(x) for x in anchor(s.bspline)) in want]
        self.state = structured_refine(self.state, sel)
        return {"selected": len(sel), "count": self.count(), "independence": self.state.independence.value}

    def _hb_region(self, step):
        from .hbsplines import box_cells, hb_refine

        level = int(step["level"])
        cells = box_cells(self.state, level + 1, step["box"])
        self.state = hb_refine(self.state, level, cells)
        return {"cells": len(cells), "count": self.count()}

    def _ts_anchor(self, step):
        from .tsplines import TSplineClass, classify, semi_standard_insert, standard_rule_check

        q = tuple(float(x) for x in step["point"])
        before = self.state
        rule = standard_rule_check(before, q)
        self.state, _ = semi_standard_insert(before, q)
        old = {(k[0][2], k[1][2]): k for k in before.functions}
        new = {(k[0][2], k[1][2]): k for k in self.state.functions}
        changed = sorted([_num(a[0][0]), _num(a[1][0])] for a in old if a in new and new[a] != old[a])
        added = sorted([_num(v[0][0]), _num(v[1][0])] for v in set(self.state.vertices) - set(before.vertices))
        cls = classify(self.state)
        return {
            "changed_anchors": changed,
            "new_vertices": added,
            "standard_rule": rule,
            "classification": cls.value if isinstance(cls, TSplineClass) else str(cls),
            "count": self.count(),
        }

    def _ts_infer(self, step):
        from .tsplines import infer_knots

        a = tuple(float(x) for x in step["anchor"])
        s, t = infer_knots(self.state, a)
        return {"knots": [[_num(x) for x in s], [_num(x) for x in t]]}

    def finish(self) -> None:
        c = self.collection()
        facts = {"count": self.count(), "members": len(c)}
        want = set(self.sc.get("diagnostics", [])) | set(self.sc.get("expect", {}))
        table = dg.extract(c) if want - {"count", "members"} else None
        if want & {"independence", "independence_rank"}:
            rep = dg.linear_independence(c, table)
            facts["independence"] = rep.status.value
            facts["independence_rank"] = rep.rank
        if want & {"partition", "partition_exact", "partition_max"}:
            rep = dg.partition_of_unity(c, table=table)
            facts["partition_exact"] = rep.exact
            facts["partition_max"] = rep.max_deviation
        if want & {"reproduction"}:
            facts["reproduction"] = all(dg.polynomial_reproduction(c, table=table))
        if self.engine == "hb" and want & {"untruncated_partition_min", "untruncated_independence"}:
            u = self.collection(truncated=False)
            facts["untruncated_partition_min"] = dg.partition_of_unity(u, exact=False).max_deviation
            facts["untruncated_independence"] = dg.linear_independence(u).status.value
        self.facts = facts
        self.lines.append("result: " + ", ".join(f"{k} {_fmt(v)}" for k, v in facts.items()))
        for name in sorted(self.sc.get("expect", {})):
            self.check("result", name, facts.get(name), self.sc["expect"][name])


def run_scenario(sc: dict) -> _Run:
    """Run every step of a scenario and evaluate its embedded expectations."""
    run = _Run(sc)
    run.lines.append(f"scenario {sc.get('name', '?')} ({run.engine}), initial count {run.count()}")
    for i, step in enumerate(sc.get("steps", [])):
        run.step(i, step)
    run.finish()
    run.lines.append("expectations: " + ("all passed" if not run.failures else "FAILED " + "; ".join(run.failures)))
    return run


# commands ------------------------------------------------------------------


def _read_collection(path):
    from .formats import load_collection

    return load_collection(Path(path).read_bytes())


def cmd_refine(args) -> int:
    from .formats import write_lr

    run = run_scenario(load_scenario(args.scenario))
    print("\n".join(run.lines))
    if args.output:
        Path(args.output).write_text(write_lr(run.collection(), decimal=args.decimal))
    return EXIT_FAIL if run.failures else EXIT_OK


def cmd_check(args) -> int:
    c = _read_collection(args.file)
    table = dg.extract(c)
    ind = dg.linear_independence(c, table)
    pou = dg.partition_of_unity(c, samples=args.samples, table=table)
    rep = dg.polynomial_reproduction(c, table=table)
    # the exact check decides; the sampled deviation is reported alongside
    deviation = 0.0 if pou.exact else pou.max_deviation
    print(f"{ind.status.value}, PoU deviation {_fmt(deviation)}")
    print(f"sampled PoU deviation {_fmt(pou.max_deviation)}")
    print(f"members {len(c)}, functions {ind.count}, rank {ind.rank}")
    print(f"partition of unity exact: {'yes' if pou.exact else 'no'}")
    print(f"polynomial reproduction: {sum(rep)}/{len(rep)} elements")
    ok = ind.rank == ind.count and pou.exact and all(rep)
    if args.coarse:
        nest = dg.nestedness(_read_collection(args.coarse), c)
        print(f"nested in coarse: {'yes' if nest.nested else 'no'} (residual {_fmt(nest.residual)})")
        ok = ok and nest.nested
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    growth = sc.get("compare", sc)
    table = dg.growth_compare(growth)
    sys.stdout.write(table.format())
    expect = sc.get("expect", {})
    failures = []
    if expect.get("hb_exceeds_after_first"):
        hb = table.counts["HB"]
        for i in range(2, len(hb)):
            others = [table.counts[m][i] for m in ("LR", "TS") if table.counts[m][i] is not None]
            if hb[i] is None or not all(hb[i] > o for o in others):
                failures.append(f"HB count not largest at step {i}")
    for method, want in expect.get("final", {}).items():
        if table.counts[method][-1] != want:
            failures.append(f"{method} final count {table.counts[method][-1]} != {want}")
    if expect:
        print("expectations: " + ("all passed" if not failures else "FAILED " + "; ".join(failures)))
    return EXIT_FAIL if failures else EXIT_OK


def _grid(text: str) -> tuple:
    try:
        parts = tuple(int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from None
    if not parts or any(n < 1 for n in parts):
        raise argparse.ArgumentTypeError("grid sizes must be positive")
    return parts


def cmd_eval(args) -> int:
    c = _read_collection(args.file)
    grid = args.grid
    if len(grid) == 1:
        grid = grid * c.dimension
    if len(grid) != c.dimension:
        print(f"error: grid has {len(grid)} sizes for a {c.dimension}-variate spline", file=sys.stderr)
        return EXIT_PARSE
    axes = [np.linspace(a, b, n) if n > 1 else np.array([(a + b) / 2]) for (a, b), n in zip(c.domain, grid)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = c.evaluate(pts)
    vals = vals.reshape(len(pts), -1)
    for u, v in zip(pts, vals):
        print(" ".join(repr(float(x)) for x in (*u, *v)))
    return EXIT_OK


def _surface(c):
    from .geometry import SplineGeometry

    if c.dimension != 2:
        raise ValidationError("tessellation needs a bivariate spline")
    coefs = np.asarray(c.coefficients(), dtype=float).reshape(len(c), -1)
    if coefs.shape[1] == 1:
        anchors = np.array([[np.mean(lk.values[1:-1]) for lk in s.bspline.knots] for s in c.splines])
        coefs = np.hstack([anchors, coefs])
    elif coefs.shape[1] == 2:
        coefs = np.hstack([coefs, np.zeros((len(c), 1))])
    elif coefs.shape[1] > 3:
        raise ValidationError("control points must have at most three coordinates")
    return SplineGeometry(c, coefs)


def cmd_tessellate(args) -> int:
    from .formats import write_stl
    from .geometry import tessellate

    soup = tessellate(_surface(_read_collection(args.file)), args.tol)
    Path(args.output).write_bytes(write_stl(soup, "ascii" if args.ascii else "binary"))
    print(f"{len(soup)} triangles written to {args.output}")
    return EXIT_OK


def cmd_slice(args) -> int:
    from .formats import read_stl
    from .geometry import slice_soup

    soup = read_stl(Path(args.file).read_bytes())
    if args.z_step <= 0:
        print("error: --z-step must be positive", file=sys.stderr)
        return EXIT_PARSE
    out = ["# lrkit slice layers"]
    if len(soup):
        z = soup.vertices[:, :, 2]
        lo, hi = float(z.min()), float(z.max())
        n = math.floor((hi - lo) / args.z_step + 1e-9)
        heights = [lo + k * args.z_step for k in range(1, n + 1)]
        heights = [h for h in heights if h < hi]
    else:
        heights = []
    for i, h in enumerate(heights, 1):
        res = slice_soup(soup, h, args.tol)
        head = f"layer {i} z {h!r} polylines {len(res)}"
        if res.perturbed:
            head += f" perturbed {res.height!r}"
        out.append(head)
        for pl in res:
            out.append(f"polyline {'closed' if pl.closed else 'open'} {len(pl.points)}")
            out.extend(" ".join(repr(float(x)) for x in p) for p in pl.points)
        out.append("end")
    text = "\n".join(out) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_convert(args) -> int:
    from .formats import read_stl, write_stl

    soup = read_stl(Path(args.input).read_bytes())
    Path(args.output).write_bytes(write_stl(soup, args.to))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrkit", description="Locally refined spline toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("refine", help="run a refinement scenario")
    s.add_argument("scenario")
    s.add_argument("-o", "--output")
    s.add_argument("--decimal", action="store_true", help="write decimal instead of hex floats")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("check", help="diagnose a .lrsp file")
    s.add_argument("file")
    s.add_argument("--coarse", help="coarser .lrsp file that must be nested in FILE")
    s.add_argument("--samples", type=int, help="sample points per direction (default LRKIT_SAMPLES or 50)")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("compare", help="growth table of HB, THB, LR and T-splines")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("eval", help="evaluate a .lrsp file on a grid")
    s.add_argument("file")
    s.add_argument("--grid", type=_grid, default=(11,))
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("tessellate", help="triangulate a surface to STL")
    s.add_argument("file")
    s.add_argument("--tol", type=float, required=True)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--ascii", action="store_true")
    s.set_defaults(func=cmd_tessellate)

    s = sub.add_parser("slice", help="slice an STL file into layers")
    s.add_argument("file")
    s.add_argument("--z-step", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-9, help="endpoint chaining tolerance")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_slice)

    s = sub.add_parser("convert", help="convert between ascii and binary STL")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--to", choices=("ascii", "binary"), required=True)
    s.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (ValidationError, LRKitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

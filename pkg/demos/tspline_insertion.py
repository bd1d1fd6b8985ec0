"""Semi-standard knot insertion on a bicubic T-mesh.

A single insertion on a tensor mesh only touches the four blending
functions whose horizontal knot window contains the new vertex. A longer
sequence ends with an insertion whose knot vectors no longer match the mesh
until one extra vertex is added; the scaled basis still sums to one.
"""

import numpy as np

from lrkit.tsplines import TMesh, classify, infer_knots, semi_standard_insert, standard_rule_check, tmesh_to_collection

KV = [0.0] * 4 + [float(v) for v in range(1, 10)] + [10.0] * 4

base = TMesh.from_tensor(KV, KV)
print("anchor (3, 3) knots:", infer_knots(base, (3, 3)))

m, funcs = semi_standard_insert(base, (5.5, 5))
old = {f.anchor: (f.s_knots, f.t_knots) for f in base.blending_functions()}
changed = sorted(
    (f.anchor[0][0], f.anchor[1][0]) for f in m.blending_functions()
    if f.anchor in old and old[f.anchor] != (f.s_knots, f.t_knots)
)
print("insert (5.5, 5) changes anchors", changed, "->", classify(m).value)

m = base
for q in [(2, 5.5), (3, 5.5), (4, 5.5), (5, 5.5)]:
    m, _ = semi_standard_insert(m, q)
q = (5.7, 5)
print(f"standard rule holds for {q}: {standard_rule_check(m, q)}")
fine, funcs = semi_standard_insert(m, q)
extra = sorted((v[0][0], v[1][0]) for v in fine.vertices - m.vertices)
print("vertices added:", extra, "->", classify(fine).value)

c = tmesh_to_collection(fine)
rng = np.random.default_rng(0)
pts = np.column_stack([rng.uniform(0, 10, 2000), rng.uniform(0, 10, 2000)])
dev = np.abs((c.basis_values(pts) * c.gammas()).sum(axis=1) - 1).max()
print(f"{len(c)} blending functions, max partition deviation {dev:.1e}")

"""Local refinement of a bicubic LR spline.

One meshrectangle splits four B-splines into five, a double-multiplicity
segment then splits a single one. After each step the script checks that
the old space sits inside the new one and that the scaled basis still sums
to one.
"""

import numpy as np

from lrkit.diagnostics import linear_independence, nestedness, partition_of_unity, polynomial_reproduction
from lrkit.formats import write_lr
from lrkit.lrmesh import MeshRectangle
from lrkit.lrsplines import from_tensor, refine

KNOTS = [0.0] * 4 + [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] + [7.0] * 4

c = from_tensor([KNOTS, KNOTS], (3, 3))
print(f"tensor start: {len(c)} B-splines")

steps = [
    MeshRectangle(0, 3.5, ((2.0, 6.0),)),
    MeshRectangle(1, 4.0, ((2.0, 5.0),), multiplicity=2),
]
for r in steps:
    fine, stats = refine(c, r, return_stats=True)
    nested = nestedness(c, fine).nested
    print(f"insert {r}: split {stats.split}, produced {stats.produced}, now {len(fine)}, nested {nested}")
    c = fine

pou = partition_of_unity(c)
ind = linear_independence(c)
rep = polynomial_reproduction(c)
print(f"partition of unity exact: {pou.exact} (sampled deviation {pou.max_deviation:.1e})")
print(f"rank {ind.rank} of {ind.count}: {ind.status.value}")
print(f"elements reproducing polynomials: {sum(rep)}/{len(rep)}")

# the scaling factors are exact rationals
gammas = sorted({s.gamma for s in c.splines})
print("distinct scaling factors:", ", ".join(str(g) for g in gammas))

x = np.array([[3.25, 4.5]])
print("basis sum at", x[0], "=", float((c.basis_values(x) * c.gammas()).sum()))

with open("lr_refined.lrsp", "w") as fh:
    fh.write(write_lr(c))
print("wrote lr_refined.lrsp")

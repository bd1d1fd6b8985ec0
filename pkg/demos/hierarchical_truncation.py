"""Hierarchical B-splines with and without truncation.

Two nested refinements of a uniform bicubic space. The untruncated basis
overshoots one inside the refined region; truncation removes the overlap
while spanning the same space. The last part compares how fast each method
grows under repeated local refinement.
"""

from lrkit.diagnostics import growth_compare, linear_independence, nestedness, partition_of_unity
from lrkit.hbsplines import HierarchySelection, box_cells, hb_refine, hb_to_collection

s = HierarchySelection(((0, 6), (0, 6)), (3, 3))
for level, box in [(0, ((1, 5), (1, 5))), (1, ((2, 4), (2, 4)))]:
    s = hb_refine(s, level, box_cells(s, level + 1, box))
    print(f"refined level {level} over {box}: {len(s.active_functions())} active functions")

hb = hb_to_collection(s, truncated=False)
thb = hb_to_collection(s, truncated=True)
for name, c in [("HB", hb), ("THB", thb)]:
    pou = partition_of_unity(c, samples=40)
    ind = linear_independence(c)
    print(f"{name:>3}: members {len(c):3d}, rank {ind.rank}/{ind.count}, "
          f"partition exact {pou.exact}, max deviation {pou.max_deviation:.3f}")

print("same span:", nestedness(hb, thb).nested and nestedness(thb, hb).nested)

growth = growth_compare({
    "domain": [[0, 6], [0, 6]],
    "degrees": [3, 3],
    "steps": [{"kind": "local", "point": [2.3, 2.6]}] * 5,
})
print()
print(growth.format(), end="")

"""From a spline surface to printer layers.

A bump surface is refined locally, tessellated within a chordal tolerance,
written as binary STL and sliced into layers. A closed cube shows what a
watertight slice looks like and what happens when a facet is missing.
"""

import numpy as np

from lrkit.formats import read_stl, write_stl
from lrkit.geometry import SplineGeometry, box_soup, eval_geometry, slice_soup, tessellate
from lrkit.lrmesh import MeshRectangle
from lrkit.lrsplines import from_tensor, refine

KV = [0.0] * 4 + [1.0, 2.0, 3.0, 4.0] + [5.0] * 4

c = from_tensor([KV, KV], (3, 3))
xy = c.coefficients()
z = np.exp(-((xy[:, 0] - 2.5) ** 2 + (xy[:, 1] - 2.5) ** 2))
surface = SplineGeometry(c, np.column_stack([xy, z]))

fine = refine(surface.collection, MeshRectangle(0, 2.5, ((0.0, 4.0),)))
pts = np.random.default_rng(1).uniform(0, 5, (500, 2))
gap = np.abs(eval_geometry(fine, pts) - eval_geometry(surface, pts)).max()
print(f"refined {len(c)} -> {len(fine)} B-splines, geometry change {gap:.1e}")

for tol in (0.1, 0.02):
    soup = tessellate(surface, tol)
    print(f"tolerance {tol}: {len(soup)} triangles")

data = write_stl(soup)
assert write_stl(read_stl(data)) == data
print(f"binary STL: {len(data)} bytes, byte-identical after a round trip")

for h in (0.2, 0.4):
    layer = slice_soup(soup, h)
    print(f"surface layer z={h}: {[('closed' if pl.closed else 'open', len(pl.points)) for pl in layer]}")

cube = box_soup()
layer = slice_soup(cube, 0.37)
print("cube layer:", [(pl.closed, round(pl.length, 12)) for pl in layer])
hit = next(i for i, t in enumerate(cube.vertices) if t[:, 2].min() < 0.37 < t[:, 2].max())
print("without one facet:", [pl.closed for pl in slice_soup(cube.without(hit), 0.37)])

"""Bistable cubic on [0,1]: two attracting fixed points and a repeller, found from samples.

Walks through the library step by step instead of calling the pipeline.
Run: python3 demos/cubic_1d.py
"""
from sampledconley.cli import cubic_samples
from sampledconley.conley import ConleyIndex, lefschetz
from sampledconley.dynamics import build_weak_index_pair, find_isolating_block, invariant_cells
from sampledconley.grid import CubicalSet, GridGeometry, components
from sampledconley.homology import index_map
from sampledconley.mvmap import SunflowerMap, restrict_to_domain
from sampledconley.symbolic import Decomposition, transition_matrix

DELTA = 1 / 64

samples = cubic_samples(2000)
F = restrict_to_domain(SunflowerMap(samples, GridGeometry(1, DELTA)))
print(f"domain: {len(F.domain.tops())} intervals of width {DELTA}")

# seed with each fixed-point interval, then grow to a block
N = None
for x in (0.0, 0.5, 1.0):
    blk = find_isolating_block(F, seed=CubicalSet.from_tops([(round(x / DELTA),)], 1), budget=40)
    N = blk.N if N is None else N | blk.N
pair = build_weak_index_pair(F, N)
print("pair conditions:", pair.report.as_dict())

I, basis, _ = index_map(F, pair.N, pair.P1, pair.P2)
comps = components(pair.N)
D = Decomposition.from_supports(comps, basis)
print("Betti numbers of (P1, P2):", basis.betti)
print("transition matrix:\n", transition_matrix(I, D))
for i, C in enumerate(comps):
    inv = invariant_cells(F, C)
    lo = min(c.base[0] for c in inv) * DELTA
    hi = max(c.base[0] + (c.extent & 1) for c in inv) * DELTA
    sub = {k: [[I[k][r][c] for c in D.indices(k, i)] for r in D.indices(k, i)] for k in I.degrees()}
    ci = ConleyIndex.of(type(I)(sub))
    print(f"component {i + 1}: invariant part in [{lo}, {hi}], index dims {ci.reduced.dims()}, "
          f"Lefschetz {lefschetz(ci.reduced)}")

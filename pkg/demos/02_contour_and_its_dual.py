"""A small forest, its contour and the dual forest read backwards in time.

The contour of a chronological tree walks down each life at unit speed and
jumps up at every birth to the death level of the newborn.  Cutting the
contour at its last passage from T to 0, moving that final descent to the
front and reversing space and time gives the contour of a new forest whose
width at level t equals the old width at T - t.
"""

import numpy as np

from forestdual.contour import dual_forest, forest_from_contour, jccp_forest
from forestdual.path import K, chi, kill, last_passage, local_time
from forestdual.tree import ChronologicalTree, Forest, single_node

T = 1.0
forest = Forest(
    (
        single_node(0.5),
        ChronologicalTree.from_nodes([(0, None, 0.0, 2.0), (1, 0, 0.25, 0.75), (2, 0, 0.5, 1.5), (3, 2, 0.625, 1.25)]),
    )
)


def show(label, p):
    rows = ", ".join(f"{a:g}->{c:g}" for a, c in zip(p.tops, p.bottoms))
    print(f"{label:<28} zeta={p.zeta:<6g} segments: {rows}")


contour = jccp_forest(forest, T)
show("contour truncated at T", contour)
lp = last_passage(contour, T)
print(f"first reaches T at {lp.g_T:g}, last leaves T at {lp.gbar_T:g}, ends at 0 at {lp.g_0:g}")
show("chi: last descent first", chi(contour, T))
show("K = reversal of chi", K(contour, T))

# the coding is a bijection: the contour gives back the truncated forest
assert forest_from_contour(contour) == forest.truncate(T)

dual = dual_forest(forest, T)
print(f"\nthe dual forest has {len(dual)} tree(s) and {dual.n_nodes} individuals")
levels = np.array([0.125, 0.375, 0.5625, 0.8125, 0.9375])
killed = kill(contour, lp.g_0)
print("level t   width of dual at t   width of original at T - t")
for t, a, b in zip(levels, dual.width()(levels), local_time(killed, T - levels)):
    print(f"{t:<9g} {a:<20d} {b}")

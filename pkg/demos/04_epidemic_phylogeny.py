"""From a simulated outbreak to a reconstructed phylogeny.

Individuals are infected hosts; a birth is a transmission.  At time T only
the hosts still infected are sampled, and their genealogy, with the
unsampled hosts erased, is an ultrametric tree whose internal depths are
the coalescence times.  These are the depths of the contour's excursions
below T, and their number is geometric.
"""

import io

import numpy as np

from forestdual.epi import coalescence_times, incidence_series, reconstructed_tree, write_incidence_csv
from forestdual.measure import Exponential
from forestdual.scale import gamma_params
from forestdual.sim import simulate_forests
from forestdual.verify import dual_specs

T = 1.0
mu = Exponential(2.0, 1.0)
left, _, _, _ = dual_specs(mu, T)
batch = simulate_forests(left, 20_000, seed=3, label="demo/epi")

outbreak = max(batch, key=lambda f: f.width()(T))
print(f"largest outbreak: {len(outbreak)} chains, {outbreak.n_nodes} infections, {outbreak.width()(T)} infected at T")
tree = reconstructed_tree(outbreak, T)
print("reconstructed tree (Newick):")
print(tree.newick())
print("coalescence depths in planar order:", [round(h, 4) for h in coalescence_times(outbreak, T)])

buf = io.StringIO()
write_incidence_csv(incidence_series(outbreak, T / 10, T), T / 10, buf)
print("\nincidence (new infections per tenth of T):")
print(buf.getvalue().strip())

gamma = gamma_params(mu, T)[0]
counts = np.array([len(coalescence_times(f, T)) for f in batch])
print(f"\nnumber of coalescences over {len(batch)} outbreaks vs geometric({gamma:.4f}) on 0, 1, 2, ...")
for k in range(6):
    print(f"  N={k}: observed {np.mean(counts == k):.4f}, predicted {gamma * (1 - gamma) ** k:.4f}")

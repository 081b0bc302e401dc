"""
A path through fresh directions
===============================

Appending the norm as an extra real coordinate makes the glued map injective,
but that coordinate lives outside the sequence space. The path tau walks
along new basis directions, switching direction at t = 3, 9, 27, ... Adding
tau(||a||) to the glued value keeps everything inside the space.
"""

import numpy as np

from metricglue import (GluedMap, HatMap, build_tau, check_tau_bounds, make_lattice, net_from_lattice,
                        select_subsequence, synthetic_chain, tau, weak_limit)
from metricglue.seqspace import norm

space = make_lattice(1, 2, extent=40)
net = net_from_lattice(space, 2)
chain = synthetic_chain(net, "shift", length=64)
limits = weak_limit(chain, net)
selected, cert = select_subsequence(chain, net, limits)
glued = GluedMap(selected, net)

############################################################
# Each direction sits past every coordinate already in use, so its
# distance to the span of the earlier material is exactly one.

path = build_tau(glued, kmax=3)
print("directions:", [d.support for d in path.directions])
print("distances to the spans:", path.dist_checks)

############################################################
# tau is 1-Lipschitz: unit-speed segments joined end to end.

rng = np.random.default_rng(0)
pairs = rng.uniform(0, 81, size=(2000, 2))
excess = max(norm(tau(s, path) - tau(t, path), 2) - abs(s - t) for s, t in pairs)
print(f"largest |tau(s)-tau(t)| - |s-t| over 2000 pairs: {excess:.2e}")

############################################################
# The combined map separates points of different norm. Grouping pairs by
# the segments their norms fall in shows how much of |‖a‖ - ‖b‖| survives.

hat = HatMap(glued, path)
summary = check_tau_bounds(hat)
for key, alpha in sorted(summary.worst_by_case.items()):
    print(f"{key:18s} worst ratio {alpha:.4f}")
print(f"overall worst ratio {summary.worst_alpha:.4f}, target {summary.target:.4f}")

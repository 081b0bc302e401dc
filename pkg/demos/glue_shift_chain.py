"""
Gluing a shift chain on the integers
====================================

Each map of the chain translates the lattice into a fresh block of
coordinates. Every map is an isometry, yet the maps drift off to infinity,
so their coordinatewise limit is zero. We glue them anyway and audit the result.
"""

from metricglue import (AugmentedMap, GluedMap, check_case_bounds, distortion, make_lattice, net_from_lattice,
                        select_subsequence, synthetic_chain, validate_chain, verify_certificate, weak_limit)
from metricglue.audit import one_sum_distance

############################################################
# The net: integer points of [-32, 32] as vectors of l_2.

space = make_lattice(1, 2, extent=32)
net = net_from_lattice(space, 2)
print(len(net), "points, outermost shell", net.max_shell)

############################################################
# A chain of shifted copies; s_i moves coordinate 0 to coordinate i.

chain = synthetic_chain(net, "shift", length=64)
print("chain valid:", validate_chain(chain, net).ok)

limits = weak_limit(chain, net)
print("all limits zero:", all(not v for v in limits.m.values()))

############################################################
# Selection keeps indices on which every certified pairing is small.
# For shifts the pairings vanish outright, so no thinning is needed.

selected, cert = select_subsequence(chain, net, limits)
print("survivors:", cert.indices)
print("certificate verifies:", verify_certificate(selected, net, limits, cert).ok)

############################################################
# Glue, then audit every pair against the bound of its branch.

glued = GluedMap(selected, net)
aug = AugmentedMap(glued)
summary = check_case_bounds(aug, limits, cert)
for key, count in sorted(summary.counts.items()):
    print(f"{key:18s} {count:5d} pairs, worst margin {summary.worst_margin[key]:8.3f}")

rep = distortion(aug, net.ids, net.dist, one_sum_distance(2))
print(f"distortion of the augmented map: {rep.distortion:.3f} (lip {rep.lip:.3f}, colip {rep.colip:.3f})")
three = space.id_of((3,))
print("the point 3 glues half of s_2 and half of s_3:", glued(three))

"""Shared 5x5 annulus fixture: ring edges, background edges, window builder.

The annulus between radius 1 and radius 2 around (2, 2) admits circuits
only along the 16 perimeter edges; the remaining 24 window edges cannot
take part, which the tests verify rather than assume.
"""

import numpy as np

RING_EDGES = (
    [((i, 0), 0) for i in range(4)]
    + [((i, 4), 0) for i in range(4)]
    + [((0, j), 1) for j in range(4)]
    + [((4, j), 1) for j in range(4)]
)

OTHER_EDGES = [
    ((i, j), axis)
    for axis in (0, 1)
    for i in range(5)
    for j in range(5)
    if (axis == 0 and i < 4 or axis == 1 and j < 4) and ((i, j), axis) not in RING_EDGES
]


def window_from_masks(ring_mask, other_bits):
    open0 = np.zeros((5, 5), dtype=bool)
    open1 = np.zeros((5, 5), dtype=bool)
    for bit, (site, axis) in enumerate(RING_EDGES):
        if ring_mask >> bit & 1:
            (open0 if axis == 0 else open1)[site] = True
    for bit, (site, axis) in enumerate(OTHER_EDGES):
        if other_bits >> bit & 1:
            (open0 if axis == 0 else open1)[site] = True
    return [open0, open1]

"""Pure-Python gate kernels.

Both functions work on sorted, duplicate-free arrays of global gate indices.
"""

import numpy as np


def deadtime_filter(candidates, holdoff, armed_from):
    """Drop candidate clicks that fall while the detector is dead.

    A registered click at gate ``g`` disarms the detector for the next
    ``holdoff`` gates.  ``armed_from`` is the first gate at which the detector
    is armed on entry.  Returns the registered clicks and the updated
    ``armed_from``.
    """
    out = []
    nxt = int(armed_from)
    for g in candidates.tolist():
        if g >= nxt:
            out.append(g)
            nxt = g + holdoff + 1
    return np.array(out, dtype=np.int64), nxt


def count_coincidences(a, b):
    """Number of gates present in both sorted click lists."""
    i = j = hits = 0
    a = a.tolist()
    b = b.tolist()
    na, nb = len(a), len(b)
    while i < na and j < nb:
        x, y = a[i], b[j]
        if x == y:
            hits += 1
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return hits

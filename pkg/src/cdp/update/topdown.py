"""TopDown consistency for hierarchical counts.

The root keeps its noisy value. Going down one level at a time, each sibling
block receives an equal share of the gap between its (already fixed) parent
and its own sum, which is the L2-closest adjustment that holds the parent.
"""

from typing import Any

import numpy as np

from cdp.core.errors import check_length
from cdp.invariants.hierarchy import Hierarchy


def topdown(h: Hierarchy, noisy: Any) -> np.ndarray:
    """Consistent vector(s) from noisy node values ordered as ``h.nodes``.

    Accepts one vector or an ``(N, m)`` batch.
    """
    out = np.array(noisy, dtype=np.float64)
    check_length(out.shape[-1], h.size, "noisy vector")
    for parent, kids in h.top_down_blocks():
        gap = out[..., parent] - out[..., kids].sum(axis=-1)
        out[..., kids] += (gap / kids.size)[..., np.newaxis]
    return out

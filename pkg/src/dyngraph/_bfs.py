"""Level-synchronous breadth-first search over CSR adjacency."""

import numpy as np
import scipy.sparse as sp


def bfs_distances(adj: sp.csr_matrix, sources, mask=None) -> np.ndarray:
    """Hop distance from the nearest of ``sources`` to every node.

    Unreachable nodes get -1.  When ``mask`` is given, only nodes with
    ``mask[i]`` true may be traversed (sources must be inside the mask).
    """
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int32)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    if frontier.size == 0:
        return dist
    dist[frontier] = 0
    visited = np.zeros(n, dtype=bool)
    visited[frontier] = True
    if mask is not None:
        visited |= ~np.asarray(mask, dtype=bool)
    indptr, indices = adj.indptr, adj.indices
    level = 0
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        # gather all neighbor slots of the frontier without a Python loop
        offsets = np.repeat(starts - np.cumsum(counts) + counts, counts)
        nbrs = indices[offsets + np.arange(total)]
        nbrs = nbrs[~visited[nbrs]]
        if nbrs.size == 0:
            break
        frontier = np.unique(nbrs)
        visited[frontier] = True
        dist[frontier] = level
    return dist

"""Bottleneck distance between diagrams and the trajectory-alignment score.

Bottleneck distance is computed exactly: binary search over the finite
set of candidate costs (pairwise L-infinity distances and half-lifetimes),
with a bipartite perfect-matching feasibility check at each probe.
Infinite features only ever match other infinite features.
"""

from __future__ import annotations

import warnings

import numpy as np

from .filtration import PointCloud, rips_filtration
from .reduction import PersistenceDiagram, compute_persistence


def _diag_cost(p) -> float:
    return (p[1] - p[0]) / 2.0


def _feasible(a: np.ndarray, b: np.ndarray, c: float) -> bool:
    """Perfect matching at cost bound c, diagonal copies included."""
    na, nb = len(a), len(b)
    total = na + nb
    # left nodes: a points, then nb diagonal slots; right: b points, then na
    adj: list[list[int]] = [[] for _ in range(total)]
    dummy_right = list(range(nb, nb + na))
    for i in range(na):
        p = a[i]
        row = adj[i]
        for j in range(nb):
            q = b[j]
            if max(abs(p[0] - q[0]), abs(p[1] - q[1])) <= c:
                row.append(j)
        if _diag_cost(p) <= c:
            row.extend(dummy_right)
    for k in range(nb):
        row = adj[na + k]
        for j in range(nb):
            if _diag_cost(b[j]) <= c:
                row.append(j)
        row.extend(dummy_right)

    match_right = [-1] * total

    def augment(u: int, seen: list) -> bool:
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                if match_right[v] == -1 or augment(match_right[v], seen):
                    match_right[v] = u
                    return True
        return False

    for u in range(total):
        if not augment(u, [False] * total):
            return False
    return True


def _finite_bottleneck(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 and len(b) == 0:
        return 0.0
    cand = set()
    for p in a:
        cand.add(_diag_cost(p))
    for q in b:
        cand.add(_diag_cost(q))
    for p in a:
        for q in b:
            cand.add(max(abs(p[0] - q[0]), abs(p[1] - q[1])))
    costs = sorted(cand)
    lo, hi = 0, len(costs) - 1
    # smallest feasible candidate; feasibility is monotone in c
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(a, b, costs[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(costs[lo])


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram,
                        dim: int = 1) -> float:
    """Exact bottleneck distance restricted to one homology dimension.

    Mismatched infinite-feature counts make the distance infinite; that
    case is flagged with a warning rather than raised, since comparing
    truncated diagrams is sometimes exactly what the caller wants.
    """
    iv1 = d1.intervals(dim)
    iv2 = d2.intervals(dim)
    fin1 = iv1[np.isfinite(iv1[:, 1])]
    fin2 = iv2[np.isfinite(iv2[:, 1])]
    inf1 = np.sort(iv1[~np.isfinite(iv1[:, 1]), 0])
    inf2 = np.sort(iv2[~np.isfinite(iv2[:, 1]), 0])
    if len(inf1) != len(inf2):
        warnings.warn(
            f"bottleneck_distance: {len(inf1)} vs {len(inf2)} infinite features "
            f"in dim {dim}; distance is infinite", stacklevel=2)
        return float("inf")
    inf_part = float(np.max(np.abs(inf1 - inf2))) if len(inf1) else 0.0
    return max(inf_part, _finite_bottleneck(fin1, fin2))


def _b1_diagram(cloud) -> PersistenceDiagram:
    pc = cloud if isinstance(cloud, PointCloud) else PointCloud(cloud)
    return compute_persistence(rips_filtration(pc, max_dim=1))


def tsas(traj_a, traj_b) -> float:
    """Trajectory-shape alignment score: normalized W-infinity on loops.

    Builds the degree-1 persistence diagram of each cloud and returns
    the bottleneck distance between them divided by the larger maximum
    lifetime. 0 means identically shaped loop structure; conventions:
    both diagrams loop-free scores 0, exactly one loop-free scores 1.
    """
    pd_a = _b1_diagram(traj_a)
    pd_b = _b1_diagram(traj_b)
    la = pd_a.lifetimes(1)
    lb = pd_b.lifetimes(1)
    if la.size == 0 and lb.size == 0:
        return 0.0
    if la.size == 0 or lb.size == 0:
        return 1.0
    w = bottleneck_distance(pd_a, pd_b, dim=1)
    return float(w / max(la.max(), lb.max()))

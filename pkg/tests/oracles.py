"""Independent reference implementations used to pin expected test values.

Everything here is written against the math directly, not against the
package internals, so a test that compares the two is a real cross-check.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def fd_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


# -- brute-force persistent homology -----------------------------------

def naive_rips_persistence(points: np.ndarray, max_dim: int = 1,
                           max_scale: float | None = None):
    """Dense Z/2 reduction of the full Rips boundary matrix, no tricks.

    Returns {dim: list of (birth, death)} with death=inf for essential
    classes and zero-length pairs dropped. Only meant for tiny inputs.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    if max_scale is None:
        max_scale = float(d.max()) if n > 1 else 0.0

    simplices = []  # (value, dim, vertices)
    for k in range(0, max_dim + 2):
        for vs in combinations(range(n), k + 1):
            if k == 0:
                val = 0.0
            else:
                val = max(d[a][b] for a, b in combinations(vs, 2))
            if val <= max_scale + 1e-12:
                simplices.append((val, k, vs))
    simplices.sort(key=lambda t: (t[0], t[1], t[2]))
    index = {s[2]: i for i, s in enumerate(simplices)}

    m = len(simplices)
    cols = []
    for val, k, vs in simplices:
        if k == 0:
            cols.append(set())
        else:
            faces = [index[f] for f in combinations(vs, k)]
            cols.append(set(faces))

    low_of = {}
    pairs = {}
    for j in range(m):
        col = cols[j]
        while col:
            low = max(col)
            other = low_of.get(low)
            if other is None:
                break
            col ^= cols[other]
        if col:
            low_of[max(col)] = j
            pairs[max(col)] = j

    diagram = {k: [] for k in range(max_dim + 1)}
    paired = set(pairs) | set(pairs.values())
    for i, (val, k, vs) in enumerate(simplices):
        if i in pairs:
            death_val = simplices[pairs[i]][0]
            if k <= max_dim and death_val > val:
                diagram[k].append((val, death_val))
        elif i not in paired and k <= max_dim:
            diagram[k].append((val, np.inf))
    for k in diagram:
        diagram[k].sort()
    return diagram


def naive_bottleneck(d1, d2) -> float:
    """Exhaustive bottleneck distance between two small diagrams.

    Tries every injection of the union into (points + diagonal copies)
    via recursion on the cost-threshold decision problem.
    """
    a = [tuple(p) for p in d1]
    b = [tuple(p) for p in d2]
    if not a and not b:
        return 0.0

    def diag_cost(p):
        return (p[1] - p[0]) / 2.0

    costs = set()
    for p in a:
        costs.add(diag_cost(p))
        for q in b:
            costs.add(max(abs(p[0] - q[0]), abs(p[1] - q[1])))
    for q in b:
        costs.add(diag_cost(q))
    costs = sorted(costs)

    def feasible(c):
        # match a-points to b-points or diagonal, b leftovers must be cheap
        nb = len(b)
        used = [False] * nb

        def rec(i):
            if i == len(a):
                return all(used[j] or diag_cost(b[j]) <= c for j in range(nb))
            p = a[i]
            if diag_cost(p) <= c and rec(i + 1):
                return True
            for j in range(nb):
                if not used[j]:
                    if max(abs(p[0] - b[j][0]), abs(p[1] - b[j][1])) <= c:
                        used[j] = True
                        if rec(i + 1):
                            used[j] = False
                            return True
                        used[j] = False
            return False

        return rec(0)

    for c in costs:
        if feasible(c):
            return c
    return costs[-1]


def pelt_dp_oracle(x: np.ndarray, penalty: float):
    """O(n^2) exact DP for mean-shift changepoints under an RSS cost."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    cum = np.concatenate([[0.0], np.cumsum(x)])
    cum2 = np.concatenate([[0.0], np.cumsum(x * x)])

    def cost(i, j):  # segment x[i:j]
        s = cum[j] - cum[i]
        s2 = cum2[j] - cum2[i]
        return s2 - s * s / (j - i)

    best = np.full(n + 1, np.inf)
    best[0] = -penalty
    back = np.zeros(n + 1, dtype=int)
    for j in range(1, n + 1):
        for i in range(j):
            c = best[i] + cost(i, j) + penalty
            if c < best[j]:
                best[j] = c
                back[j] = i
    cps = []
    j = n
    while j > 0:
        i = back[j]
        if i > 0:
            cps.append(i)
        j = i
    return sorted(cps)


def linear_probe_accuracy(feats: np.ndarray, bits: np.ndarray) -> float:
    """Held-out accuracy of a least-squares linear probe for a binary bit.

    Fits w on the even-index half against +-1 targets, scores the odd
    half by sign. Measures what a single linear readout can recover.
    """
    f = np.asarray(feats, dtype=np.float64)
    t = 2.0 * np.asarray(bits, dtype=np.float64) - 1.0
    tr = np.arange(0, len(f), 2)
    te = np.arange(1, len(f), 2)
    a = np.concatenate([f[tr], np.ones((len(tr), 1))], axis=1)
    w = np.linalg.lstsq(a, t[tr], rcond=None)[0]
    z = np.concatenate([f[te], np.ones((len(te), 1))], axis=1) @ w
    return float(np.mean(np.sign(z) == np.sign(t[te])))


def bilinear_probe_accuracy(fx: np.ndarray, fy: np.ndarray,
                            bits: np.ndarray, ridge: float = 1e-3) -> float:
    """Held-out accuracy of a kernel ridge probe over x (x) y products.

    The feature map is the outer product of the two modality vectors, so
    its kernel factorizes as the elementwise product of the two linear
    Gram matrices. Solves on the even half, scores the odd half.
    """
    x = np.asarray(fx, dtype=np.float64)
    y = np.asarray(fy, dtype=np.float64)
    t = 2.0 * np.asarray(bits, dtype=np.float64) - 1.0
    tr = np.arange(0, len(x), 2)
    te = np.arange(1, len(x), 2)
    k_tr = (x[tr] @ x[tr].T) * (y[tr] @ y[tr].T)
    alpha = np.linalg.solve(k_tr + ridge * len(tr) * np.eye(len(tr)), t[tr])
    k_te = (x[te] @ x[tr].T) * (y[te] @ y[tr].T)
    z = k_te @ alpha
    return float(np.mean(np.sign(z) == np.sign(t[te])))


def ns_entropy_gram(z: np.ndarray, d1: int, d2: int) -> float:
    """Entropy of the singular-value spectrum via Gram-matrix eigenvalues."""
    m = np.asarray(z, dtype=np.float64).reshape(d1, d2)
    lam = np.linalg.eigvalsh(m @ m.T)
    lam = np.clip(lam, 0.0, None)
    tot = lam.sum()
    if tot == 0.0:
        raise ValueError("zero matrix")
    p = lam / tot
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())

"""Pure-Python/numpy kernels; reference semantics for the compiled core."""

import numpy as np


def expand_cliques(n, indptr, indices, max_size):
    if max_size < 3:
        return []
    higher = [set(indices[indptr[u]:indptr[u + 1]].tolist()) for u in range(n)]
    found = [[] for _ in range(max_size - 2)]
    for u in range(n):
        nu = higher[u]
        for v in sorted(nu):
            common = sorted(nu & higher[v])
            for w in common:
                found[0].append((u, v, w))
                if max_size < 4:
                    continue
                for x in common:
                    if x > w and x in higher[w]:
                        found[1].append((u, v, w, x))
    return [np.array(rows, dtype=np.int64).reshape(-1, t + 3) for t, rows in enumerate(found)]


def reduce_boundary(indptr, indices, dims):
    n = len(dims)
    low = np.full(n, -1, dtype=np.int64)
    owner = {}
    reduced = {}
    cleared = set()
    top = int(dims.max()) if n else 0
    indptr = indptr.tolist()
    indices = indices.tolist()
    dims = dims.tolist()
    for d in range(top, 0, -1):
        for j in range(n):
            if dims[j] != d or j in cleared:
                continue
            col = set(indices[indptr[j]:indptr[j + 1]])
            while col:
                piv = max(col)
                k = owner.get(piv)
                if k is None:
                    break
                col ^= reduced[k]
            if col:
                piv = max(col)
                low[j] = piv
                owner[piv] = j
                cleared.add(piv)
                reduced[j] = col
    return low


def best_split(x, y, min_leaf):
    n = x.shape[0]
    if n < 2:
        return False, 0.0, 0.0
    order = np.argsort(x, kind="stable")
    xs = x[order]
    pos_l = np.cumsum(y[order].astype(np.int64))[:-1]
    n_l = np.arange(1, n, dtype=np.int64)
    n_r = n - n_l
    q_l = n_l - pos_l
    pos_r = pos_l[-1] + int(y[order[-1]]) - pos_l
    q_r = n_r - pos_r
    ok = (xs[:-1] != xs[1:]) & (n_l >= min_leaf) & (n_r >= min_leaf)
    if not ok.any():
        return False, 0.0, 0.0
    score = (pos_l * pos_l + q_l * q_l) / n_l + (pos_r * pos_r + q_r * q_r) / n_r
    score[~ok] = -1.0
    i = int(np.argmax(score))
    a, b = float(xs[i]), float(xs[i + 1])
    thr = (a + b) / 2.0
    if thr >= b:
        thr = a
    return True, float(score[i]), thr

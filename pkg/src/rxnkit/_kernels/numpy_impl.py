"""Pure numpy/python reference implementations of the hot kernels.

Semantics here are the contract; ``numba_impl`` must match these outputs
exactly (see tests/test_kernels.py).
"""

import numpy as np


def levenshtein_codes(a: np.ndarray, b: np.ndarray) -> int:
    """Edit distance between two int32 codepoint arrays (unit costs)."""
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    idx = np.arange(lb + 1, dtype=np.int64)
    prev = idx.copy()
    full = np.empty(lb + 1, dtype=np.int64)
    for i in range(1, la + 1):
        cost = (b != a[i - 1]).astype(np.int64)
        full[0] = i
        np.minimum(prev[1:] + 1, prev[:-1] + cost, out=full[1:])
        # resolve the left-to-right insertion dependency with a prefix min
        prev = np.minimum.accumulate(full - idx) + idx
    return int(prev[lb])


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (n,4) and (m,4) corner-format box arrays."""
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    iw = np.clip(ix2 - ix1, 0.0, None)
    ih = np.clip(iy2 - iy1, 0.0, None)
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros((n, m), dtype=np.float64)
    np.divide(inter, union, out=out, where=inter > 0)
    return out


def max_bipartite_matching(adj: np.ndarray):
    """Maximum-cardinality matching on a boolean (n,m) relation.

    Augmenting-path (BFS) algorithm. Returns (cardinality, match_l, match_r)
    where match_l[i] is the right partner of left i (-1 if unmatched).
    """
    n, m = adj.shape
    match_l = np.full(n, -1, dtype=np.int64)
    match_r = np.full(m, -1, dtype=np.int64)
    for start in range(n):
        parent = [-1] * m  # right vertex -> left vertex that reached it
        queue = [start]
        found = -1
        qi = 0
        while qi < len(queue) and found == -1:
            u = queue[qi]
            qi += 1
            for v in range(m):
                if adj[u, v] and parent[v] == -1:
                    parent[v] = u
                    w = match_r[v]
                    if w == -1:
                        found = v
                        break
                    queue.append(w)
        if found == -1:
            continue
        v = found
        while v != -1:
            u = parent[v]
            prev = match_l[u]
            match_l[u] = v
            match_r[v] = u
            v = prev
    return int(np.count_nonzero(match_l >= 0)), match_l, match_r


def _rect_blocked(x1, y1, x2, y2, blocked):
    for k in range(blocked.shape[0]):
        bx1, by1, bx2, by2 = blocked[k]
        if min(x2, bx2) > max(x1, bx1) and min(y2, by2) > max(y1, by1):
            return True
    return False


def _ink_fraction(integral, x1, y1, x2, y2):
    total = (
        integral[y2, x2] - integral[y1, x2] - integral[y2, x1] + integral[y1, x1]
    )
    return total / ((x2 - x1) * (y2 - y1))


def spiral_first_fit(
    integral: np.ndarray,
    img_h: int,
    img_w: int,
    rect_w: int,
    rect_h: int,
    cx: int,
    cy: int,
    max_radius: int,
    step: int,
    ink_limit: float,
    blocked: np.ndarray,
):
    """First rect on an outward square spiral passing all placement checks.

    The spiral starts at the centre offset (0,0) and walks rings of Chebyshev
    radius step, 2*step, ... clockwise from the top-left corner. Returns
    (x1, y1, ink_fraction) of the first accepted rect, or (-1, -1, -1.0).
    """

    def try_offset(dx, dy):
        x1 = cx + dx - rect_w // 2
        y1 = cy + dy - rect_h // 2
        x2 = x1 + rect_w
        y2 = y1 + rect_h
        if x1 < 0 or y1 < 0 or x2 > img_w or y2 > img_h:
            return None
        if _rect_blocked(x1, y1, x2, y2, blocked):
            return None
        frac = _ink_fraction(integral, x1, y1, x2, y2)
        if frac > ink_limit:
            return None
        return (x1, y1, float(frac))

    hit = try_offset(0, 0)
    if hit is not None:
        return hit
    d = step
    while d <= max_radius:
        for dx in range(-d, d + 1, step):  # top edge, left to right
            hit = try_offset(dx, -d)
            if hit is not None:
                return hit
        for dy in range(-d + step, d + 1, step):  # right edge, downwards
            hit = try_offset(d, dy)
            if hit is not None:
                return hit
        for dx in range(d - step, -d - 1, -step):  # bottom edge, right to left
            hit = try_offset(dx, d)
            if hit is not None:
                return hit
        for dy in range(d - step, -d, -step):  # left edge, upwards
            hit = try_offset(-d, dy)
            if hit is not None:
                return hit
        d += step
    return (-1, -1, -1.0)

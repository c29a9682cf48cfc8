"""numba-compiled kernels. Output-equivalent to numpy_impl (tested)."""

import numpy as np
from numba import njit


@njit(cache=True)
def levenshtein_codes(a, b):
    la, lb = a.shape[0], b.shape[0]
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = np.empty(lb + 1, dtype=np.int64)
    curr = np.empty(lb + 1, dtype=np.int64)
    for j in range(lb + 1):
        prev[j] = j
    for i in range(1, la + 1):
        curr[0] = i
        ai = a[i - 1]
        for j in range(1, lb + 1):
            best = prev[j] + 1
            if curr[j - 1] + 1 < best:
                best = curr[j - 1] + 1
            sub = prev[j - 1] if ai == b[j - 1] else prev[j - 1] + 1
            if sub < best:
                best = sub
            curr[j] = best
        prev, curr = curr, prev
    return int(prev[lb])


@njit(cache=True)
def iou_matrix(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m), dtype=np.float64)
    for i in range(n):
        ax1, ay1, ax2, ay2 = a[i, 0], a[i, 1], a[i, 2], a[i, 3]
        area_a = (ax2 - ax1) * (ay2 - ay1)
        for j in range(m):
            ix1 = max(ax1, b[j, 0])
            iy1 = max(ay1, b[j, 1])
            ix2 = min(ax2, b[j, 2])
            iy2 = min(ay2, b[j, 3])
            iw = ix2 - ix1
            ih = iy2 - iy1
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
            out[i, j] = inter / (area_a + area_b - inter)
    return out


@njit(cache=True)
def max_bipartite_matching(adj):
    n, m = adj.shape
    match_l = np.full(n, -1, dtype=np.int64)
    match_r = np.full(m, -1, dtype=np.int64)
    parent = np.empty(m, dtype=np.int64)
    queue = np.empty(n + 1, dtype=np.int64)
    for start in range(n):
        for v in range(m):
            parent[v] = -1
        queue[0] = start
        qlen = 1
        qi = 0
        found = -1
        while qi < qlen and found == -1:
            u = queue[qi]
            qi += 1
            for v in range(m):
                if adj[u, v] and parent[v] == -1:
                    parent[v] = u
                    w = match_r[v]
                    if w == -1:
                        found = v
                        break
                    queue[qlen] = w
                    qlen += 1
        if found == -1:
            continue
        v = found
        while v != -1:
            u = parent[v]
            prev = match_l[u]
            match_l[u] = v
            match_r[v] = u
            v = prev
    card = 0
    for i in range(n):
        if match_l[i] >= 0:
            card += 1
    return card, match_l, match_r


@njit(cache=True)
def _try_offset(
    integral, img_h, img_w, rect_w, rect_h, cx, cy, dx, dy, ink_limit, blocked
):
    x1 = cx + dx - rect_w // 2
    y1 = cy + dy - rect_h // 2
    x2 = x1 + rect_w
    y2 = y1 + rect_h
    if x1 < 0 or y1 < 0 or x2 > img_w or y2 > img_h:
        return -1, -1, -1.0
    for k in range(blocked.shape[0]):
        if (
            min(float(x2), blocked[k, 2]) > max(float(x1), blocked[k, 0])
            and min(float(y2), blocked[k, 3]) > max(float(y1), blocked[k, 1])
        ):
            return -1, -1, -1.0
    total = (
        integral[y2, x2] - integral[y1, x2] - integral[y2, x1] + integral[y1, x1]
    )
    frac = total / ((x2 - x1) * (y2 - y1))
    if frac > ink_limit:
        return -1, -1, -1.0
    return x1, y1, frac


@njit(cache=True)
def spiral_first_fit(
    integral, img_h, img_w, rect_w, rect_h, cx, cy, max_radius, step, ink_limit, blocked
):
    x1, y1, frac = _try_offset(
        integral, img_h, img_w, rect_w, rect_h, cx, cy, 0, 0, ink_limit, blocked
    )
    if x1 >= 0:
        return x1, y1, frac
    d = step
    while d <= max_radius:
        for dx in range(-d, d + 1, step):
            x1, y1, frac = _try_offset(
                integral, img_h, img_w, rect_w, rect_h, cx, cy, dx, -d, ink_limit, blocked
            )
            if x1 >= 0:
                return x1, y1, frac
        for dy in range(-d + step, d + 1, step):
            x1, y1, frac = _try_offset(
                integral, img_h, img_w, rect_w, rect_h, cx, cy, d, dy, ink_limit, blocked
            )
            if x1 >= 0:
                return x1, y1, frac
        for dx in range(d - step, -d - 1, -step):
            x1, y1, frac = _try_offset(
                integral, img_h, img_w, rect_w, rect_h, cx, cy, dx, d, ink_limit, blocked
            )
            if x1 >= 0:
                return x1, y1, frac
        for dy in range(d - step, -d, -step):
            x1, y1, frac = _try_offset(
                integral, img_h, img_w, rect_w, rect_h, cx, cy, -d, dy, ink_limit, blocked
            )
            if x1 >= 0:
                return x1, y1, frac
        d += step
    return -1, -1, -1.0

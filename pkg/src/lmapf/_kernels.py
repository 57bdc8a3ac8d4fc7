"""Compiled grid kernels: BFS distance fields, component labels, wall placement.

All kernels take ``free`` as a C-contiguous uint8 array (1 = free cell).
"""

import numpy as np
from numba import njit

# Up, Right, Down, Left
DR = np.array([-1, 0, 1, 0], dtype=np.int64)
DC = np.array([0, 1, 0, -1], dtype=np.int64)


@njit(cache=True)
def bfs_distances(free, gr, gc):
    h, w = free.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if not free[gr, gc]:
        return dist
    qr = np.empty(h * w, dtype=np.int32)
    qc = np.empty(h * w, dtype=np.int32)
    head = 0
    tail = 1
    qr[0] = gr
    qc[0] = gc
    dist[gr, gc] = 0
    while head < tail:
        r = qr[head]
        c = qc[head]
        head += 1
        d = dist[r, c] + 1
        for k in range(4):
            nr = r + DR[k]
            nc = c + DC[k]
            if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                qr[tail] = nr
                qc[tail] = nc
                tail += 1
    return dist


@njit(cache=True)
def label_components(free):
    """4-connected labels of free cells (0, 1, ...); obstacles get -1."""
    h, w = free.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    qr = np.empty(h * w, dtype=np.int32)
    qc = np.empty(h * w, dtype=np.int32)
    n = 0
    for sr in range(h):
        for sc in range(w):
            if not free[sr, sc] or labels[sr, sc] >= 0:
                continue
            labels[sr, sc] = n
            head = 0
            tail = 1
            qr[0] = sr
            qc[0] = sc
            while head < tail:
                r = qr[head]
                c = qc[head]
                head += 1
                for k in range(4):
                    nr = r + DR[k]
                    nc = c + DC[k]
                    if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and labels[nr, nc] < 0:
                        labels[nr, nc] = n
                        qr[tail] = nr
                        qc[tail] = nc
                        tail += 1
            n += 1
    return labels


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _all_linked(free, stamp, base, qr, qc, lab, parent, active, nbr_r, nbr_c, n_nbr):
    # Multi-source BFS, one group per neighbour, merged on contact. A group
    # whose frontier empties while others remain is a sealed pocket, so the
    # cost is bounded by the smaller side of any split.
    h, w = free.shape
    for i in range(n_nbr):
        parent[i] = i
        active[i] = 1
        stamp[nbr_r[i], nbr_c[i]] = base + i
        qr[i] = nbr_r[i]
        qc[i] = nbr_c[i]
        lab[i] = i
    groups = n_nbr
    head = 0
    tail = n_nbr
    while head < tail:
        r = qr[head]
        c = qc[head]
        root = _find(parent, lab[head])
        head += 1
        for k in range(4):
            nr = r + DR[k]
            nc = c + DC[k]
            if nr < 0 or nr >= h or nc < 0 or nc >= w or not free[nr, nc]:
                continue
            s = stamp[nr, nc] - base
            if s < 0 or s >= n_nbr:
                stamp[nr, nc] = base + root
                qr[tail] = nr
                qc[tail] = nc
                lab[tail] = root
                tail += 1
                active[root] += 1
            else:
                other = _find(parent, s)
                if other != root:
                    parent[other] = root
                    active[root] += active[other]
                    groups -= 1
                    if groups == 1:
                        return True
        active[root] -= 1
        if active[root] == 0:
            return False
    return groups == 1


@njit(cache=True)
def place_wall_segments(free, target, orient, lengths, rows, cols):
    """Place straight wall segments into ``free`` in place.

    A segment is rejected when it adds no obstacle or splits the free space.
    Segments are trimmed so the obstacle count never exceeds ``target``.
    Returns the final obstacle count.
    """
    h, w = free.shape
    count = 0
    for r in range(h):
        for c in range(w):
            if not free[r, c]:
                count += 1
    stamp = np.zeros((h, w), dtype=np.int64)
    mark = 0
    qr = np.empty(h * w, dtype=np.int32)
    qc = np.empty(h * w, dtype=np.int32)
    max_len = 1
    for i in range(lengths.shape[0]):
        if lengths[i] > max_len:
            max_len = lengths[i]
    seg_r = np.empty(max_len, dtype=np.int64)
    seg_c = np.empty(max_len, dtype=np.int64)
    nbr_r = np.empty(4 * max_len + 4, dtype=np.int64)
    nbr_c = np.empty(4 * max_len + 4, dtype=np.int64)
    lab = np.empty(h * w, dtype=np.int64)
    parent = np.empty(4 * max_len + 4, dtype=np.int64)
    active = np.empty(4 * max_len + 4, dtype=np.int64)
    for k in range(orient.shape[0]):
        if count >= target:
            break
        dr = 0
        dc = 1
        if orient[k] == 1:
            dr = 1
            dc = 0
        n = 0
        for i in range(lengths[k]):
            rr = rows[k] + i * dr
            cc = cols[k] + i * dc
            if rr >= h or cc >= w:
                break
            if free[rr, cc]:
                seg_r[n] = rr
                seg_c[n] = cc
                n += 1
                if count + n >= target:
                    break
        if n == 0:
            continue
        for i in range(n):
            free[seg_r[i], seg_c[i]] = 0
        # collect distinct free neighbours of the new wall cells
        mark += 3
        nb = 0
        for i in range(n):
            for d in range(4):
                nr = seg_r[i] + DR[d]
                nc = seg_c[i] + DC[d]
                if 0 <= nr < h and 0 <= nc < w and free[nr, nc] and stamp[nr, nc] != mark:
                    stamp[nr, nc] = mark
                    nbr_r[nb] = nr
                    nbr_c[nb] = nc
                    nb += 1
        ok = True
        if nb > 1:
            mark += 3
            ok = _all_linked(free, stamp, mark, qr, qc, lab, parent, active, nbr_r, nbr_c, nb)
            mark += nb
        if ok:
            count += n
        else:
            for i in range(n):
                free[seg_r[i], seg_c[i]] = 1
    return count

"""Pure-Python versions of the compiled kernels in ``_ckernels.pyx``.

Same inputs, same outputs, same tie-breaking. Used when the extension is not
built or when ``CROSSCLASS_PURE_PYTHON=1``.
"""
import heapq
import math

import numpy as np


def _neighbors(p, ny, nx):
    y, x = divmod(p, nx)
    if y > 0:
        yield p - nx
    if x > 0:
        yield p - 1
    if x < nx - 1:
        yield p + 1
    if y < ny - 1:
        yield p + nx


def _find(parent, p):
    root = p
    while parent[root] != root:
        root = parent[root]
    while parent[p] != root:
        parent[p], p = root, parent[p]
    return root


def minima_markers(values, order, h):
    ny, nx = values.shape
    n = ny * nx
    v = values.ravel().tolist()
    parent = [-1] * n
    size = [0] * n
    rmin = [0.0] * n
    rep = [0] * n
    state = [False] * n
    reps = []

    for p in order.tolist():
        val = v[p]
        parent[p] = p
        size[p] = 1
        rmin[p] = val
        rep[p] = p
        state[p] = True
        for q in _neighbors(p, ny, nx):
            if parent[q] < 0:
                continue
            rp = _find(parent, p)
            rq = _find(parent, q)
            if rp == rq:
                continue
            for r in (rp, rq):
                if state[r] and val > rmin[r] + h:
                    reps.append(rep[r])
                    state[r] = False
            if (rmin[rp], rep[rp]) < (rmin[rq], rep[rq]):
                a, b = rp, rq
            else:
                a, b = rq, rp
            if size[a] >= size[b]:
                parent[b] = a
                size[a] += size[b]
            else:
                parent[a] = b
                size[b] += size[a]
                rmin[b], rep[b], state[b] = rmin[a], rep[a], state[a]
    for p in order.tolist():
        if parent[p] == p and state[p]:
            reps.append(rep[p])
            state[p] = False

    lab = [0] * n
    for k, p in enumerate(reps, start=1):
        lvl = v[p] + h
        lab[p] = k
        stack = [p]
        while stack:
            p = stack.pop()
            for q in _neighbors(p, ny, nx):
                if lab[q] == 0 and v[q] <= lvl:
                    lab[q] = k
                    stack.append(q)
    return _renumber(lab, ny, nx)


def _renumber(lab, ny, nx):
    remap = {}
    out = [remap.setdefault(l, len(remap) + 1) if l else 0 for l in lab]
    return np.asarray(out, dtype=np.int32).reshape(ny, nx)


def priority_flood(elev, markers, stop):
    ny, nx = elev.shape
    e = elev.ravel().tolist()
    lab = markers.ravel().tolist()
    heap = []
    for i in range(ny * nx):
        if lab[i] > 0 and e[i] < stop:
            heap.append((e[i], i))
        else:
            lab[i] = 0
    heapq.heapify(heap)
    while heap:
        _, p = heapq.heappop(heap)
        for q in _neighbors(p, ny, nx):
            if lab[q] == 0 and e[q] < stop:
                lab[q] = lab[p]
                heapq.heappush(heap, (e[q], q))
    return np.asarray(lab, dtype=np.int32).reshape(ny, nx)


def split_components(labels):
    ny, nx = labels.shape
    src = labels.ravel().tolist()
    lab = [0] * (ny * nx)
    next_id = 0
    for i, cur in enumerate(src):
        if cur == 0 or lab[i]:
            continue
        next_id += 1
        lab[i] = next_id
        stack = [i]
        while stack:
            p = stack.pop()
            for q in _neighbors(p, ny, nx):
                if lab[q] == 0 and src[q] == cur:
                    lab[q] = next_id
                    stack.append(q)
    return np.asarray(lab, dtype=np.int32).reshape(ny, nx)


def geodesic_flood(elev, src, cutoff):
    ny, nx = elev.shape
    n = ny * nx
    e = elev.ravel().tolist()
    s = src.ravel().tolist()
    best = [(math.inf, 256, n)] * n
    done = [False] * n
    out = [0] * n
    heap = []
    for i in range(n):
        if s[i] > 0 and e[i] <= cutoff:
            best[i] = (e[i], s[i], i)
            heap.append((e[i], s[i], i, i))
    heapq.heapify(heap)
    while heap:
        cost, color, origin, p = heapq.heappop(heap)
        if done[p]:
            continue
        done[p] = True
        out[p] = color
        for q in _neighbors(p, ny, nx):
            if done[q]:
                continue
            c = cost + e[q]
            if c > cutoff:
                continue
            cand = (c, color, origin)
            if cand < best[q]:
                best[q] = cand
                heapq.heappush(heap, (c, color, origin, q))
    return np.asarray(out, dtype=np.uint8).reshape(ny, nx)


def window_distinct_count(labels, radius):
    # box-dilate each label's mask and count how many masks cover a pixel
    from scipy import ndimage

    ny, nx = labels.shape
    out = np.zeros((ny, nx), dtype=np.int32)
    size = 2 * radius + 1
    for sl, lab in zip(ndimage.find_objects(labels), range(1, int(labels.max(initial=0)) + 1)):
        if sl is None:
            continue
        y0 = max(sl[0].start - radius, 0)
        y1 = min(sl[0].stop + radius, ny)
        x0 = max(sl[1].start - radius, 0)
        x1 = min(sl[1].stop + radius, nx)
        mask = labels[y0:y1, x0:x1] == lab
        out[y0:y1, x0:x1] += ndimage.maximum_filter(mask, size=size, mode="constant", cval=0)
    return out

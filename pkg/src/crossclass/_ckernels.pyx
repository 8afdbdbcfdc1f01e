# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels. Semantics must match ``_pykernels`` exactly."""
import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t
from libc.stdlib cimport free, malloc, realloc

# ---------------------------------------------------------------- heap

cdef struct Entry:
    double key
    int64_t a
    int64_t b
    int64_t node


cdef struct Heap:
    Entry* data
    Py_ssize_t size
    Py_ssize_t cap


cdef inline bint _less(Entry* x, Entry* y) noexcept nogil:
    if x.key != y.key:
        return x.key < y.key
    if x.a != y.a:
        return x.a < y.a
    if x.b != y.b:
        return x.b < y.b
    return x.node < y.node


cdef int _heap_init(Heap* h, Py_ssize_t cap) noexcept nogil:
    if cap < 16:
        cap = 16
    h.data = <Entry*> malloc(cap * sizeof(Entry))
    h.size = 0
    h.cap = cap
    return 0 if h.data != NULL else -1


cdef int _heap_push(Heap* h, double key, int64_t a, int64_t b, int64_t node) noexcept nogil:
    cdef Entry* grown
    cdef Py_ssize_t i, parent
    cdef Entry e
    if h.size == h.cap:
        grown = <Entry*> realloc(h.data, 2 * h.cap * sizeof(Entry))
        if grown == NULL:
            return -1
        h.data = grown
        h.cap *= 2
    e.key = key
    e.a = a
    e.b = b
    e.node = node
    i = h.size
    h.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _less(&e, &h.data[parent]):
            h.data[i] = h.data[parent]
            i = parent
        else:
            break
    h.data[i] = e
    return 0


cdef Entry _heap_pop(Heap* h) noexcept nogil:
    cdef Entry top = h.data[0]
    cdef Entry last
    cdef Py_ssize_t i = 0, child
    h.size -= 1
    if h.size > 0:
        last = h.data[h.size]
        while True:
            child = 2 * i + 1
            if child >= h.size:
                break
            if child + 1 < h.size and _less(&h.data[child + 1], &h.data[child]):
                child += 1
            if _less(&h.data[child], &last):
                h.data[i] = h.data[child]
                i = child
            else:
                break
        h.data[i] = last
    return top


# ---------------------------------------------------------------- minima

cdef inline int64_t _find(int64_t* parent, int64_t p) noexcept nogil:
    cdef int64_t root = p, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[p] != root:
        nxt = parent[p]
        parent[p] = root
        p = nxt
    return root


def minima_markers(const double[:, ::1] values, const int64_t[::1] order, double h):
    """Label the h-deep regional minima of ``values`` (4-connectivity).

    ``order`` is a stable argsort of the flattened values.
    """
    cdef Py_ssize_t ny = values.shape[0], nx = values.shape[1]
    cdef Py_ssize_t n = ny * nx
    cdef const double* v = &values[0, 0]
    out_np = np.zeros((ny, nx), dtype=np.int32)
    if n == 0:
        return out_np
    cdef int32_t[:, ::1] out = out_np
    cdef int32_t* lab = &out[0, 0]
    parent_np = np.full(n, -1, dtype=np.int64)
    size_np = np.zeros(n, dtype=np.int64)
    rmin_np = np.zeros(n, dtype=np.float64)
    rep_np = np.zeros(n, dtype=np.int64)
    state_np = np.zeros(n, dtype=np.uint8)
    reps_np = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] parent = parent_np
    cdef int64_t[::1] size = size_np
    cdef double[::1] rmin = rmin_np
    cdef int64_t[::1] rep = rep_np
    cdef uint8_t[::1] state = state_np
    cdef int64_t[::1] reps = reps_np
    cdef Py_ssize_t nreps = 0
    cdef Py_ssize_t t, k
    cdef int64_t p, q, rp, rq, A, B, y, x
    cdef double val, lvl
    cdef int64_t nbr[4]
    cdef int nn
    cdef int64_t* stack
    cdef Py_ssize_t top
    cdef int32_t next_id, tmp
    cdef int32_t* remap

    with nogil:
        for t in range(n):
            p = order[t]
            val = v[p]
            parent[p] = p
            size[p] = 1
            rmin[p] = val
            rep[p] = p
            state[p] = 1
            y = p // nx
            x = p - y * nx
            nn = 0
            if y > 0:
                nbr[nn] = p - nx; nn += 1
            if x > 0:
                nbr[nn] = p - 1; nn += 1
            if x < nx - 1:
                nbr[nn] = p + 1; nn += 1
            if y < ny - 1:
                nbr[nn] = p + nx; nn += 1
            for k in range(nn):
                q = nbr[k]
                if parent[q] < 0:
                    continue
                rp = _find(&parent[0], p)
                rq = _find(&parent[0], q)
                if rp == rq:
                    continue
                # components whose level min+h is below val are complete
                if state[rp] and val > rmin[rp] + h:
                    reps[nreps] = rep[rp]; nreps += 1; state[rp] = 0
                if state[rq] and val > rmin[rq] + h:
                    reps[nreps] = rep[rq]; nreps += 1; state[rq] = 0
                if rmin[rp] < rmin[rq] or (rmin[rp] == rmin[rq] and rep[rp] < rep[rq]):
                    A = rp; B = rq
                else:
                    A = rq; B = rp
                # A's candidacy survives; B is either recorded already or absorbed
                if size[A] >= size[B]:
                    parent[B] = A
                    size[A] += size[B]
                else:
                    parent[A] = B
                    size[B] += size[A]
                    rmin[B] = rmin[A]
                    rep[B] = rep[A]
                    state[B] = state[A]
        for t in range(n):
            p = order[t]
            if parent[p] == p and state[p]:
                reps[nreps] = rep[p]; nreps += 1; state[p] = 0

    # flood each recorded minimum over {v <= min + h}
    stack = <int64_t*> malloc(n * sizeof(int64_t))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for k in range(nreps):
                p = reps[k]
                lvl = v[p] + h
                lab[p] = <int32_t> (k + 1)
                stack[0] = p
                top = 1
                while top > 0:
                    top -= 1
                    p = stack[top]
                    y = p // nx
                    x = p - y * nx
                    nn = 0
                    if y > 0:
                        nbr[nn] = p - nx; nn += 1
                    if x > 0:
                        nbr[nn] = p - 1; nn += 1
                    if x < nx - 1:
                        nbr[nn] = p + 1; nn += 1
                    if y < ny - 1:
                        nbr[nn] = p + nx; nn += 1
                    for t in range(nn):
                        q = nbr[t]
                        if lab[q] == 0 and v[q] <= lvl:
                            lab[q] = <int32_t> (k + 1)
                            stack[top] = q
                            top += 1
    finally:
        free(stack)
    _renumber_scan_order(lab, n, nreps)
    return out_np


cdef int _renumber_scan_order(int32_t* lab, Py_ssize_t n, Py_ssize_t nlab) except -1:
    cdef int32_t* remap = <int32_t*> malloc((nlab + 1) * sizeof(int32_t))
    cdef Py_ssize_t i
    cdef int32_t next_id = 0, tmp
    if remap == NULL:
        raise MemoryError()
    with nogil:
        for i in range(nlab + 1):
            remap[i] = 0
        for i in range(n):
            tmp = lab[i]
            if tmp != 0:
                if remap[tmp] == 0:
                    next_id += 1
                    remap[tmp] = next_id
                lab[i] = remap[tmp]
    free(remap)
    return 0


# ---------------------------------------------------------------- flooding

def priority_flood(const double[:, ::1] elev, const int32_t[:, ::1] markers, double stop):
    """Marker-seeded watershed restricted to ``elev < stop``.

    Labels are assigned when a pixel is first reached; the queue is ordered by
    (elevation, raster index).
    """
    cdef Py_ssize_t ny = elev.shape[0], nx = elev.shape[1]
    cdef Py_ssize_t n = ny * nx
    out_np = np.zeros((ny, nx), dtype=np.int32)
    if n == 0:
        return out_np
    cdef int32_t[:, ::1] out = out_np
    cdef int32_t* lab = &out[0, 0]
    cdef const double* e = &elev[0, 0]
    cdef const int32_t* m = &markers[0, 0]
    cdef Heap heap
    cdef Entry cur
    cdef Py_ssize_t i
    cdef int64_t p, q, y, x
    cdef int64_t nbr[4]
    cdef int nn, k, err = 0
    if _heap_init(&heap, n // 4) != 0:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                if m[i] > 0 and e[i] < stop:
                    lab[i] = m[i]
                    if _heap_push(&heap, e[i], i, 0, i) != 0:
                        err = 1
                        break
            while err == 0 and heap.size > 0:
                cur = _heap_pop(&heap)
                p = cur.node
                y = p // nx
                x = p - y * nx
                nn = 0
                if y > 0:
                    nbr[nn] = p - nx; nn += 1
                if x > 0:
                    nbr[nn] = p - 1; nn += 1
                if x < nx - 1:
                    nbr[nn] = p + 1; nn += 1
                if y < ny - 1:
                    nbr[nn] = p + nx; nn += 1
                for k in range(nn):
                    q = nbr[k]
                    if lab[q] == 0 and e[q] < stop:
                        lab[q] = lab[p]
                        if _heap_push(&heap, e[q], q, 0, q) != 0:
                            err = 1
                            break
    finally:
        free(heap.data)
    if err:
        raise MemoryError()
    return out_np


def split_components(const int32_t[:, ::1] labels):
    """Relabel 4-connected same-value components, numbered in raster order."""
    cdef Py_ssize_t ny = labels.shape[0], nx = labels.shape[1]
    cdef Py_ssize_t n = ny * nx
    out_np = np.zeros((ny, nx), dtype=np.int32)
    if n == 0:
        return out_np
    cdef int32_t[:, ::1] out = out_np
    cdef int32_t* lab = &out[0, 0]
    cdef const int32_t* src = &labels[0, 0]
    cdef int64_t* stack = <int64_t*> malloc(n * sizeof(int64_t))
    cdef Py_ssize_t i, top
    cdef int64_t p, q, y, x
    cdef int64_t nbr[4]
    cdef int nn, k
    cdef int32_t cur, next_id = 0
    if stack == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n):
            if src[i] == 0 or lab[i] != 0:
                continue
            next_id += 1
            cur = src[i]
            lab[i] = next_id
            stack[0] = i
            top = 1
            while top > 0:
                top -= 1
                p = stack[top]
                y = p // nx
                x = p - y * nx
                nn = 0
                if y > 0:
                    nbr[nn] = p - nx; nn += 1
                if x > 0:
                    nbr[nn] = p - 1; nn += 1
                if x < nx - 1:
                    nbr[nn] = p + 1; nn += 1
                if y < ny - 1:
                    nbr[nn] = p + nx; nn += 1
                for k in range(nn):
                    q = nbr[k]
                    if lab[q] == 0 and src[q] == cur:
                        lab[q] = next_id
                        stack[top] = q
                        top += 1
    free(stack)
    return out_np


def geodesic_flood(const double[:, ::1] elev, const uint8_t[:, ::1] src, double cutoff):
    """Multi-source shortest path; entering a pixel costs its elevation.

    Each pixel takes the colour of the source minimising
    (path cost, colour, source raster index); costs above ``cutoff`` give 0.
    """
    cdef Py_ssize_t ny = elev.shape[0], nx = elev.shape[1]
    cdef Py_ssize_t n = ny * nx
    out_np = np.zeros((ny, nx), dtype=np.uint8)
    if n == 0:
        return out_np
    cdef uint8_t[:, ::1] out = out_np
    cdef uint8_t* col = &out[0, 0]
    cdef const double* e = &elev[0, 0]
    cdef const uint8_t* s = &src[0, 0]
    best_cost_np = np.full(n, np.inf, dtype=np.float64)
    best_col_np = np.full(n, 256, dtype=np.int64)
    best_src_np = np.full(n, n, dtype=np.int64)
    done_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] bc = best_cost_np
    cdef int64_t[::1] bcol = best_col_np
    cdef int64_t[::1] bsrc = best_src_np
    cdef uint8_t[::1] done = done_np
    cdef Heap heap
    cdef Entry cur
    cdef Py_ssize_t i
    cdef int64_t p, q, y, x
    cdef int64_t nbr[4]
    cdef int nn, k, err = 0
    cdef double c
    if _heap_init(&heap, n // 4) != 0:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                if s[i] > 0:
                    c = e[i]
                    if c <= cutoff:
                        bc[i] = c
                        bcol[i] = s[i]
                        bsrc[i] = i
                        if _heap_push(&heap, c, s[i], i, i) != 0:
                            err = 1
                            break
            while err == 0 and heap.size > 0:
                cur = _heap_pop(&heap)
                p = cur.node
                if done[p]:
                    continue
                done[p] = 1
                col[p] = <uint8_t> cur.a
                y = p // nx
                x = p - y * nx
                nn = 0
                if y > 0:
                    nbr[nn] = p - nx; nn += 1
                if x > 0:
                    nbr[nn] = p - 1; nn += 1
                if x < nx - 1:
                    nbr[nn] = p + 1; nn += 1
                if y < ny - 1:
                    nbr[nn] = p + nx; nn += 1
                for k in range(nn):
                    q = nbr[k]
                    if done[q]:
                        continue
                    c = cur.key + e[q]
                    if c > cutoff:
                        continue
                    if c < bc[q] or (c == bc[q] and (cur.a < bcol[q] or (cur.a == bcol[q] and cur.b < bsrc[q]))):
                        bc[q] = c
                        bcol[q] = cur.a
                        bsrc[q] = cur.b
                        if _heap_push(&heap, c, cur.a, cur.b, q) != 0:
                            err = 1
                            break
    finally:
        free(heap.data)
    if err:
        raise MemoryError()
    return out_np


# ---------------------------------------------------------------- density

def window_distinct_count(const uint32_t[:, ::1] labels, Py_ssize_t radius):
    """Distinct nonzero labels in the (2r+1)^2 box around each pixel, clipped at borders."""
    cdef Py_ssize_t ny = labels.shape[0], nx = labels.shape[1]
    out_np = np.zeros((ny, nx), dtype=np.int32)
    if ny == 0 or nx == 0:
        return out_np
    cdef int32_t[:, ::1] out = out_np
    cdef uint32_t maxlab = 0
    cdef Py_ssize_t y, x, yy, y0, y1, xin, xout
    cdef uint32_t l
    for y in range(ny):
        for x in range(nx):
            if labels[y, x] > maxlab:
                maxlab = labels[y, x]
    hist_np = np.zeros(<Py_ssize_t> maxlab + 1, dtype=np.int32)
    cdef int32_t[::1] hist = hist_np
    cdef int32_t distinct
    with nogil:
        for y in range(ny):
            y0 = y - radius if y > radius else 0
            y1 = y + radius if y + radius < ny - 1 else ny - 1
            distinct = 0
            for xin in range(0, radius if radius < nx else nx):
                for yy in range(y0, y1 + 1):
                    l = labels[yy, xin]
                    if l != 0:
                        if hist[l] == 0:
                            distinct += 1
                        hist[l] += 1
            for x in range(nx):
                xin = x + radius
                if xin < nx:
                    for yy in range(y0, y1 + 1):
                        l = labels[yy, xin]
                        if l != 0:
                            if hist[l] == 0:
                                distinct += 1
                            hist[l] += 1
                xout = x - radius - 1
                if xout >= 0:
                    for yy in range(y0, y1 + 1):
                        l = labels[yy, xout]
                        if l != 0:
                            hist[l] -= 1
                            if hist[l] == 0:
                                distinct -= 1
                out[y, x] = distinct
            # clear what is still in the window
            for xout in range(nx - radius - 1 if nx - radius - 1 > 0 else 0, nx):
                for yy in range(y0, y1 + 1):
                    l = labels[yy, xout]
                    if l != 0:
                        hist[l] = 0
    return out_np

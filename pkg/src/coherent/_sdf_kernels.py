"""numba kernels behind coherent.sdf: ray-parity inside test, BVH distance
queries and trilinear sampling."""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

LEAF_SIZE = 4
BARY_EPS = 1e-10
# irrational direction for deterministic ray jitter
JITTER_DIR = (0.7548776662466927, 0.5698402909980532)


# ---------------------------------------------------------------------------
# inside test
# ---------------------------------------------------------------------------

@njit(cache=True)
def _line_hit(pb, pc, tb, tc):
    """Barycentric hit of the 2-D point (pb, pc) against a projected triangle.

    Returns (status, l0, l1, l2): status 0 miss, 1 hit, 2 degenerate (point on
    an edge or vertex within BARY_EPS).
    """
    area = (tb[1] - tb[0]) * (tc[2] - tc[0]) - (tb[2] - tb[0]) * (tc[1] - tc[0])
    if area == 0.0:
        return 0, 0.0, 0.0, 0.0
    w0 = (tb[1] - pb) * (tc[2] - pc) - (tb[2] - pb) * (tc[1] - pc)
    w1 = (tb[2] - pb) * (tc[0] - pc) - (tb[0] - pb) * (tc[2] - pc)
    w2 = (tb[0] - pb) * (tc[1] - pc) - (tb[1] - pb) * (tc[0] - pc)
    l0 = w0 / area
    l1 = w1 / area
    l2 = w2 / area
    if l0 < -BARY_EPS or l1 < -BARY_EPS or l2 < -BARY_EPS:
        return 0, 0.0, 0.0, 0.0
    if l0 <= BARY_EPS or l1 <= BARY_EPS or l2 <= BARY_EPS:
        return 2, l0, l1, l2
    return 1, l0, l1, l2


@njit(cache=True)
def _parity_from_hits(hits, n_hits, oa, sa, na, out_row):
    hs = np.sort(hits[:n_hits])
    # count crossings strictly beyond each node along +a
    m = 0
    for i in range(na):
        x = oa + i * sa
        while m < n_hits and hs[m] <= x:
            m += 1
        out_row[i] = (n_hits - m) & 1


@njit(cache=True)
def _brute_line(tri_a, tri_b, tri_c, pb, pc, hits):
    """All crossings of the line (pb, pc) with every triangle; -1 if degenerate."""
    n = 0
    tb = np.empty(3)
    tc = np.empty(3)
    for t in range(tri_a.shape[0]):
        for v in range(3):
            tb[v] = tri_b[t, v]
            tc[v] = tri_c[t, v]
        st, l0, l1, l2 = _line_hit(pb, pc, tb, tc)
        if st == 2:
            return -1
        if st == 1:
            hits[n] = l0 * tri_a[t, 0] + l1 * tri_a[t, 1] + l2 * tri_a[t, 2]
            n += 1
    return n


@njit(cache=True, parallel=True)
def axis_parity(tri_a, tri_b, tri_c, row_ptr, row_tris, oa, ob, oc, sa, sb, sc,
                na, nb, nc, jitter):
    """Ray-parity along +a for every grid node; result indexed [k_c, j_b, i_a].

    ``row_ptr``/``row_tris`` list, for each c-row, the triangles whose c-extent
    covers it. Each c-row is an independent unit of work.
    """
    out = np.zeros((nc, nb, na), dtype=np.uint8)
    n_tri = tri_a.shape[0]
    for k in prange(nc):
        pc = oc + k * sc
        start = row_ptr[k]
        stop = row_ptr[k + 1]
        counts = np.zeros(nb + 1, dtype=np.int64)
        degenerate = np.zeros(nb, dtype=np.uint8)
        tb = np.empty(3)
        tc = np.empty(3)
        # pass 1: count
        for q in range(start, stop):
            t = row_tris[q]
            bmin = min(tri_b[t, 0], min(tri_b[t, 1], tri_b[t, 2]))
            bmax = max(tri_b[t, 0], max(tri_b[t, 1], tri_b[t, 2]))
            j0 = max(0, int(math.ceil((bmin - ob) / sb)) - 1)
            j1 = min(nb - 1, int(math.floor((bmax - ob) / sb)) + 1)
            for v in range(3):
                tb[v] = tri_b[t, v]
                tc[v] = tri_c[t, v]
            for j in range(j0, j1 + 1):
                st, l0, l1, l2 = _line_hit(ob + j * sb, pc, tb, tc)
                if st == 1:
                    counts[j + 1] += 1
                elif st == 2:
                    degenerate[j] = 1
        for j in range(nb):
            counts[j + 1] += counts[j]
        hits = np.empty(max(counts[nb], 1))
        fill = counts[:nb].copy()
        # pass 2: fill
        for q in range(start, stop):
            t = row_tris[q]
            bmin = min(tri_b[t, 0], min(tri_b[t, 1], tri_b[t, 2]))
            bmax = max(tri_b[t, 0], max(tri_b[t, 1], tri_b[t, 2]))
            j0 = max(0, int(math.ceil((bmin - ob) / sb)) - 1)
            j1 = min(nb - 1, int(math.floor((bmax - ob) / sb)) + 1)
            for v in range(3):
                tb[v] = tri_b[t, v]
                tc[v] = tri_c[t, v]
            for j in range(j0, j1 + 1):
                if degenerate[j]:
                    continue
                st, l0, l1, l2 = _line_hit(ob + j * sb, pc, tb, tc)
                if st == 1:
                    hits[fill[j]] = l0 * tri_a[t, 0] + l1 * tri_a[t, 1] + l2 * tri_a[t, 2]
                    fill[j] += 1
        for j in range(nb):
            if degenerate[j]:
                continue
            s = counts[j]
            _parity_from_hits(hits[s:], counts[j + 1] - s, oa, sa, na, out[k, j])
        # lines touching an edge or vertex: jitter and recount against all triangles
        scratch = np.empty(n_tri)
        for j in range(nb):
            if not degenerate[j]:
                continue
            for attempt in range(1, 17):
                pb_j = ob + j * sb + attempt * jitter * JITTER_DIR[0]
                pc_j = pc + attempt * jitter * JITTER_DIR[1]
                n = _brute_line(tri_a, tri_b, tri_c, pb_j, pc_j, scratch)
                if n >= 0:
                    _parity_from_hits(scratch, n, oa, sa, na, out[k, j])
                    break
    return out


# ---------------------------------------------------------------------------
# BVH + exact point/triangle distance
# ---------------------------------------------------------------------------

@njit(cache=True)
def build_bvh(tri):
    """Median-split BVH over triangles ``tri`` of shape (F, 3, 3).

    Returns (order, bmin, bmax, child, start, count); a node is a leaf when
    ``count > 0``, otherwise its children are ``child[n]`` and ``child[n] + 1``.
    """
    n_tri = tri.shape[0]
    cent = np.empty((n_tri, 3))
    lo = np.empty((n_tri, 3))
    hi = np.empty((n_tri, 3))
    for t in range(n_tri):
        for a in range(3):
            x0 = tri[t, 0, a]
            x1 = tri[t, 1, a]
            x2 = tri[t, 2, a]
            lo[t, a] = min(x0, min(x1, x2))
            hi[t, a] = max(x0, max(x1, x2))
            cent[t, a] = (x0 + x1 + x2) / 3.0
    order = np.arange(n_tri)
    max_nodes = 2 * n_tri + 1
    bmin = np.empty((max_nodes, 3))
    bmax = np.empty((max_nodes, 3))
    child = np.full(max_nodes, -1, dtype=np.int64)
    start = np.zeros(max_nodes, dtype=np.int64)
    count = np.zeros(max_nodes, dtype=np.int64)
    stack = np.empty(max_nodes, dtype=np.int64)
    n_nodes = 1
    start[0] = 0
    count[0] = n_tri
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        c = count[node]
        for a in range(3):
            bmin[node, a] = np.inf
            bmax[node, a] = -np.inf
        for q in range(s, s + c):
            t = order[q]
            for a in range(3):
                bmin[node, a] = min(bmin[node, a], lo[t, a])
                bmax[node, a] = max(bmax[node, a], hi[t, a])
        if c <= LEAF_SIZE:
            continue
        axis = 0
        ext = -1.0
        for a in range(3):
            cmin = np.inf
            cmax = -np.inf
            for q in range(s, s + c):
                v = cent[order[q], a]
                cmin = min(cmin, v)
                cmax = max(cmax, v)
            if cmax - cmin > ext:
                ext = cmax - cmin
                axis = a
        keys = np.empty(c)
        for q in range(c):
            keys[q] = cent[order[s + q], axis]
        perm = np.argsort(keys, kind="mergesort")
        seg = order[s:s + c].copy()
        for q in range(c):
            order[s + q] = seg[perm[q]]
        half = c // 2
        left = n_nodes
        n_nodes += 2
        child[node] = left
        count[node] = 0
        start[left] = s
        count[left] = half
        start[left + 1] = s + half
        count[left + 1] = c - half
        stack[sp] = left
        stack[sp + 1] = left + 1
        sp += 2
    return order, bmin[:n_nodes].copy(), bmax[:n_nodes].copy(), child[:n_nodes].copy(), \
        start[:n_nodes].copy(), count[:n_nodes].copy()


@njit(cache=True)
def point_triangle_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared distance from p to triangle abc (Voronoi-region closest point)."""
    abx = bx - ax
    aby = by - ay
    abz = bz - az
    acx = cx - ax
    acy = cy - ay
    acz = cz - az
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = px - bx
    bpy = py - by
    bpz = pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx = apx - v * abx
        qy = apy - v * aby
        qz = apz - v * abz
        return qx * qx + qy * qy + qz * qz
    cpx = px - cx
    cpy = py - cy
    cpz = pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx = apx - w * acx
        qy = apy - w * acy
        qz = apz - w * acz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bpx - w * (cx - bx)
        qy = bpy - w * (cy - by)
        qz = bpz - w * (cz - bz)
        return qx * qx + qy * qy + qz * qz
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = apx - abx * v - acx * w
    qy = apy - aby * v - acy * w
    qz = apz - abz * v - acz * w
    return qx * qx + qy * qy + qz * qz


@njit(cache=True)
def _box_dist2(px, py, pz, bmin, bmax, n):
    d = 0.0
    e = bmin[n, 0] - px
    if e > 0.0:
        d += e * e
    else:
        e = px - bmax[n, 0]
        if e > 0.0:
            d += e * e
    e = bmin[n, 1] - py
    if e > 0.0:
        d += e * e
    else:
        e = py - bmax[n, 1]
        if e > 0.0:
            d += e * e
    e = bmin[n, 2] - pz
    if e > 0.0:
        d += e * e
    else:
        e = pz - bmax[n, 2]
        if e > 0.0:
            d += e * e
    return d


@njit(cache=True)
def nearest_dist2(px, py, pz, bound2, tri, bmin, bmax, child, start, count, stack):
    """Minimum squared distance to the (BVH-ordered) triangles ``tri``.

    ``bound2`` is an upper bound on the answer used to prune from the start.
    """
    best = bound2
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if _box_dist2(px, py, pz, bmin, bmax, n) > best:
            continue
        c = count[n]
        if c > 0:
            s = start[n]
            for t in range(s, s + c):
                d = point_triangle_dist2(px, py, pz,
                                         tri[t, 0, 0], tri[t, 0, 1], tri[t, 0, 2],
                                         tri[t, 1, 0], tri[t, 1, 1], tri[t, 1, 2],
                                         tri[t, 2, 0], tri[t, 2, 1], tri[t, 2, 2])
                if d < best:
                    best = d
        else:
            l = child[n]
            dl = _box_dist2(px, py, pz, bmin, bmax, l)
            dr = _box_dist2(px, py, pz, bmin, bmax, l + 1)
            # push the farther child first so the nearer is visited next
            if dl <= dr:
                if dr <= best:
                    stack[sp] = l + 1
                    sp += 1
                if dl <= best:
                    stack[sp] = l
                    sp += 1
            else:
                if dl <= best:
                    stack[sp] = l
                    sp += 1
                if dr <= best:
                    stack[sp] = l + 1
                    sp += 1
    return best


@njit(cache=True, parallel=True)
def inside_distances(inside, origin, spacing, tri, bmin, bmax, child, start, count):
    """Exact surface distance at every node flagged in ``inside`` [z, y, x].

    z-slices are independent work units. Within a slice the previous inside
    node seeds the pruning bound (distance is 1-Lipschitz), which never changes
    the minimum found.
    """
    nz, ny, nx = inside.shape
    out = np.zeros((nz, ny, nx))
    depth = 2 * child.shape[0] + 2
    for k in prange(nz):
        stack = np.empty(depth, dtype=np.int64)
        pz = origin[2] + k * spacing[2]
        have_prev = False
        prev_d = 0.0
        prev_x = 0.0
        prev_y = 0.0
        for j in range(ny):
            py = origin[1] + j * spacing[1]
            for i in range(nx):
                if not inside[k, j, i]:
                    continue
                px = origin[0] + i * spacing[0]
                if have_prev:
                    hop = math.sqrt((px - prev_x) ** 2 + (py - prev_y) ** 2)
                    b = (prev_d + hop) * (1.0 + 1e-9) + 1e-12
                    bound2 = b * b
                else:
                    bound2 = np.inf
                d2 = nearest_dist2(px, py, pz, bound2, tri, bmin, bmax, child, start, count, stack)
                d = math.sqrt(d2)
                out[k, j, i] = d
                have_prev = True
                prev_d = d
                prev_x = px
                prev_y = py
    return out


# ---------------------------------------------------------------------------
# trilinear sampling
# ---------------------------------------------------------------------------

SNAP = 1e-9


@njit(cache=True)
def _cell_coord(q, o, s, n):
    """(index, fraction, inside) of coordinate q on n nodes starting at o."""
    u = (q - o) / s
    r = math.floor(u + 0.5)
    if abs(u - r) <= SNAP:
        u = r
    if u < 0.0 or u > n - 1:
        return 0, 0.0, False
    i = int(math.floor(u))
    if i >= n - 1:
        i = n - 2
    return i, u - i, True


@njit(cache=True)
def trilinear(values, origin, spacing, px, py, pz, want_grad):
    """Trilinear value and gradient at a local-frame point; zero outside."""
    nz, ny, nx = values.shape
    i, tx, okx = _cell_coord(px, origin[0], spacing[0], nx)
    j, ty, oky = _cell_coord(py, origin[1], spacing[1], ny)
    k, tz, okz = _cell_coord(pz, origin[2], spacing[2], nz)
    if not (okx and oky and okz):
        return 0.0, 0.0, 0.0, 0.0
    c000 = values[k, j, i]
    c100 = values[k, j, i + 1]
    c010 = values[k, j + 1, i]
    c110 = values[k, j + 1, i + 1]
    c001 = values[k + 1, j, i]
    c101 = values[k + 1, j, i + 1]
    c011 = values[k + 1, j + 1, i]
    c111 = values[k + 1, j + 1, i + 1]
    ux = 1.0 - tx
    uy = 1.0 - ty
    uz = 1.0 - tz
    val = (c000 * ux * uy * uz + c100 * tx * uy * uz
           + c010 * ux * ty * uz + c110 * tx * ty * uz
           + c001 * ux * uy * tz + c101 * tx * uy * tz
           + c011 * ux * ty * tz + c111 * tx * ty * tz)
    if not want_grad:
        return val, 0.0, 0.0, 0.0
    gx = ((c100 - c000) * uy * uz + (c110 - c010) * ty * uz
          + (c101 - c001) * uy * tz + (c111 - c011) * ty * tz) / spacing[0]
    gy = ((c010 - c000) * ux * uz + (c110 - c100) * tx * uz
          + (c011 - c001) * ux * tz + (c111 - c101) * tx * tz) / spacing[1]
    gz = ((c001 - c000) * ux * uy + (c101 - c100) * tx * uy
          + (c011 - c010) * ux * ty + (c111 - c110) * tx * ty) / spacing[2]
    return val, gx, gy, gz


@njit(cache=True, parallel=True)
def sample_points(values, origin, spacing, pts, want_grad):
    n = pts.shape[0]
    val = np.empty(n)
    grad = np.zeros((n, 3))
    for p in prange(n):
        v, gx, gy, gz = trilinear(values, origin, spacing, pts[p, 0], pts[p, 1], pts[p, 2], want_grad)
        val[p] = v
        grad[p, 0] = gx
        grad[p, 1] = gy
        grad[p, 2] = gz
    return val, grad

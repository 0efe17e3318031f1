"""numba z-buffer rasterizer for one body: pixel-center sampling, top-left
fill rule, perspective-correct depth, no culling."""

import numpy as np
from numba import njit, prange

TILE_ROWS = 16


@njit(cache=True)
def _owns_edge(dx, dy):
    # with positive orientation in y-down screen space this selects top and left edges
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


@njit(cache=True)
def bin_faces(sx, sy, faces, height, width):
    """CSR lists of faces per tile of TILE_ROWS rows (bounding-box overlap)."""
    n_tiles = (height + TILE_ROWS - 1) // TILE_ROWS
    n_faces = faces.shape[0]
    t0 = np.empty(n_faces, dtype=np.int64)
    t1 = np.empty(n_faces, dtype=np.int64)
    counts = np.zeros(n_tiles + 1, dtype=np.int64)
    for f in range(n_faces):
        a, b, c = faces[f, 0], faces[f, 1], faces[f, 2]
        ymin = min(sy[a], min(sy[b], sy[c]))
        ymax = max(sy[a], max(sy[b], sy[c]))
        xmin = min(sx[a], min(sx[b], sx[c]))
        xmax = max(sx[a], max(sx[b], sx[c]))
        # rows whose centers (r + 0.5) may fall in [ymin, ymax]
        r0 = int(np.ceil(ymin - 0.5))
        r1 = int(np.floor(ymax - 0.5))
        c0 = int(np.ceil(xmin - 0.5))
        c1 = int(np.floor(xmax - 0.5))
        if r1 < 0 or r0 > height - 1 or c1 < 0 or c0 > width - 1 or r0 > r1 or c0 > c1:
            t0[f] = 1
            t1[f] = 0
            continue
        r0 = max(r0, 0)
        r1 = min(r1, height - 1)
        t0[f] = r0 // TILE_ROWS
        t1[f] = r1 // TILE_ROWS
        for t in range(t0[f], t1[f] + 1):
            counts[t + 1] += 1
    for t in range(n_tiles):
        counts[t + 1] += counts[t]
    items = np.empty(counts[n_tiles], dtype=np.int64)
    fill = counts[:n_tiles].copy()
    for f in range(n_faces):
        for t in range(t0[f], t1[f] + 1):
            items[fill[t]] = f
            fill[t] += 1
    return counts, items


@njit(cache=True, parallel=True)
def rasterize_depth(sx, sy, invz, faces, height, width, tile_ptr, tile_faces, depth):
    """Per-pixel nearest camera-frame depth written into ``depth``; +inf where uncovered."""
    n_tiles = tile_ptr.shape[0] - 1
    for tile in prange(n_tiles):
        row_lo = tile * TILE_ROWS
        row_hi = min(height - 1, row_lo + TILE_ROWS - 1)
        for q in range(tile_ptr[tile], tile_ptr[tile + 1]):
            f = tile_faces[q]
            i0, i1, i2 = faces[f, 0], faces[f, 1], faces[f, 2]
            x0, y0, w0 = sx[i0], sy[i0], invz[i0]
            x1, y1, w1 = sx[i1], sy[i1], invz[i1]
            x2, y2, w2 = sx[i2], sy[i2], invz[i2]
            area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if area == 0.0:
                continue
            if area < 0.0:
                x1, y1, w1, x2, y2, w2 = x2, y2, w2, x1, y1, w1
                area = -area
            ymin = min(y0, min(y1, y2))
            ymax = max(y0, max(y1, y2))
            xmin = min(x0, min(x1, x2))
            xmax = max(x0, max(x1, x2))
            r0 = max(row_lo, int(np.ceil(ymin - 0.5)))
            r1 = min(row_hi, int(np.floor(ymax - 0.5)))
            c0 = max(0, int(np.ceil(xmin - 0.5)))
            c1 = min(width - 1, int(np.floor(xmax - 0.5)))
            own0 = _owns_edge(x2 - x1, y2 - y1)
            own1 = _owns_edge(x0 - x2, y0 - y2)
            own2 = _owns_edge(x1 - x0, y1 - y0)
            dw1 = w1 - w0
            dw2 = w2 - w0
            for r in range(r0, r1 + 1):
                py = r + 0.5
                for c in range(c0, c1 + 1):
                    px = c + 0.5
                    e0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                    if e0 < 0.0 or (e0 == 0.0 and not own0):
                        continue
                    e1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                    if e1 < 0.0 or (e1 == 0.0 and not own1):
                        continue
                    e2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                    if e2 < 0.0 or (e2 == 0.0 and not own2):
                        continue
                    # screen-space barycentrics; 1/z is affine in screen space
                    iz = w0 + (e1 / area) * dw1 + (e2 / area) * dw2
                    z = 1.0 / iz
                    if z < depth[r, c]:
                        depth[r, c] = z
    return depth


@njit(cache=True, parallel=True)
def composite(ids, stack, inst, zbuf):
    """Nearest body per pixel; the first (lowest-id) minimum wins ties."""
    n, height, width = stack.shape
    for r in prange(height):
        for c in range(width):
            best = np.inf
            who = 0
            for k in range(n):
                z = stack[k, r, c]
                if z < best:
                    best = z
                    who = ids[k]
            zbuf[r, c] = best
            inst[r, c] = who

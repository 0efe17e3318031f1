"""Slow, independent reference computations used to check the kernels."""

import numpy as np


def _segment_dist2(p, a, b):
    # p: (P, 1, 3); a, b: (1, F, 3)
    ab = b - a
    t = np.einsum("pfk,pfk->pf", p - a, np.broadcast_to(ab, (p.shape[0],) + ab.shape[1:]))
    t = np.clip(t / np.einsum("fk,fk->f", ab[0], ab[0])[None, :], 0.0, 1.0)
    q = a + t[..., None] * ab
    return np.sum((p - q) ** 2, axis=-1)


def brute_force_distance(points, tri, chunk=2048):
    """Unsigned distance from each point to the closest of all triangles.

    Projects onto each triangle's plane; if the foot lies inside (barycentric
    test) the plane distance is used, otherwise the nearest of the three edges.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tri = np.asarray(tri, dtype=np.float64)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        h = np.einsum("pfk,fk->pf", p - a[None], n)
        foot = p - h[..., None] * n[None]
        # barycentric via sub-triangle orientation against the normal
        def side(u, v):
            return np.einsum("pfk,fk->pf", np.cross(v[None] - u[None], foot - u[None]), n)
        inside = (side(a, b) >= 0) & (side(b, c) >= 0) & (side(c, a) >= 0)
        d2_plane = np.where(inside, h ** 2, np.inf)
        d2_edges = np.minimum(np.minimum(_segment_dist2(p, a[None], b[None]),
                                         _segment_dist2(p, b[None], c[None])),
                              _segment_dist2(p, c[None], a[None]))
        out[s:s + chunk] = np.sqrt(np.min(np.minimum(d2_plane, d2_edges), axis=1))
    return out


def winding_number(points, tri, chunk=2048):
    """Generalized winding number (sum of signed solid angles / 4 pi)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        a = tri[None, :, 0] - p
        b = tri[None, :, 1] - p
        c = tri[None, :, 2] - p
        la, lb, lc = (np.linalg.norm(x, axis=-1) for x in (a, b, c))
        det = np.einsum("pfk,pfk->pf", a, np.cross(b, c))
        dot = lambda x, y: np.einsum("pfk,pfk->pf", x, y)  # noqa: E731
        den = la * lb * lc + dot(a, b) * lc + dot(a, c) * lb + dot(b, c) * la
        out[s:s + chunk] = np.sum(2.0 * np.arctan2(det, den), axis=1) / (4.0 * np.pi)
    return out


def phi_oracle(points, tri):
    """(phi, inside) by brute force: distance if winding number > 1/2, else 0."""
    d = brute_force_distance(points, tri)
    inside = winding_number(points, tri) > 0.5
    return np.where(inside, d, 0.0), inside, d


def grid_nodes(field):
    n = field.resolution
    idx = np.arange(n, dtype=np.float64)
    z, y, x = np.meshgrid(idx, idx, idx, indexing="ij")
    local = field.local_origin + np.stack([x, y, z], axis=-1) * field.spacing
    return local.reshape(-1, 3)


def central_difference(fn, x, h):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e.flat[k] = h
        g.flat[k] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g

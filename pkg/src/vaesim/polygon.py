"""Planar polygons: plane, containment and boundary queries."""

from __future__ import annotations

import numpy as np

PLANARITY_TOL = 1e-6
EDGE_TOL = 1e-9


def planarity_residual(vertices: np.ndarray) -> float:
    """Largest distance of a vertex from the least-squares plane."""
    v = np.asarray(vertices, dtype=float)
    centered = v - v.mean(axis=0)
    _, _, vt = np.linalg.svd(centered)
    return float(np.max(np.abs(centered @ vt[2])))


def newell_normal(vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    n = np.array([
        np.sum((v[:, 1] - w[:, 1]) * (v[:, 2] + w[:, 2])),
        np.sum((v[:, 2] - w[:, 2]) * (v[:, 0] + w[:, 0])),
        np.sum((v[:, 0] - w[:, 0]) * (v[:, 1] + w[:, 1])),
    ])
    length = np.linalg.norm(n)
    if length == 0.0:
        raise ValueError("degenerate polygon (zero area)")
    return n / length


class Polygon:
    """Planar polygon; vertices run counter-clockwise about the normal."""

    def __init__(self, vertices, tol: float = PLANARITY_TOL):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
            raise ValueError("polygon needs at least three 3-D vertices")
        residual = planarity_residual(v)
        if residual > tol:
            raise ValueError(f"polygon vertices are not coplanar (residual {residual:.3g} m)")
        self.vertices = v
        self.normal = newell_normal(v)
        self.origin = v.mean(axis=0)
        # in-plane basis
        u = v[1] - v[0]
        self.u = u / np.linalg.norm(u)
        self.w = np.cross(self.normal, self.u)
        self.vertices_2d = self._project(v)

    def _project(self, p: np.ndarray) -> np.ndarray:
        d = np.asarray(p, dtype=float) - self.origin
        return np.stack([d @ self.u, d @ self.w], axis=-1)

    @property
    def area(self) -> float:
        x, y = self.vertices_2d.T
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def signed_distance(self, p: np.ndarray) -> float:
        """Distance to the plane, positive on the normal side."""
        return float((np.asarray(p, dtype=float) - self.origin) @ self.normal)

    def plane_point(self, p: np.ndarray) -> np.ndarray:
        """Closest point on the infinite plane."""
        p = np.asarray(p, dtype=float)
        return p - self.signed_distance(p) * self.normal

    def contains(self, p: np.ndarray, tol: float = EDGE_TOL) -> bool:
        """Winding-number test of the in-plane projection of ``p``.

        Points within ``tol`` of the boundary count as inside.
        """
        q = self._project(p)
        if self._boundary_distance_2d(q) <= tol:
            return True
        a = self.vertices_2d
        b = np.roll(a, -1, axis=0)
        winding = 0
        for (ax, ay), (bx, by) in zip(a, b):
            cross = (bx - ax) * (q[1] - ay) - (q[0] - ax) * (by - ay)
            if ay <= q[1] < by and cross > 0:
                winding += 1
            elif by <= q[1] < ay and cross < 0:
                winding -= 1
        return winding != 0

    def _boundary_distance_2d(self, q: np.ndarray) -> float:
        a = self.vertices_2d
        b = np.roll(a, -1, axis=0)
        ab = b - a
        t = np.clip(np.einsum("ij,ij->i", q - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        closest = a + t[:, None] * ab
        return float(np.min(np.linalg.norm(closest - q, axis=1)))

    def closest_boundary_point(self, p: np.ndarray) -> np.ndarray:
        """Closest point to ``p`` on the polygon outline."""
        p = np.asarray(p, dtype=float)
        a = self.vertices
        ab = np.roll(a, -1, axis=0) - a
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        closest = a + t[:, None] * ab
        return closest[np.argmin(np.linalg.norm(closest - p, axis=1))]

    def segment_intersection(self, p0: np.ndarray, p1: np.ndarray) -> np.ndarray | None:
        """Point where segment p0-p1 crosses the plane, or None."""
        d0 = self.signed_distance(p0)
        d1 = self.signed_distance(p1)
        if d0 == d1 or (d0 > 0 and d1 > 0) or (d0 < 0 and d1 < 0):
            return None
        t = d0 / (d0 - d1)
        return np.asarray(p0, dtype=float) + t * (np.asarray(p1, dtype=float) - p0)

    def blocks(self, p0: np.ndarray, p1: np.ndarray) -> bool:
        """True if the segment p0-p1 passes through the polygon."""
        hit = self.segment_intersection(p0, p1)
        return hit is not None and self.contains(hit)

    def shortest_detour(self, p0: np.ndarray, p1: np.ndarray, iterations: int = 45) -> np.ndarray:
        """Boundary point minimising |q - p0| + |p1 - q|.

        Path length is convex along each edge, so a golden-section search
        per edge (vectorised over edges) finds the minimum.
        """
        a = self.vertices
        ab = np.roll(a, -1, axis=0) - a
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)

        def length(t):
            q = a + t[:, None] * ab
            return np.sqrt(((q - p0) ** 2).sum(axis=1)) + np.sqrt(((p1 - q) ** 2).sum(axis=1))

        g = (np.sqrt(5.0) - 1.0) / 2.0
        lo = np.zeros(len(a))
        hi = np.ones(len(a))
        m1, m2 = hi - g, lo + g
        f1, f2 = length(m1), length(m2)
        for _ in range(iterations):
            left = f1 < f2
            hi = np.where(left, m2, hi)
            lo = np.where(left, lo, m1)
            new = np.where(left, hi - g * (hi - lo), lo + g * (hi - lo))
            fn = length(new)
            m2, f2, m1, f1 = (np.where(left, m1, new), np.where(left, f1, fn),
                              np.where(left, new, m2), np.where(left, fn, f2))
        t = 0.5 * (lo + hi)
        k = int(np.argmin(length(t)))
        return a[k] + t[k] * ab[k]

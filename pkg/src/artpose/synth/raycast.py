"""Analytic primitives and vectorised nearest-hit ray casting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PAR_EPS = 1e-15


@dataclass(frozen=True)
class Box:
    """Solid box; ``rotation`` columns are the local axes in world coordinates."""

    rotation: np.ndarray
    center: np.ndarray
    size: np.ndarray

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        o = (origin - self.center) @ self.rotation
        d = dirs @ self.rotation
        half = 0.5 * self.size
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (-half - o) * inv
            t2 = (half - o) * inv
        # Rays parallel to a slab: inside the slab means unconstrained.
        parallel = np.abs(d) < _PAR_EPS
        inside = np.abs(o) <= half
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        t_in = lo.max(axis=1)
        t_out = hi.min(axis=1)
        hit = (t_in <= t_out) & (t_in > 0)
        return np.where(hit, t_in, np.inf)

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        """Unsigned distance from points to the box surface."""
        q = np.abs((pts - self.center) @ self.rotation) - 0.5 * self.size
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return np.abs(outside + inside)


@dataclass(frozen=True)
class Cylinder:
    """Solid cylinder about its local z axis; ``size`` is (2r, 2r, height)."""

    rotation: np.ndarray
    center: np.ndarray
    size: np.ndarray

    @property
    def radius(self) -> float:
        return 0.5 * float(self.size[0])

    @property
    def half_height(self) -> float:
        return 0.5 * float(self.size[2])

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        o = (origin - self.center) @ self.rotation
        d = dirs @ self.rotation
        r, h = self.radius, self.half_height
        best = np.full(d.shape[0], np.inf)

        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = 2.0 * (o[0] * d[:, 0] + o[1] * d[:, 1])
        c = o[0] ** 2 + o[1] ** 2 - r * r
        disc = b * b - 4.0 * a * c
        ok = (a > _PAR_EPS) & (disc >= 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for sign in (-1.0, 1.0):
                t = (-b + sign * sq) / (2.0 * a)
                z = o[2] + t * d[:, 2]
                valid = ok & (t > 0) & (np.abs(z) <= h)
                best = np.where(valid & (t < best), t, best)
            for zc in (-h, h):
                t = (zc - o[2]) / d[:, 2]
                x = o[0] + t * d[:, 0]
                y = o[1] + t * d[:, 1]
                valid = (np.abs(d[:, 2]) > _PAR_EPS) & (t > 0) & (x * x + y * y <= r * r)
                best = np.where(valid & (t < best), t, best)
        return best

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        q = (pts - self.center) @ self.rotation
        dr = np.hypot(q[:, 0], q[:, 1]) - self.radius
        dz = np.abs(q[:, 2]) - self.half_height
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return np.abs(outside + inside)


@dataclass(frozen=True)
class Desk:
    """Finite horizontal rectangle at world z = 0."""

    half_extent: float

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -origin[2] / dirs[:, 2]
        x = origin[0] + t * dirs[:, 0]
        y = origin[1] + t * dirs[:, 1]
        valid = (np.abs(dirs[:, 2]) > _PAR_EPS) & (t > 0)
        valid &= (np.abs(x) <= self.half_extent) & (np.abs(y) <= self.half_extent)
        return np.where(valid, t, np.inf)

    def surface_distance(self, pts: np.ndarray) -> np.ndarray:
        return np.abs(pts[:, 2])


def cast(origin: np.ndarray, dirs: np.ndarray, primitives) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit per ray: (distance, primitive index), ``inf`` / -1 on a miss."""
    best_t = np.full(dirs.shape[0], np.inf)
    best_k = np.full(dirs.shape[0], -1, dtype=np.int64)
    for k, prim in enumerate(primitives):
        t = prim.intersect(origin, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_k = np.where(closer, k, best_k)
    return best_t, best_k

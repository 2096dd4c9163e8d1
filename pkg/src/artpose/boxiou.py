"""Exact intersection volume of oriented boxes by half-space clipping."""

from __future__ import annotations

import numpy as np

# Corner sign patterns and faces (counter-clockwise seen from outside).
_SIGNS = np.array(
    [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]],
    dtype=np.float64,
)
_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (2, 3, 7, 6), (1, 2, 6, 5), (0, 4, 7, 3))


def box_corners(rotation, center, size) -> np.ndarray:
    """The 8 corners of an oriented box, shape (8, 3)."""
    R = np.asarray(rotation, dtype=np.float64)
    half = 0.5 * np.asarray(size, dtype=np.float64)
    return (_SIGNS * half) @ R.T + np.asarray(center, dtype=np.float64)


def box_faces(rotation, center, size) -> list[np.ndarray]:
    corners = box_corners(rotation, center, size)
    return [corners[list(f)] for f in _FACES]


def box_halfspaces(rotation, center, size) -> list[tuple[np.ndarray, float]]:
    """Six (normal, offset) pairs with the box as ``normal . x <= offset``."""
    R = np.asarray(rotation, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    half = 0.5 * np.asarray(size, dtype=np.float64)
    planes = []
    for k in range(3):
        axis = R[:, k]
        planes.append((axis, float(axis @ c + half[k])))
        planes.append((-axis, float(-axis @ c + half[k])))
    return planes


def _clip_polygon(poly: np.ndarray, normal: np.ndarray, offset: float, tol: float):
    """Sutherland-Hodgman against one plane; returns (polygon, points on the plane)."""
    dist = poly @ normal - offset
    out = []
    on_plane = []
    m = len(poly)
    for i in range(m):
        cur, nxt = poly[i], poly[(i + 1) % m]
        dc, dn = dist[i], dist[(i + 1) % m]
        if dc <= tol:
            out.append(cur)
            if dc >= -tol:
                on_plane.append(cur)
        if (dc < -tol and dn > tol) or (dc > tol and dn < -tol):
            p = cur + (dc / (dc - dn)) * (nxt - cur)
            out.append(p)
            on_plane.append(p)
    return out, on_plane


def _order_cap(points: list[np.ndarray], normal: np.ndarray, tol: float):
    pts = np.array(points)
    centroid = pts.mean(axis=0)
    u = pts[np.argmax(np.linalg.norm(pts - centroid, axis=1))] - centroid
    if np.linalg.norm(u) <= tol:
        return None
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    rel = pts - centroid
    ang = np.arctan2(rel @ v, rel @ u)
    ordered = pts[np.argsort(ang)]
    keep = [ordered[0]]
    for p in ordered[1:]:
        if np.linalg.norm(p - keep[-1]) > tol:
            keep.append(p)
    if len(keep) > 1 and np.linalg.norm(keep[0] - keep[-1]) <= tol:
        keep.pop()
    return np.array(keep) if len(keep) >= 3 else None


def clip_polytope(faces: list[np.ndarray], normal, offset: float, tol: float) -> list[np.ndarray]:
    """Intersect a closed convex polytope (outward-oriented faces) with ``normal . x <= offset``."""
    normal = np.asarray(normal, dtype=np.float64)
    new_faces = []
    cap = []
    coplanar = False
    for face in faces:
        poly, on_plane = _clip_polygon(face, normal, offset, tol)
        cap.extend(on_plane)
        if len(poly) >= 3:
            new_faces.append(np.array(poly))
            if len(on_plane) == len(poly):
                coplanar = True
    if not new_faces:
        return []
    # A face already lying in the plane closes the polytope there.
    if len(cap) >= 3 and not coplanar:
        cap_face = _order_cap(cap, normal, tol)
        if cap_face is not None:
            new_faces.append(cap_face)
    return new_faces


def polytope_volume(faces: list[np.ndarray]) -> float:
    """Volume enclosed by outward-oriented polygon faces (divergence theorem)."""
    if not faces:
        return 0.0
    ref = np.mean([f.mean(axis=0) for f in faces], axis=0)
    vol = 0.0
    for f in faces:
        a = f[0] - ref
        for i in range(1, len(f) - 1):
            vol += np.dot(a, np.cross(f[i] - ref, f[i + 1] - ref))
    return max(vol / 6.0, 0.0)


def intersection_volume(box_a, box_b) -> float:
    """Volume shared by two boxes given as (rotation, center, size) triples."""
    scale = max(np.max(box_a[2]), np.max(box_b[2]))
    tol = 1e-12 * scale
    faces = box_faces(*box_a)
    for normal, offset in box_halfspaces(*box_b):
        faces = clip_polytope(faces, normal, offset, tol)
        if not faces:
            return 0.0
    return polytope_volume(faces)


def oriented_box_iou(box_a, box_b) -> float:
    vol_a = float(np.prod(box_a[2]))
    vol_b = float(np.prod(box_b[2]))
    inter = intersection_volume(box_a, box_b)
    union = vol_a + vol_b - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))

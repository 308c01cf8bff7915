"""Spherical geometry kernel.

Positions live on the unit sphere and are represented as plain numpy
arrays: a single point is shape (3,), a set of points is shape (n, 3).
All functions accept either form where it makes sense. Plane points
produced by the Lambert projection are (2,) / (n, 2) arrays with
coordinates in [-1, 1].
"""

from __future__ import annotations

import numpy as np

UNIT_EPS = 1e-9
ANGLE_EPS = 1e-12
# arccos cannot resolve angles closer than ~sqrt(2*eps) to 0 or pi, so
# degeneracy checks that must actually fire use this working floor
DEGENERATE_EPS = 1e-7


class IllConditionedError(ValueError):
    """Raised when an operation is requested too close to a singular configuration."""


def normalize(v: np.ndarray) -> np.ndarray:
    """Return v scaled to unit length (rows of a 2D array are normalized independently)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return v / n
    n = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize zero rows")
    return v / n


def spherical_distance(a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
    """Great-circle angle between unit vectors, in [0, pi]. Dot is clamped before arccos."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = np.sum(a * b, axis=-1)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    return float(theta) if theta.ndim == 0 else theta


def slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Interpolate (or extrapolate) along the great circle from a to b.

    t=0 gives a, t=1 gives b; values outside [0, 1] continue along the
    same great circle. The pair must not be antipodal unless t is an
    endpoint, since the circle is then undefined.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    theta = spherical_distance(a, b)
    if theta < DEGENERATE_EPS:
        return a.copy()
    if theta > np.pi - DEGENERATE_EPS:
        if t == 0.0:
            return a.copy()
        if t == 1.0:
            return b.copy()
        raise IllConditionedError(
            f"slerp between near-antipodal points (theta={theta!r}) is undefined"
        )
    s = np.sin(theta)
    out = (np.sin((1.0 - t) * theta) * a + np.sin(t * theta) * b) / s
    return normalize(out)


def random_unit(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform point(s) on the sphere: normalized iid standard normal triples."""
    if n is None:
        while True:
            v = rng.standard_normal(3)
            norm = np.linalg.norm(v)
            if norm > UNIT_EPS:
                return v / norm
    v = rng.standard_normal((n, 3))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms <= UNIT_EPS):
        bad = norms <= UNIT_EPS
        v[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def pole_rotation_matrix(focal: np.ndarray) -> np.ndarray:
    """3x3 rotation taking `focal` to the projection center (0, 0, 1).

    Rodrigues' rotation about the axis focal x pole. Near the pole the
    identity is returned; near the antipode a 180-degree rotation about
    (1, 0, 0) is used since the axis is then undefined.
    """
    f = normalize(np.asarray(focal, dtype=np.float64))
    c = f[2]  # focal . pole
    if c >= 1.0 - UNIT_EPS:
        return np.eye(3)
    if c <= -1.0 + UNIT_EPS:
        return np.diag([1.0, -1.0, -1.0])
    e = np.array([f[1], -f[0], 0.0])  # f x (0,0,1)
    e /= np.linalg.norm(e)
    s = np.sqrt(1.0 - c * c)
    k = np.array([
        [0.0, -e[2], e[1]],
        [e[2], 0.0, -e[0]],
        [-e[1], e[0], 0.0],
    ])
    return np.eye(3) * c + s * k + (1.0 - c) * np.outer(e, e)


def rotate_to_pole(points: np.ndarray, focal: np.ndarray) -> np.ndarray:
    """Rotate all points by the isometry that moves `focal` to (0, 0, 1)."""
    r = pole_rotation_matrix(focal)
    pts = np.asarray(points, dtype=np.float64)
    return pts @ r.T


def lambert_project(points: np.ndarray, return_clamped: bool = False):
    """Lambert azimuthal equal-area projection centered at (0, 0, 1).

    Maps the whole sphere into the unit disk: planar radius equals
    sin(theta/2) for a point at angle theta from the center, so the
    antipode lands on the radius-1 ring. Points numerically at the
    antipode are clamped onto that ring and flagged.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    x3 = np.clip(pts[:, 2], -1.0, 1.0)
    denom = 1.0 + x3
    clamped = denom < ANGLE_EPS
    z = 0.5 * np.sqrt(2.0 / np.where(clamped, 1.0, denom))
    uv = z[:, None] * pts[:, :2]
    if np.any(clamped):
        horiz = np.linalg.norm(pts[clamped, :2], axis=1)
        safe = horiz > ANGLE_EPS
        ring = np.where(
            safe[:, None],
            pts[clamped, :2] / np.where(safe, horiz, 1.0)[:, None],
            np.tile(np.array([1.0, 0.0]), (int(clamped.sum()), 1)),
        )
        uv[clamped] = ring
    if single:
        uv = uv[0]
        clamped = bool(clamped[0])
    if return_clamped:
        return uv, clamped
    return uv


def align_rotation(prev: np.ndarray, curr: np.ndarray, ids: np.ndarray | None = None):
    """Angle phi minimizing sum ||R(phi) curr_i - prev_i||^2 (rotation about the plane origin).

    Returns (phi, degenerate). Points at zero radius in either frame carry
    no angular information and are dropped; with none left the rotation is
    undefined and (0.0, True) is returned.
    """
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if ids is not None:
        ids = np.asarray(ids)
        prev = prev[ids]
        curr = curr[ids]
    rp = np.linalg.norm(prev, axis=1)
    rc = np.linalg.norm(curr, axis=1)
    keep = (rp > ANGLE_EPS) & (rc > ANGLE_EPS)
    if not np.any(keep):
        return 0.0, True
    p, c = prev[keep], curr[keep]
    sin_term = float(np.sum(p[:, 1] * c[:, 0] - p[:, 0] * c[:, 1]))
    cos_term = float(np.sum(p[:, 0] * c[:, 0] + p[:, 1] * c[:, 1]))
    if sin_term == 0.0 and cos_term == 0.0:
        return 0.0, True
    return float(np.arctan2(sin_term, cos_term)), False


def rotate_plane(points: np.ndarray, phi: float) -> np.ndarray:
    """Rotate plane points counterclockwise by phi about the origin."""
    c, s = np.cos(phi), np.sin(phi)
    pts = np.asarray(points, dtype=np.float64)
    return pts @ np.array([[c, s], [-s, c]])


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the tangent plane at unit vector p."""
    p = np.asarray(p, dtype=np.float64)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(p)))] = 1.0
    t1 = np.cross(p, axis)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(p, t1)
    return t1, t2


def perturb_tangent(p: np.ndarray, angle: float, salt: int) -> np.ndarray:
    """Move p by `angle` radians in a deterministic pseudo-random tangent direction.

    Used to break exact coincidences / antipodal degeneracies; the
    direction depends only on `salt`, so the perturbation is reproducible.
    """
    t1, t2 = tangent_basis(p)
    h = (int(salt) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    phi = 2.0 * np.pi * (h / 2**64)
    d = np.cos(phi) * t1 + np.sin(phi) * t2
    return normalize(np.cos(angle) * p + np.sin(angle) * d)

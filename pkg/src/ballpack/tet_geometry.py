"""Geometry of a single conformal tetrahedron given its four radii.

Four mutually tangent balls with radii ``r`` span a Euclidean tetrahedron
with edge lengths ``r_p + r_q`` exactly when ``Q(r) > 0``.  Otherwise the
tetrahedron is *virtual*: the smallest ball slips through the gap of the
other three, and its extended solid angle is ``2*pi`` while the others are
0.  ``Q == 0`` counts as virtual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .triangulation import EDGE_PAIRS

TWO_PI = 2.0 * math.pi
#: solid angle at a vertex of the regular tetrahedron
ALPHA_BAR = 3.0 * math.acos(1.0 / 3.0) - math.pi

DEGENERACY_FLOOR = 1e-12
TIE_RTOL = 1e-12


class GeometryError(ValueError):
    pass


class VirtualTetrahedronError(GeometryError):
    """A real-only quantity was requested for a virtual tetrahedron."""


class DegenerateTetrahedronError(GeometryError):
    """Volume below the degeneracy floor; derivatives are not trustworthy."""


@dataclass(frozen=True)
class TetStatus:
    apex: int | None = None

    @property
    def is_real(self) -> bool:
        return self.apex is None

    def __str__(self) -> str:
        return "real" if self.apex is None else f"virtual(apex={self.apex})"


REAL = TetStatus()


@dataclass(frozen=True)
class TetGeometry:
    q: float
    lengths: np.ndarray
    status: TetStatus
    solid_angles: np.ndarray
    dihedral_angles: np.ndarray | None
    volume: float | None


def _radii(r) -> np.ndarray:
    arr = np.asarray(r, dtype=np.float64).reshape(-1)
    if arr.shape != (4,):
        raise GeometryError(f"expected 4 radii, got shape {np.shape(r)}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise GeometryError(f"radii must be positive and finite: {arr}")
    return arr


def edge_lengths(r) -> np.ndarray:
    """Lengths ``r_p + r_q`` in local edge order (01, 02, 03, 12, 13, 23)."""
    r = _radii(r)
    return np.array([r[a] + r[b] for a, b in EDGE_PAIRS])


def q_value(r) -> float:
    r = _radii(r)
    return float(kernels.q_values(r[None, :])[0])


def q_gradient(r) -> np.ndarray:
    r = _radii(r)
    inv = 1.0 / r
    s = inv.sum()
    # dQ/dr_i = -(2/r_i^2) (sum_{p != i} 1/r_p - 1/r_i)
    return -2.0 * inv * inv * (s - 2.0 * inv)


def critical_radius(rj: float, rk: float, rl: float) -> float:
    """Radius of the ball tangent to three mutually tangent balls from inside their gap."""
    if min(rj, rk, rl) <= 0:
        raise GeometryError("radii must be positive")
    a, b, c = 1.0 / rj, 1.0 / rk, 1.0 / rl
    return 1.0 / (a + b + c + 2.0 * math.sqrt(a * b + a * c + b * c))


def classify(r) -> TetStatus:
    r = _radii(r)
    if q_value(r) > 0:
        return REAL
    order = np.argsort(r, kind="stable")
    lo, nxt = r[order[0]], r[order[1]]
    if nxt - lo <= TIE_RTOL * nxt:
        raise GeometryError(f"Q <= 0 with no strictly minimal radius: {r}")
    return TetStatus(int(order[0]))


def tet_geometry(r) -> TetGeometry:
    r = _radii(r)
    q, apex, angles, dihedral, volume = kernels.tet_batch(r[None, :])
    real = apex[0] < 0
    status = REAL if real else TetStatus(int(apex[0]))
    return TetGeometry(
        q=float(q[0]),
        lengths=edge_lengths(r),
        status=status,
        solid_angles=angles[0].copy(),
        dihedral_angles=dihedral[0].copy() if real else None,
        volume=float(volume[0]) if real else None,
    )


def _require_real(r) -> TetGeometry:
    geo = tet_geometry(r)
    if not geo.status.is_real:
        raise VirtualTetrahedronError(f"tetrahedron with radii {np.asarray(r)} is {geo.status} (Q={geo.q:.6g})")
    return geo


def solid_angles(r) -> np.ndarray:
    return _require_real(r).solid_angles


def dihedral_angles(r) -> np.ndarray:
    return _require_real(r).dihedral_angles


def extended_solid_angles(r) -> np.ndarray:
    return tet_geometry(r).solid_angles


def volume(r, extended: bool = False) -> float:
    """Volume of the conformal tetrahedron.

    With ``extended=True`` a virtual tetrahedron has volume 0 instead of
    raising.
    """
    geo = tet_geometry(r)
    if geo.status.is_real:
        return geo.volume
    if extended:
        return 0.0
    raise VirtualTetrahedronError(f"no Euclidean volume: tetrahedron is {geo.status}")


def is_degenerate(r4, vol) -> np.ndarray:
    """Volume below ``DEGENERACY_FLOOR * (mean edge length)^3``; works on batches."""
    r4 = np.asarray(r4, dtype=np.float64).reshape(-1, 4)
    mean_len = r4.sum(axis=1) / 2.0  # sum of the 6 lengths is 3 * sum(r)
    return np.asarray(vol) < DEGENERACY_FLOOR * mean_len ** 3


def solid_angle_jacobian(r) -> np.ndarray:
    """``J[i, j] = d(alpha_i)/d(r_j)`` for a real, non-degenerate tetrahedron."""
    geo = _require_real(r)
    r = _radii(r)
    if is_degenerate(r, geo.volume)[0]:
        raise DegenerateTetrahedronError(f"volume {geo.volume:.3g} below degeneracy floor")
    return kernels.angle_jacobian(r[None, :], np.array([geo.volume]))[0]


# ---------------------------------------------------------------------------
# embedding; independent of the radius formulas above and used as an oracle
# ---------------------------------------------------------------------------

def embed_tetrahedron(lengths) -> np.ndarray:
    """Place a tetrahedron with the given six edge lengths in 3-space.

    ``lengths`` follows the local edge order (01, 02, 03, 12, 13, 23).
    Returns a ``(4, 3)`` array of vertex positions.
    """
    l = np.asarray(lengths, dtype=np.float64)
    if l.shape != (6,) or np.any(l <= 0):
        raise GeometryError("need six positive lengths")
    d = np.zeros((4, 4))
    for (a, b), val in zip(EDGE_PAIRS, l):
        d[a, b] = d[b, a] = val
    for tri in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        a, b, c = (d[tri[0], tri[1]], d[tri[0], tri[2]], d[tri[1], tri[2]])
        s = sorted((a, b, c))
        if s[0] + s[1] <= s[2]:
            raise GeometryError(f"face {tri} violates the triangle inequality")
    cm = np.ones((5, 5))
    cm[0, 0] = 0.0
    cm[1:, 1:] = d * d
    vol2 = np.linalg.det(cm) / 288.0
    if vol2 <= 0:
        raise GeometryError("Cayley-Menger determinant is not positive; lengths do not embed")

    p = np.zeros((4, 3))
    p[1, 0] = d[0, 1]
    x2 = (d[0, 2] ** 2 - d[1, 2] ** 2 + d[0, 1] ** 2) / (2 * d[0, 1])
    p[2, :2] = x2, math.sqrt(max(d[0, 2] ** 2 - x2 * x2, 0.0))
    x3 = (d[0, 3] ** 2 - d[1, 3] ** 2 + d[0, 1] ** 2) / (2 * d[0, 1])
    y3 = (d[0, 3] ** 2 - d[2, 3] ** 2 + p[2, 0] ** 2 + p[2, 1] ** 2 - 2 * p[2, 0] * x3) / (2 * p[2, 1])
    p[3] = x3, y3, math.sqrt(max(d[0, 3] ** 2 - x3 * x3 - y3 * y3, 0.0))
    return p


def vertex_solid_angles(points) -> np.ndarray:
    """Solid angles at the vertices of a point tetrahedron (Van Oosterom-Strackee)."""
    p = np.asarray(points, dtype=np.float64)
    out = np.empty(4)
    for i in range(4):
        a, b, c = (p[j] - p[i] for j in range(4) if j != i)
        la, lb, lc = (np.linalg.norm(v) for v in (a, b, c))
        num = abs(np.dot(a, np.cross(b, c)))
        den = la * lb * lc + np.dot(a, b) * lc + np.dot(a, c) * lb + np.dot(b, c) * la
        out[i] = 2.0 * math.atan2(num, den)
    return out


def point_volume(points) -> float:
    p = np.asarray(points, dtype=np.float64)
    return abs(np.linalg.det(p[1:] - p[0])) / 6.0

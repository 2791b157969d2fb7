"""Vectorized numpy kernels over batches of tetrahedra.

Every function takes ``r4`` of shape ``(T, 4)``: the radii at the four
local vertices of each tetrahedron.  Edge lengths are ``r_p + r_q``.
"""

import numpy as np

EDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TWO_PI = 2.0 * np.pi
# |Q| below this fraction of (sum 1/r)^2 is rounding noise and snaps to 0
Q_SNAP = 1e-14


def _others(*used):
    return [p for p in range(4) if p not in used]


def q_values(r4):
    inv = 1.0 / r4
    s2 = inv.sum(axis=1) ** 2
    q = s2 - 2.0 * (inv * inv).sum(axis=1)
    return np.where(np.abs(q) <= Q_SNAP * s2, 0.0, q)


def _face_angle(ri, rj, rk):
    # angle at i of the triangle with sides ri+rj, ri+rk, rj+rk; the half-angle
    # form stays accurate when the angle is tiny
    return 2.0 * np.arctan(np.sqrt(rj * rk / (ri * (ri + rj + rk))))


def _vertex_link(r4, i):
    """Spherical triangle cut out at vertex ``i``.

    Returns the other three local vertices ``(j, k, l)`` and the link's
    sides ``(a, b, c)`` opposite the directions to ``j``, ``k``, ``l``.
    """
    j, k, l = _others(i)
    ri = r4[:, i]
    a = _face_angle(ri, r4[:, k], r4[:, l])
    b = _face_angle(ri, r4[:, j], r4[:, l])
    c = _face_angle(ri, r4[:, j], r4[:, k])
    return (j, k, l), (a, b, c)


def link_angles(r4):
    """Solid angles (T, 4) and dihedral angles (T, 6) of real tetrahedra.

    Solid angles are spherical excesses of the vertex links (L'Huilier);
    the dihedral angle at edge ``ij`` is the link angle at ``i`` towards
    ``j`` (half-angle formula), with ``i`` the lower local index.
    """
    T = r4.shape[0]
    alpha = np.empty((T, 4))
    dihedral = np.empty((T, 6))
    edge_of = {pair: e for e, pair in enumerate(EDGE_PAIRS)}
    for i in range(4):
        verts, sides = _vertex_link(r4, i)
        a, b, c = sides
        s = 0.5 * (a + b + c)
        t = np.tan(0.5 * s) * np.tan(0.5 * (s - a)) * np.tan(0.5 * (s - b)) * np.tan(0.5 * (s - c))
        alpha[:, i] = 4.0 * np.arctan(np.sqrt(np.maximum(t, 0.0)))
        sin_s = np.sin(s)
        for q, opp in zip(verts, range(3)):
            if q < i:
                continue
            x = sides[opp]
            y, z = (sides[m] for m in range(3) if m != opp)
            num = np.maximum(np.sin(s - y) * np.sin(s - z), 0.0)
            den = np.maximum(sin_s * np.sin(s - x), 0.0)
            dihedral[:, edge_of[(i, q)]] = 2.0 * np.arctan2(np.sqrt(num), np.sqrt(den))
    return alpha, dihedral


def dihedral_angles(r4):
    """Dihedral angles at the six local edges.  Meaningful only where ``q > 0``."""
    return link_angles(r4)[1]


def volumes(r4):
    """Volume ``r1 r2 r3 r4 sqrt(Q) / 3``; 0 where the tetrahedron does not embed.

    Algebraically this is the Cayley-Menger volume of the lengths ``r_p + r_q``,
    but it avoids the cancellation of the determinant at extreme radius ratios.
    """
    q = q_values(r4)
    return np.prod(r4, axis=1) * np.sqrt(np.maximum(q, 0.0)) / 3.0


def tet_batch(r4):
    """Classification and extended angles for every tetrahedron.

    Returns
    -------
    q : (T,) ndarray
    apex : (T,) int ndarray
        -1 for real tetrahedra, else the local index of the minimal radius.
    angles : (T, 4) ndarray
        Extended solid angles.
    dihedral : (T, 6) ndarray
        NaN on virtual tetrahedra.
    volume : (T,) ndarray
        0 on virtual tetrahedra.
    """
    T = r4.shape[0]
    q = q_values(r4)
    real = q > 0.0
    apex = np.where(real, -1, np.argmin(r4, axis=1)).astype(np.int64)

    dihedral = np.full((T, 6), np.nan)
    angles = np.zeros((T, 4))
    volume = np.zeros(T)
    if real.any():
        rr = r4[real]
        alpha, beta = link_angles(rr)
        dihedral[real] = beta
        angles[real] = alpha
        volume[real] = volumes(rr)
    virt = np.flatnonzero(~real)
    angles[virt, apex[virt]] = TWO_PI
    return q, apex, angles, dihedral, volume


def angle_jacobian(r4, volume):
    """d(alpha_i)/d(r_j) per tetrahedron, shape (T, 4, 4).

    Off-diagonal entries from the closed form in radii, perimeters and
    volume; the diagonal from the 0-homogeneity identity
    ``sum_j d(alpha_i)/d(r_j) r_j = 0``.  Caller guarantees ``volume > 0``.
    """
    T = r4.shape[0]
    inv = 1.0 / r4
    jac = np.zeros((T, 4, 4))
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            k, l = _others(i, j)
            ri, rj, rk, rl = r4[:, i], r4[:, j], r4[:, k], r4[:, l]
            p_ijk = 2.0 * (ri + rj + rk)
            p_ijl = 2.0 * (ri + rj + rl)
            bracket = (inv[:, i] * (inv[:, j] + inv[:, k] + inv[:, l])
                       + inv[:, j] * (inv[:, i] + inv[:, k] + inv[:, l])
                       - (inv[:, k] - inv[:, l]) ** 2)
            jac[:, i, j] = 4.0 * ri * rj * rk * rk * rl * rl / (3.0 * p_ijk * p_ijl * volume) * bracket
    for i in range(4):
        jac[:, i, i] = -(jac[:, i, :] * r4).sum(axis=1) / r4[:, i]
    return jac


def incidence_sum(flat, incidence):
    """Neumaier-compensated sums ``out[v] = sum(flat[incidence[v, :]])`` (-1 = padding)."""
    n, width = incidence.shape
    total = np.zeros(n)
    comp = np.zeros(n)
    for c in range(width):
        idx = incidence[:, c]
        x = np.where(idx >= 0, flat[np.maximum(idx, 0)], 0.0)
        t = total + x
        comp += np.where(np.abs(total) >= np.abs(x), (total - t) + x, (x - t) + total)
        total = t
    return total + comp

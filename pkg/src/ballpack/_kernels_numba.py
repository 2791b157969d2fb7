"""numba-compiled loop versions of the kernels in ``_kernels_numpy``.

Same signatures and conventions; one scalar pass per tetrahedron.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
Q_SNAP = 1e-14

# row i: the other three local vertices, increasing
_OTHERS = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]], dtype=np.int64)
# local edge index of the pair (i, q), i < q
_EDGE_ID = np.array([
    [-1, 0, 1, 2],
    [0, -1, 3, 4],
    [1, 3, -1, 5],
    [2, 4, 5, -1],
], dtype=np.int64)


@njit(cache=True)
def _face_angle(ri, rj, rk):
    return 2.0 * math.atan(math.sqrt(rj * rk / (ri * (ri + rj + rk))))


@njit(cache=True)
def _dihedral(s, sin_s, x, y, z):
    # link angle opposite side x
    num = max(math.sin(s - y) * math.sin(s - z), 0.0)
    den = max(sin_s * math.sin(s - x), 0.0)
    return 2.0 * math.atan2(math.sqrt(num), math.sqrt(den))


@njit(cache=True)
def _link_angles(r, alpha, dihedral):
    for i in range(4):
        j, k, l = _OTHERS[i, 0], _OTHERS[i, 1], _OTHERS[i, 2]
        # sides opposite the directions to j, k, l
        a = _face_angle(r[i], r[k], r[l])
        b = _face_angle(r[i], r[j], r[l])
        c = _face_angle(r[i], r[j], r[k])
        s = 0.5 * (a + b + c)
        t = math.tan(0.5 * s) * math.tan(0.5 * (s - a)) * math.tan(0.5 * (s - b)) * math.tan(0.5 * (s - c))
        alpha[i] = 4.0 * math.atan(math.sqrt(max(t, 0.0)))
        sin_s = math.sin(s)
        if j > i:
            dihedral[_EDGE_ID[i, j]] = _dihedral(s, sin_s, a, b, c)
        if k > i:
            dihedral[_EDGE_ID[i, k]] = _dihedral(s, sin_s, b, c, a)
        if l > i:
            dihedral[_EDGE_ID[i, l]] = _dihedral(s, sin_s, c, a, b)


@njit(cache=True)
def _q(r0, r1, r2, r3):
    a, b, c, d = 1.0 / r0, 1.0 / r1, 1.0 / r2, 1.0 / r3
    s2 = (a + b + c + d) ** 2
    q = s2 - 2.0 * (a * a + b * b + c * c + d * d)
    if abs(q) <= Q_SNAP * s2:
        return 0.0
    return q


@njit(cache=True)
def q_values(r4):
    T = r4.shape[0]
    out = np.empty(T)
    for t in range(T):
        out[t] = _q(r4[t, 0], r4[t, 1], r4[t, 2], r4[t, 3])
    return out


@njit(cache=True)
def _volume(r):
    q = _q(r[0], r[1], r[2], r[3])
    if q <= 0.0:
        return 0.0
    return r[0] * r[1] * r[2] * r[3] * math.sqrt(q) / 3.0


@njit(cache=True)
def volumes(r4):
    T = r4.shape[0]
    out = np.empty(T)
    for t in range(T):
        out[t] = _volume(r4[t])
    return out


@njit(cache=True)
def tet_batch(r4):
    T = r4.shape[0]
    q = np.empty(T)
    apex = np.empty(T, dtype=np.int64)
    angles = np.zeros((T, 4))
    dihedral = np.full((T, 6), np.nan)
    volume = np.zeros(T)
    for t in range(T):
        r = r4[t]
        qt = _q(r[0], r[1], r[2], r[3])
        q[t] = qt
        if qt > 0.0:
            apex[t] = -1
            _link_angles(r, angles[t], dihedral[t])
            volume[t] = _volume(r)
        else:
            m = 0
            for p in range(1, 4):
                if r[p] < r[m]:
                    m = p
            apex[t] = m
            angles[t, m] = TWO_PI
    return q, apex, angles, dihedral, volume


@njit(cache=True)
def angle_jacobian(r4, volume):
    T = r4.shape[0]
    jac = np.zeros((T, 4, 4))
    for t in range(T):
        r = r4[t]
        v = volume[t]
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                k = -1
                l = -1
                for p in range(4):
                    if p != i and p != j:
                        if k < 0:
                            k = p
                        else:
                            l = p
                ii, ij, ik, il = 1.0 / r[i], 1.0 / r[j], 1.0 / r[k], 1.0 / r[l]
                bracket = ii * (ij + ik + il) + ij * (ii + ik + il) - (ik - il) ** 2
                p_ijk = 2.0 * (r[i] + r[j] + r[k])
                p_ijl = 2.0 * (r[i] + r[j] + r[l])
                jac[t, i, j] = 4.0 * r[i] * r[j] * r[k] ** 2 * r[l] ** 2 / (3.0 * p_ijk * p_ijl * v) * bracket
        for i in range(4):
            s = 0.0
            for j in range(4):
                if j != i:
                    s += jac[t, i, j] * r[j]
            jac[t, i, i] = -s / r[i]
    return jac


@njit(cache=True)
def incidence_sum(flat, incidence):
    n, width = incidence.shape
    out = np.empty(n)
    for v in range(n):
        total = 0.0
        comp = 0.0
        for c in range(width):
            idx = incidence[v, c]
            if idx < 0:
                continue
            x = flat[idx]
            t = total + x
            if abs(total) >= abs(x):
                comp += (total - t) + x
            else:
                comp += (x - t) + total
            total = t
        out[v] = total + comp
    return out

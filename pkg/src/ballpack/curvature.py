"""Vertex curvatures, global functionals and the curvature Jacobian.

``K_i = 4*pi - sum of solid angles at i`` over the tetrahedra around ``i``.
The *extended* variants replace solid angles by their continuous extension
to virtual tetrahedra and are defined for every positive radius vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .tet_geometry import GeometryError, DegenerateTetrahedronError, VirtualTetrahedronError, is_degenerate
from .triangulation import Triangulation

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi


class VirtualPackingError(VirtualTetrahedronError):
    """Real-mode evaluation hit a tetrahedron with ``Q <= 0``."""

    def __init__(self, tet: int, vertices, q: float):
        super().__init__(
            f"tetrahedron {tet} {tuple(int(v) for v in vertices)} is virtual (Q={q:.6g}); "
            "use the extended curvature")
        self.tet = tet
        self.q = q


def as_packing(t: Triangulation, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (t.num_vertices,):
        raise GeometryError(f"packing has shape {r.shape}, triangulation has {t.num_vertices} vertices")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise GeometryError("packing radii must be positive and finite")
    return r


@dataclass(frozen=True)
class TetState:
    """Per-tetrahedron evaluation of a packing."""
    r4: np.ndarray
    q: np.ndarray
    apex: np.ndarray
    angles: np.ndarray
    dihedral: np.ndarray
    volume: np.ndarray


def tet_state(t: Triangulation, r) -> TetState:
    r = as_packing(t, r)
    r4 = r[t.tetrahedra]
    q, apex, angles, dihedral, volume = kernels.tet_batch(r4)
    return TetState(r4, q, apex, angles, dihedral, volume)


@dataclass(frozen=True)
class CurvatureReport:
    r: np.ndarray
    k: np.ndarray
    s: float
    lam: float
    l1: float
    min_q: float
    is_real: bool
    virtual_tets: list[tuple[int, int]] = field(default_factory=list)
    extended: bool = False

    @property
    def contributions(self) -> np.ndarray:
        """Per-vertex terms ``K_i r_i`` of the total curvature."""
        return self.k * self.r

    @property
    def residual(self) -> float:
        """``max_i |K_i - lambda|``; zero exactly at constant curvature."""
        return float(np.max(np.abs(self.k - self.lam)))


def _report(t: Triangulation, r, extended: bool) -> CurvatureReport:
    r = as_packing(t, r)
    st = tet_state(t, r)
    virtual = np.flatnonzero(st.apex >= 0)
    if not extended and virtual.size:
        n = int(virtual[0])
        raise VirtualPackingError(n, t.tetrahedra[n], float(st.q[n]))
    k = FOUR_PI - kernels.incidence_sum(st.angles.ravel(), t.vertex_incidence)
    s = math.fsum(k * r)
    l1 = math.fsum(r)
    min_q = float(st.q.min()) if st.q.size else math.inf
    return CurvatureReport(
        r=r, k=k, s=s, lam=s / l1, l1=l1, min_q=min_q,
        is_real=not virtual.size,
        virtual_tets=[(int(n), int(st.apex[n])) for n in virtual],
        extended=extended,
    )


def curvature(t: Triangulation, r) -> CurvatureReport:
    """Curvature of a real packing; raises :class:`VirtualPackingError` otherwise."""
    return _report(t, r, extended=False)


def extended_curvature(t: Triangulation, r) -> CurvatureReport:
    return _report(t, r, extended=True)


def cooper_rivin(t, r) -> float:
    return curvature(t, r).s


def extended_cooper_rivin(t, r) -> float:
    return extended_curvature(t, r).s


def crg_functional(t, r) -> float:
    return curvature(t, r).lam


def extended_crg(t, r) -> float:
    return extended_curvature(t, r).lam


def alpha_functional(t, r, alpha: float) -> float:
    """``S / (sum r_i^(alpha+1))^(1/(alpha+1))``; alpha = 0 gives the CRG functional."""
    if alpha == -1:
        raise ValueError("alpha = -1 is excluded")
    rep = curvature(t, r)
    p = alpha + 1.0
    return rep.s / math.fsum(rep.r ** p) ** (1.0 / p)


def lambda_gradient(t, r, extended: bool = True) -> np.ndarray:
    """Gradient of the (extended) CRG functional, ``(K_i - lambda) / sum(r)``."""
    rep = _report(t, r, extended)
    return (rep.k - rep.lam) / rep.l1


def edge_curvatures(t: Triangulation, r) -> np.ndarray:
    """Discrete Ricci curvature ``2*pi - sum of dihedral angles`` per edge of ``t.edges``."""
    st = tet_state(t, r)
    virtual = np.flatnonzero(st.apex >= 0)
    if virtual.size:
        n = int(virtual[0])
        raise VirtualPackingError(n, t.tetrahedra[n], float(st.q[n]))
    return TWO_PI - kernels.incidence_sum(st.dihedral.ravel(), t.edge_incidence)


def regge_functional(t: Triangulation, r) -> float:
    r = as_packing(t, r)
    ricci = edge_curvatures(t, r)
    lengths = r[t.edges[:, 0]] + r[t.edges[:, 1]]
    return math.fsum(ricci * lengths)


@dataclass(frozen=True)
class CurvatureJacobian:
    lambda_matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        sym = 0.5 * (self.lambda_matrix + self.lambda_matrix.T)
        return np.linalg.eigvalsh(sym)


def curvature_jacobian(t: Triangulation, r, extended: bool = False) -> CurvatureJacobian:
    """``Lambda[i, j] = dK_i/dr_j``.

    In extended mode virtual tetrahedra contribute nothing (their angles are
    locally constant); that is only valid away from ``Q = 0``.  Any real
    tetrahedron under the degeneracy floor raises.
    """
    r = as_packing(t, r)
    st = tet_state(t, r)
    real = st.apex < 0
    if not extended and not real.all():
        n = int(np.flatnonzero(~real)[0])
        raise VirtualPackingError(n, t.tetrahedra[n], float(st.q[n]))
    degenerate = real & is_degenerate(st.r4, st.volume)
    if degenerate.any():
        n = int(np.flatnonzero(degenerate)[0])
        raise DegenerateTetrahedronError(
            f"tetrahedron {n} volume {st.volume[n]:.3g} below degeneracy floor")
    lam = np.zeros((t.num_vertices, t.num_vertices))
    idx = np.flatnonzero(real)
    if idx.size:
        jac = kernels.angle_jacobian(st.r4[idx], st.volume[idx])
        tv = t.tetrahedra[idx]
        rows = np.repeat(tv, 4, axis=1)
        cols = np.tile(tv, (1, 4))
        np.add.at(lam, (rows.ravel(), cols.ravel()), -jac.reshape(len(idx), 16).ravel())
    return CurvatureJacobian(lam)


def householder_basis(n: int) -> np.ndarray:
    """Orthonormal ``(n, n-1)`` basis of ``{x : sum(x) = 0}``.

    Columns of the Householder reflection ``H`` with ``H @ ones/sqrt(n) = e_n``;
    the last column of ``H`` is ``ones/sqrt(n)`` and is dropped.
    """
    a = np.full(n, 1.0 / math.sqrt(n))
    v = a.copy()
    v[-1] -= 1.0
    vv = v @ v
    if vv == 0.0:
        return np.eye(n)[:, :-1]
    h = np.eye(n) - 2.0 * np.outer(v, v) / vv
    return h[:, :-1]


def projected_hessian(t: Triangulation, r, basis: np.ndarray | None = None) -> np.ndarray:
    """``B^T Lambda B`` on the hyperplane ``sum(x) = 0``."""
    lam = curvature_jacobian(t, r).lambda_matrix
    b = householder_basis(t.num_vertices) if basis is None else basis
    return b.T @ lam @ b

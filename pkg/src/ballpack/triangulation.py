"""Combinatorics of triangulated closed 3-manifolds.

A triangulation is stored as a dense ``(T, 4)`` integer array of tetrahedra
over vertices ``0..N-1``.  Edges, faces, stars and degrees are derived once
at construction; the object is immutable afterwards.

File format::

    # comment
    vertices 5
    tet 0 1 2 3
    tet 0 1 2 4
    ...
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# local vertex pairs of a tetrahedron, in the order used for per-tet edge data
EDGE_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class TriangulationError(ValueError):
    """Invalid triangulation content (bad ids, repeated vertices, duplicates)."""


class TriangulationParseError(TriangulationError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: list[tuple[str, str]] = field(default_factory=list)

    def __str__(self) -> str:
        if self.passed:
            return "passed"
        lines = [f"failed ({len(self.violations)} violations)"]
        lines += [f"  {rule}: {what}" for rule, what in self.violations]
        return "\n".join(lines)


class Triangulation:
    """Pure combinatorial data of a triangulated 3-manifold.

    Parameters
    ----------
    num_vertices : int
        Number of vertices ``N``; ids are ``0..N-1``.
    tetrahedra : array_like of shape (T, 4)
        Vertex ids of each tetrahedron.  Order is preserved.
    """

    def __init__(self, num_vertices: int, tetrahedra):
        tets = np.asarray(tetrahedra, dtype=np.int64)
        if tets.ndim != 2 or tets.shape[1] != 4:
            raise TriangulationError("tetrahedra must have shape (T, 4)")
        if num_vertices <= 0:
            raise TriangulationError("num_vertices must be positive")
        if tets.size and (tets.min() < 0 or tets.max() >= num_vertices):
            bad = int(np.argmax((tets < 0).any(axis=1) | (tets >= num_vertices).any(axis=1)))
            raise TriangulationError(f"tetrahedron {bad} has vertex id out of range [0, {num_vertices})")
        seen: dict[tuple[int, ...], int] = {}
        for n, tet in enumerate(tets):
            key = tuple(sorted(int(v) for v in tet))
            if len(set(key)) < 4:
                raise TriangulationError(f"tetrahedron {n} has a repeated vertex: {tuple(int(v) for v in tet)}")
            if key in seen:
                raise TriangulationError(f"tetrahedron {n} duplicates tetrahedron {seen[key]}")
            seen[key] = n

        self.num_vertices = int(num_vertices)
        self.tetrahedra = tets
        self.tetrahedra.setflags(write=False)

        edge_index: dict[tuple[int, int], int] = {}
        face_count: dict[tuple[int, int, int], int] = {}
        tet_edges = np.empty((len(tets), 6), dtype=np.int64)
        for n, tet in enumerate(tets):
            for e, (a, b) in enumerate(EDGE_PAIRS):
                key = (min(tet[a], tet[b]), max(tet[a], tet[b]))
                key = (int(key[0]), int(key[1]))
                if key not in edge_index:
                    edge_index[key] = len(edge_index)
                tet_edges[n, e] = edge_index[key]
            for tri in itertools.combinations(sorted(int(v) for v in tet), 3):
                face_count[tri] = face_count.get(tri, 0) + 1

        self.edges = np.array(list(edge_index), dtype=np.int64).reshape(-1, 2)
        self.faces = np.array(list(face_count), dtype=np.int64).reshape(-1, 3)
        self.tet_edges = tet_edges
        self._edge_index = edge_index
        self._face_count = face_count

        vstar: list[list[int]] = [[] for _ in range(self.num_vertices)]
        estar: list[list[int]] = [[] for _ in range(len(self.edges))]
        for n, tet in enumerate(tets):
            for v in tet:
                vstar[int(v)].append(n)
            for e in tet_edges[n]:
                estar[int(e)].append(n)
        self.vertex_star = [np.array(s, dtype=np.int64) for s in vstar]
        self.edge_star = [np.array(s, dtype=np.int64) for s in estar]
        self.degrees = np.array([len(s) for s in vstar], dtype=np.int64)

        # (N, max degree) table of flat indices tet*4 + local slot, padded with -1;
        # the curvature kernels reduce per-tet quantities through it
        dmax = int(self.degrees.max()) if len(tets) else 0
        inc = np.full((self.num_vertices, max(dmax, 1)), -1, dtype=np.int64)
        fill = np.zeros(self.num_vertices, dtype=np.int64)
        for n, tet in enumerate(tets):
            for slot, v in enumerate(tet):
                inc[v, fill[v]] = 4 * n + slot
                fill[v] += 1
        self.vertex_incidence = inc
        # same for edges over the 6 local edge slots
        emax = max((len(s) for s in estar), default=1)
        einc = np.full((len(self.edges), max(emax, 1)), -1, dtype=np.int64)
        efill = np.zeros(len(self.edges), dtype=np.int64)
        for n in range(len(tets)):
            for slot, e in enumerate(tet_edges[n]):
                einc[e, efill[e]] = 6 * n + slot
                efill[e] += 1
        self.edge_incidence = einc

    @property
    def num_tetrahedra(self) -> int:
        return len(self.tetrahedra)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def euler_characteristic(self) -> int:
        return self.num_vertices - self.num_edges + self.num_faces - self.num_tetrahedra

    def edge_id(self, i: int, j: int) -> int:
        return self._edge_index[(min(i, j), max(i, j))]

    def neighbors(self, i: int) -> list[int]:
        out = set()
        for n in self.vertex_star[i]:
            out.update(int(v) for v in self.tetrahedra[n])
        out.discard(i)
        return sorted(out)

    def __repr__(self) -> str:
        return (f"Triangulation(V={self.num_vertices}, E={self.num_edges}, "
                f"F={self.num_faces}, T={self.num_tetrahedra})")


def load_triangulation(text: str) -> Triangulation:
    """Parse triangulation file content.  Manifold conditions are not checked."""
    num_vertices = None
    tets = []
    seen: dict[tuple[int, ...], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        tokens = stripped.split()
        head = tokens[0]
        if head == "vertices":
            if num_vertices is not None:
                raise TriangulationParseError("duplicate 'vertices' line", lineno, col)
            if tets:
                raise TriangulationParseError("'vertices' must precede all 'tet' lines", lineno, col)
            if len(tokens) != 2:
                raise TriangulationParseError("expected 'vertices N'", lineno, col)
            num_vertices = _parse_int(tokens[1], raw, lineno)
            if num_vertices <= 0:
                raise TriangulationParseError("vertex count must be positive", lineno, _column_of(raw, tokens[1]))
        elif head == "tet":
            if num_vertices is None:
                raise TriangulationParseError("'tet' before 'vertices' line", lineno, col)
            if len(tokens) != 5:
                raise TriangulationParseError(f"expected 4 vertex ids, got {len(tokens) - 1}", lineno, col)
            ids = [_parse_int(tok, raw, lineno) for tok in tokens[1:]]
            for tok, v in zip(tokens[1:], ids):
                if not 0 <= v < num_vertices:
                    raise TriangulationParseError(
                        f"vertex id {v} out of range [0, {num_vertices})", lineno, _column_of(raw, tok))
            if len(set(ids)) < 4:
                raise TriangulationParseError(f"tetrahedron has a repeated vertex: {' '.join(tokens[1:])}", lineno, col)
            key = tuple(sorted(ids))
            if key in seen:
                raise TriangulationParseError(f"duplicate tetrahedron (first on line {seen[key]})", lineno, col)
            seen[key] = lineno
            tets.append(ids)
        else:
            raise TriangulationParseError(f"unknown keyword {head!r}", lineno, col)
    if num_vertices is None:
        raise TriangulationParseError("missing 'vertices N' line", 1, 1)
    return Triangulation(num_vertices, np.array(tets, dtype=np.int64).reshape(-1, 4))


def _column_of(raw: str, token: str) -> int:
    return raw.find(token) + 1


def _parse_int(token: str, raw: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise TriangulationParseError(f"expected integer, got {token!r}", lineno, _column_of(raw, token)) from None


def dump_triangulation(t: Triangulation) -> str:
    lines = [f"vertices {t.num_vertices}"]
    lines += ["tet " + " ".join(str(int(v)) for v in tet) for tet in t.tetrahedra]
    return "\n".join(lines) + "\n"


def validate(t: Triangulation) -> ValidationReport:
    """Check the closed pseudo-manifold conditions.

    Rules: ``face-pairing`` (every face in exactly two tetrahedra),
    ``euler`` (V - E + F - T = 0), ``connectivity`` (1-skeleton connected,
    no isolated vertex) and ``duplicate-tet``.  The link condition is not
    checked.
    """
    violations: list[tuple[str, str]] = []
    for face, count in t._face_count.items():
        if count != 2:
            violations.append(("face-pairing", f"face {face} lies in {count} tetrahedra"))

    chi = t.euler_characteristic()
    if chi != 0:
        violations.append(("euler", f"V-E+F-T = {t.num_vertices}-{t.num_edges}+{t.num_faces}-{t.num_tetrahedra} = {chi}"))

    parent = list(range(t.num_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in t.edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    roots = {find(v) for v in range(t.num_vertices)}
    if len(roots) > 1:
        violations.append(("connectivity", f"1-skeleton has {len(roots)} components"))

    # load rejects duplicates already; kept for structures built elsewhere
    keys = [tuple(sorted(map(int, tet))) for tet in t.tetrahedra]
    if len(set(keys)) != len(keys):
        violations.append(("duplicate-tet", "repeated tetrahedron vertex set"))

    return ValidationReport(passed=not violations, violations=violations)


def is_regular(t: Triangulation) -> bool:
    return bool(np.all(t.degrees == t.degrees[0]))


def generate_boundary_4simplex() -> Triangulation:
    """The 5-vertex triangulation of the 3-sphere (boundary of the 4-simplex)."""
    return Triangulation(5, list(itertools.combinations(range(5), 4)))


def generate_16cell() -> Triangulation:
    """Boundary of the 4-dimensional cross-polytope.

    Vertices ``2k`` and ``2k + 1`` form the k-th antipodal pair; each
    tetrahedron takes one vertex from every pair.
    """
    tets = [[2 * k + bit for k, bit in enumerate(bits)] for bits in itertools.product((0, 1), repeat=4)]
    return Triangulation(8, tets)

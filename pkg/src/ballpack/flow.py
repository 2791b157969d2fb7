"""Normalized, extended and prescribed combinatorial Yamabe flows.

All flows are integrated in ``u = ln r`` with classical RK4 and an adaptive
step.  Real modes stop at the boundary of the real packing space and report
which tetrahedron collapsed; extended modes pass through virtual
tetrahedra and only stop on radius under- or overflow.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .curvature import (
    CurvatureReport, VirtualPackingError, as_packing, curvature, curvature_jacobian,
    extended_curvature,
)
from .tet_geometry import GeometryError, q_value
from .triangulation import Triangulation


RADIUS_UNDERFLOW = 1e-10
RADIUS_OVERFLOW = 1e10
MAX_DELTA_U = 0.5
SHRINK = 0.5
GROW = 1.2
GROW_AFTER = 5
CONVERGED_STREAK = 3
# z = dt * rho stays inside RK4's real stability interval (about 2.785)
STABILITY_Z = 2.5


class FlowMode(enum.Enum):
    NORMALIZED = "normalized"
    EXTENDED = "extended"
    PRESCRIBED = "prescribed"
    PRESCRIBED_EXTENDED = "prescribed-extended"

    @property
    def extended(self) -> bool:
        return self in (FlowMode.EXTENDED, FlowMode.PRESCRIBED_EXTENDED)

    @property
    def prescribed(self) -> bool:
        return self in (FlowMode.PRESCRIBED, FlowMode.PRESCRIBED_EXTENDED)


class FlowConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    """Integration settings.

    ``target`` is the prescribed curvature vector and is required exactly
    in the prescribed modes.  ``drift_tol`` bounds the relative change of
    ``sum(r)`` per step in the unprescribed modes, where the exact flow
    conserves it; a larger change is treated as truncation error and the
    step is retried with a smaller ``dt``.  ``stability_cap`` keeps ``dt``
    below ``2.5 / rho`` with ``rho`` the stiffest rate of the linearized flow.
    """
    mode: FlowMode = FlowMode.EXTENDED
    target: np.ndarray | None = None
    dt_init: float = 1e-2
    dt_min: float = 1e-8
    dt_max: float = 0.5
    t_max: float = 100.0
    conv_tol: float = 1e-8
    renormalize: bool = False
    record_every: int = 1
    stability_cap: bool = True
    drift_tol: float = 1e-11

    def __post_init__(self):
        object.__setattr__(self, "mode", FlowMode(self.mode))
        if self.target is not None:
            object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))
        for name in ("dt_init", "dt_min", "dt_max", "t_max", "conv_tol", "drift_tol"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise FlowConfigError(f"{name} must be positive and finite, got {val}")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise FlowConfigError("need dt_min <= dt_init <= dt_max")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise FlowConfigError("record_every must be a positive integer")
        if self.mode.prescribed:
            if self.target is None:
                raise FlowConfigError(f"mode {self.mode.value} needs a target curvature")
            if not np.all(np.isfinite(self.target)):
                raise FlowConfigError("target curvature must be finite")
        elif self.target is not None:
            raise FlowConfigError(f"mode {self.mode.value} takes no target curvature")

    def check(self, t: Triangulation) -> None:
        if self.target is not None and self.target.shape != (t.num_vertices,):
            raise FlowConfigError(
                f"target has shape {self.target.shape}, triangulation has {t.num_vertices} vertices")


# --- outcomes ---------------------------------------------------------------

@dataclass(frozen=True)
class QCollapse:
    tet: int

    def __str__(self):
        return f"QCollapse(tet={self.tet})"


@dataclass(frozen=True)
class ZeroRadius:
    vertex: int

    def __str__(self):
        return f"ZeroRadius(vertex={self.vertex})"


@dataclass(frozen=True)
class Blowup:
    vertex: int

    def __str__(self):
        return f"Blowup(vertex={self.vertex})"


BoundaryKind = QCollapse | ZeroRadius | Blowup


@dataclass(frozen=True)
class Converged:
    r: np.ndarray

    def __str__(self):
        return "Converged"


@dataclass(frozen=True)
class BoundaryHit:
    kind: BoundaryKind
    t: float

    def __str__(self):
        return f"BoundaryHit({self.kind}, t={self.t:.17g})"


@dataclass(frozen=True)
class TimeLimit:
    def __str__(self):
        return "TimeLimit"


FlowStatus = Converged | BoundaryHit | TimeLimit


@dataclass(frozen=True)
class FlowRecord:
    t: float
    r: np.ndarray
    k: np.ndarray
    lam: float
    s: float
    l1: float
    min_q: float
    min_ratio: float
    n_virtual: int
    virtual_tets: tuple[tuple[int, int], ...] | None = None
    min_q_tet: int | None = None

    @classmethod
    def from_report(cls, time: float, rep: CurvatureReport, q_tet: int | None) -> "FlowRecord":
        return cls(
            t=float(time), r=rep.r.copy(), k=rep.k.copy(), lam=rep.lam, s=rep.s, l1=rep.l1,
            min_q=rep.min_q, min_ratio=min_ratio(rep.r), n_virtual=len(rep.virtual_tets),
            virtual_tets=tuple(rep.virtual_tets), min_q_tet=q_tet,
        )


TRACE_SCALARS = ("lambda", "S", "l1", "minQ", "min_ratio", "n_virtual")


@dataclass(frozen=True)
class FlowTrace:
    records: tuple[FlowRecord, ...] = ()

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([rec.lam for rec in self.records])

    @property
    def radii(self) -> np.ndarray:
        return np.array([rec.r for rec in self.records])

    def header(self) -> list[str]:
        n = len(self.records[0].r) if self.records else 0
        return (["t"] + [f"r_{i}" for i in range(n)] + [f"K_{i}" for i in range(n)]
                + list(TRACE_SCALARS))

    def to_csv(self, fh=None) -> str | None:
        """Write the trace as CSV (17 significant digits); returns text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.header())
        for rec in self.records:
            w.writerow([_fmt(rec.t)] + [_fmt(x) for x in rec.r] + [_fmt(x) for x in rec.k]
                       + [_fmt(rec.lam), _fmt(rec.s), _fmt(rec.l1), _fmt(rec.min_q),
                          _fmt(rec.min_ratio), str(rec.n_virtual)])
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text_or_fh) -> "FlowTrace":
        fh = io.StringIO(text_or_fh) if isinstance(text_or_fh, str) else text_or_fh
        rows = list(csv.reader(fh))
        if not rows:
            raise ValueError("empty trace file")
        head = rows[0]
        n = sum(1 for h in head if h.startswith("r_"))
        expected = ["t"] + [f"r_{i}" for i in range(n)] + [f"K_{i}" for i in range(n)] + list(TRACE_SCALARS)
        if head != expected:
            raise ValueError(f"unexpected trace header: {head}")
        records = []
        for line, row in enumerate(rows[1:], start=2):
            if len(row) != len(head):
                raise ValueError(f"line {line}: expected {len(head)} fields, got {len(row)}")
            vals = [float(x) for x in row[:-1]]
            records.append(FlowRecord(
                t=vals[0], r=np.array(vals[1:1 + n]), k=np.array(vals[1 + n:1 + 2 * n]),
                lam=vals[1 + 2 * n], s=vals[2 + 2 * n], l1=vals[3 + 2 * n],
                min_q=vals[4 + 2 * n], min_ratio=vals[5 + 2 * n], n_virtual=int(row[-1]),
            ))
        return cls(tuple(records))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FlowOutcome:
    status: FlowStatus
    trace: FlowTrace
    steps: int = 0
    rejected: int = 0

    @property
    def converged(self) -> bool:
        return isinstance(self.status, Converged)

    @property
    def final(self) -> FlowRecord:
        return self.trace.records[-1]


# --- vector field -------------------------------------------------------------

def _evaluate(t: Triangulation, r: np.ndarray) -> tuple[CurvatureReport, int | None]:
    """Extended report plus the index of the lowest-Q tetrahedron when any is virtual."""
    rep = extended_curvature(t, r)
    q_tet = None
    if rep.virtual_tets:
        q_tet = min(rep.virtual_tets, key=lambda tv: _tet_q(t, r, tv[0]))[0]
    return rep, q_tet


def _tet_q(t: Triangulation, r: np.ndarray, n: int) -> float:
    return q_value(r[t.tetrahedra[n]])


def _velocity(rep: CurvatureReport, mode: FlowMode, target) -> np.ndarray:
    """``du/dt`` at an evaluated state."""
    if mode.prescribed:
        return target - rep.k
    return rep.lam - rep.k


def residual(rep: CurvatureReport, mode: FlowMode = FlowMode.EXTENDED, target=None) -> float:
    """Convergence measure: ``max|K - lambda|``, or ``max|K - target|`` when prescribed."""
    return float(np.max(np.abs(_velocity(rep, FlowMode(mode), target))))


def rhs(t: Triangulation, r, mode: FlowMode | str = FlowMode.EXTENDED, target=None) -> np.ndarray:
    """``dr/dt`` for the chosen flow."""
    mode = FlowMode(mode)
    if mode.prescribed and target is None:
        raise FlowConfigError(f"mode {mode.value} needs a target curvature")
    rep = extended_curvature(t, r) if mode.extended else curvature(t, r)
    tgt = None if target is None else np.asarray(target, dtype=np.float64)
    return _velocity(rep, mode, tgt) * rep.r


@dataclass
class _Stage:
    rep: CurvatureReport
    q_tet: int | None
    offset: float


def _rk4(t, u, dt, mode, target):
    """One RK4 step in ``u``.

    Returns ``(u_new, bad)`` where ``bad`` is the first stage evaluated at a
    virtual packing in a real mode (``u_new`` is then None).
    """
    ks = []
    for c, prev_weight in ((0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)):
        us = u if not ks else u + prev_weight * dt * ks[-1]
        rs = np.exp(us)
        rep, q_tet = _evaluate(t, rs)
        if not mode.extended and not rep.is_real:
            return None, _Stage(rep, q_tet, c)
        ks.append(_velocity(rep, mode, target))
    k1, k2, k3, k4 = ks
    return u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), None


def step(t: Triangulation, r, dt: float, mode: FlowMode | str = FlowMode.EXTENDED,
         target=None, renormalize: bool = False) -> np.ndarray:
    """One RK4 step of size ``dt`` in log coordinates.

    Raises :class:`VirtualPackingError` if a real-mode stage leaves the
    real packing space.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    mode = FlowMode(mode)
    r = as_packing(t, r)
    tgt = None if target is None else np.asarray(target, dtype=np.float64)
    if mode.prescribed and tgt is None:
        raise FlowConfigError(f"mode {mode.value} needs a target curvature")
    u_new, bad = _rk4(t, np.log(r), dt, mode, tgt)
    if bad is not None:
        n = bad.rep.virtual_tets[0][0]
        raise VirtualPackingError(n, t.tetrahedra[n], bad.rep.min_q)
    r_new = np.exp(u_new)
    if renormalize:
        r_new *= math.fsum(r) / math.fsum(r_new)
    return r_new


def _spectral_cap(t: Triangulation, r: np.ndarray) -> float:
    """Largest step keeping the linearized flow inside RK4's stability region.

    The linearization of ``u' = lambda - K`` is ``-Lambda diag(r)`` (up to a
    rank-one term), whose spectrum matches ``D^1/2 Lambda D^1/2``.
    """
    try:
        lam = curvature_jacobian(t, r, extended=True).lambda_matrix
    except GeometryError:
        return math.inf
    d = np.sqrt(r)
    m = d[:, None] * lam * d[None, :]
    rho = float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])
    return STABILITY_Z / rho if rho > 0 else math.inf


def _radius_boundary(r: np.ndarray) -> BoundaryKind | None:
    if r.min() < RADIUS_UNDERFLOW:
        return ZeroRadius(int(np.argmin(r)))
    if r.max() > RADIUS_OVERFLOW:
        return Blowup(int(np.argmax(r)))
    return None


def run(t: Triangulation, r0, config: FlowConfig | None = None) -> FlowOutcome:
    """Integrate the flow from ``r0`` until convergence, a boundary, or ``t_max``."""
    config = config or FlowConfig()
    config.check(t)
    mode, target = config.mode, config.target
    r = as_packing(t, r0).copy()
    if not mode.extended:
        curvature(t, r)  # raises on a virtual start
    l1_0 = math.fsum(r)

    rep, q_tet = _evaluate(t, r)
    records = [FlowRecord.from_report(0.0, rep, q_tet)]
    if residual(rep, mode, target) <= config.conv_tol:
        return FlowOutcome(Converged(r.copy()), FlowTrace(tuple(records)))

    time = 0.0
    dt = config.dt_init
    streak_ok = 0
    streak_conv = 0
    steps = rejected = 0
    u = np.log(r)
    cap = _spectral_cap(t, r) if config.stability_cap else math.inf

    def finish(status):
        if records[-1].t != time:
            records.append(FlowRecord.from_report(time, rep, q_tet))
        return FlowOutcome(status, FlowTrace(tuple(records)), steps, rejected)

    while True:
        if time >= config.t_max * (1.0 - 1e-15):
            return finish(TimeLimit())
        h = min(dt, max(cap, config.dt_min), config.t_max - time)
        u_new, bad = _rk4(t, u, h, mode, target)
        reject = bad is not None
        if not reject:
            du = u_new - u
            reject = not np.all(np.isfinite(du)) or float(np.max(np.abs(du))) > MAX_DELTA_U
        if not reject and not mode.prescribed:
            l1_new = math.fsum(np.exp(u_new))
            reject = abs(l1_new / math.fsum(np.exp(u)) - 1.0) > config.drift_tol
        if not reject and not mode.extended:
            rep_new, q_new = _evaluate(t, np.exp(u_new))
            if not rep_new.is_real:
                reject = True
                bad = _Stage(rep_new, q_new, 1.0)
        if reject:
            rejected += 1
            dt = h * SHRINK
            streak_ok = 0
            if dt < config.dt_min:
                if bad is not None:
                    # the flow has reached the collapsing boundary: keep the
                    # first virtual evaluation as the terminal record
                    time_bad = time + bad.offset * h
                    records.append(FlowRecord.from_report(time_bad, bad.rep, bad.q_tet))
                    kind = QCollapse(bad.q_tet if bad.q_tet is not None else -1)
                    return FlowOutcome(BoundaryHit(kind, time_bad), FlowTrace(tuple(records)),
                                       steps, rejected)
                raise FloatingPointError(f"step size fell below dt_min at t={time:.6g}")
            continue

        u = u_new
        time += h
        steps += 1
        r = np.exp(u)
        if config.renormalize:
            r *= l1_0 / math.fsum(r)
            u = np.log(r)
        rep, q_tet = _evaluate(t, r)
        if steps % config.record_every == 0:
            records.append(FlowRecord.from_report(time, rep, q_tet))

        kind = _radius_boundary(r)
        if kind is not None:
            return finish(BoundaryHit(kind, time))

        if residual(rep, mode, target) <= config.conv_tol:
            streak_conv += 1
            if streak_conv >= CONVERGED_STREAK:
                return finish(Converged(r.copy()))
        else:
            streak_conv = 0

        streak_ok += 1
        if streak_ok >= GROW_AFTER:
            dt = min(dt * GROW, config.dt_max)
            streak_ok = 0
        if config.stability_cap:
            cap = _spectral_cap(t, r)


def classify_boundary(trace: FlowTrace) -> BoundaryKind:
    """Which boundary the last record of ``trace`` sits on."""
    if not len(trace):
        raise ValueError("empty trace")
    last = trace.records[-1]
    kind = _radius_boundary(np.asarray(last.r))
    if kind is not None:
        return kind
    if last.min_q <= 0:
        return QCollapse(last.min_q_tet if last.min_q_tet is not None else -1)
    raise ValueError("trace does not end on a boundary")


def monotonicity_check(t: Triangulation, r) -> list[int]:
    """Tetrahedra in which some pair has radius order agreeing with curvature order.

    A tetrahedron passes when ``(r_i - r_j)(K_i - K_j) <= 0`` for all six
    vertex pairs in it.
    """
    rep = curvature(t, r)
    rr = rep.r[t.tetrahedra]
    kk = rep.k[t.tetrahedra]
    bad = np.zeros(t.num_tetrahedra, dtype=bool)
    for a in range(4):
        for b in range(a + 1, 4):
            bad |= (rr[:, a] - rr[:, b]) * (kk[:, a] - kk[:, b]) > 0
    return [int(n) for n in np.flatnonzero(bad)]


def min_ratio(r) -> float:
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("radii must be positive")
    return float(r.min() / r.max())


def energy_bounds(trace: FlowTrace) -> tuple[np.ndarray, np.ndarray]:
    """Exponential envelopes ``r(0) e^{-ct} <= r(t) <= r(0) e^{ct}`` along the records.

    ``c`` is the largest ``|lambda - K_i|`` seen in the trace.
    """
    c = max(float(np.max(np.abs(rec.lam - rec.k))) for rec in trace.records)
    r0 = trace.records[0].r
    times = trace.times[:, None]
    return r0 * np.exp(-c * times), r0 * np.exp(c * times)


def dissipation_defects(trace: FlowTrace, max_span: float = 0.05, min_change: float = 1e-9) -> np.ndarray:
    """Relative mismatch between the change of lambda and the integrated dissipation.

    Along the normalized and extended flows
    ``lambda' = -(1/sum r) sum_i r_i (K_i - lambda)^2``.  For each window of
    three consecutive records spanning at most ``max_span`` in time, the
    observed change of lambda is compared with Simpson's rule applied to
    the right-hand side.  Windows whose lambda changes by less than
    ``min_change`` are dominated by rounding and skipped, as are windows in
    which some tetrahedron switches between real and virtual (the
    curvature is only continuous there).
    """
    recs = trace.records
    out = []
    for a, b, c in zip(recs, recs[1:], recs[2:]):
        h0, h1 = b.t - a.t, c.t - b.t
        if h0 <= 0 or h1 <= 0 or h0 + h1 > max_span:
            continue
        if not a.virtual_tets == b.virtual_tets == c.virtual_tets or not a.n_virtual == b.n_virtual == c.n_virtual:
            continue
        change = c.lam - a.lam
        if abs(change) < min_change:
            continue
        f = [-float(np.sum(x.r * (x.k - x.lam) ** 2)) / x.l1 for x in (a, b, c)]
        h = h0 + h1
        integral = h / 6.0 * ((2.0 - h1 / h0) * f[0] + h * h / (h0 * h1) * f[1] + (2.0 - h0 / h1) * f[2])
        out.append(abs(change - integral) / abs(integral))
    return np.array(out)

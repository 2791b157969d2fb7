"""Constrained minimization of the extended Cooper-Rivin functionals.

The combinatorial Yamabe problem minimizes ``S~(r) = sum K~_i r_i`` on the
simplex ``sum r_i = const``; the prescribed problem minimizes
``sum (K~_i - Kbar_i) r_i``.  Both are convex with gradient ``K~ - Kbar``, so
projected gradient descent with an Armijo line search applies everywhere,
and Newton steps on the projected Hessian are used strictly inside the
real packing space.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import (
    CurvatureReport, as_packing, curvature_jacobian, extended_curvature, householder_basis,
)
from .tet_geometry import GeometryError
from .triangulation import Triangulation


RADIUS_UNDERFLOW = 1e-10
# objective changes below this fraction of sum |terms| are not resolved by F itself
RESOLUTION = 64 * np.finfo(float).eps
MIN_STEP = 1e-20


@dataclass(frozen=True)
class MinimizeConfig:
    """Settings for :func:`minimize_extended` and :func:`solve_prescribed`.

    ``newton_min_q`` gates Newton steps on ``min Q * mean(r)^2`` which is
    scale-free and equals ``min Q`` at unit mean radius.
    """
    r0: np.ndarray | None = None
    grad_tol: float = 1e-10
    max_iters: int = 500
    shrink: float = 0.5
    c1: float = 1e-4
    newton: bool = True
    newton_min_q: float = 0.01

    def __post_init__(self):
        if self.r0 is not None:
            object.__setattr__(self, "r0", np.asarray(self.r0, dtype=np.float64))
        if not (self.grad_tol > 0 and math.isfinite(self.grad_tol)):
            raise ValueError("grad_tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must lie in (0, 1)")


@dataclass(frozen=True)
class MinimizeResult:
    r_star: np.ndarray
    value: float
    projected_grad_norm: float
    is_real: bool
    iterations: int
    converged: bool
    objective: float
    curvature_error: float
    report: CurvatureReport = field(repr=False)
    history: tuple[float, ...] = field(default=(), repr=False)
    newton_steps: int = 0
    message: str = ""


def _objective(rep: CurvatureReport, target) -> float:
    if target is None:
        return rep.s
    return math.fsum((rep.k - target) * rep.r)


def _magnitude(rep: CurvatureReport, target) -> float:
    """Size of the terms summed in the objective, which sets its rounding level."""
    mag = float(np.abs(rep.k) @ rep.r)
    return mag if target is None else mag + float(np.abs(target) @ rep.r)


def _projected(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def _newton_ok(t: Triangulation, rep: CurvatureReport, min_q: float) -> bool:
    if not rep.is_real:
        return False
    return rep.min_q * float(np.mean(rep.r)) ** 2 > min_q


def _newton_direction(t: Triangulation, r: np.ndarray, g: np.ndarray, basis: np.ndarray):
    try:
        lam = curvature_jacobian(t, r).lambda_matrix
    except GeometryError:
        return None
    h = basis.T @ lam @ basis
    h = 0.5 * (h + h.T)
    try:
        chol = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        return None
    y = np.linalg.solve(chol.T, np.linalg.solve(chol, -(basis.T @ g)))
    return basis @ y


def _minimize(t: Triangulation, target, config: MinimizeConfig) -> MinimizeResult:
    n = t.num_vertices
    r = as_packing(t, config.r0 if config.r0 is not None else np.ones(n)).copy()
    l1 = math.fsum(r)
    basis = householder_basis(n)

    def converged_at(rep, gnorm):
        if gnorm > config.grad_tol:
            return False
        # prescribed: the simplex critical point has K = Kbar + c; only c = 0 solves it
        return target is None or float(np.max(np.abs(rep.k - target))) <= config.grad_tol * n

    rep = extended_curvature(t, r)
    f = _objective(rep, target)
    g = _projected(rep.k - (0.0 if target is None else target))
    gnorm = float(np.linalg.norm(g))
    history = [f]
    it = 0
    newton_steps = 0
    message = "iteration limit"
    done = converged_at(rep, gnorm)
    if done:
        message = "converged"

    while not done and it < config.max_iters:
        d = None
        used_newton = False
        if config.newton and _newton_ok(t, rep, config.newton_min_q):
            d = _newton_direction(t, r, g, basis)
            used_newton = d is not None and float(g @ d) < 0
            if not used_newton:
                d = None
        if d is None:
            d = -g * (l1 / n)
        slope = float(g @ d)
        neg = d < 0
        alpha = 1.0
        if neg.any():
            alpha = min(alpha, 0.5 * float(np.min(-r[neg] / d[neg])))

        accepted = False
        while alpha >= MIN_STEP:
            trial = r + alpha * d
            if np.all(trial > 0):
                trial *= l1 / math.fsum(trial)
                rep_t = extended_curvature(t, trial)
                f_t = _objective(rep_t, target)
                change = f_t - f
                if abs(change) <= RESOLUTION * _magnitude(rep, target):
                    # the gradient is the derivative of F, so the trapezoid rule
                    # on directional derivatives resolves what F cannot
                    g_t = _projected(rep_t.k - (0.0 if target is None else target))
                    change = 0.5 * (alpha * slope + float(g_t @ (trial - r)))
                if change < 0 and change <= config.c1 * alpha * slope:
                    accepted = True
                    break
            alpha *= config.shrink
        if not accepted:
            message = "line search stalled"
            break

        it += 1
        newton_steps += used_newton
        r, rep, f = trial, rep_t, f_t
        history.append(f)
        g = _projected(rep.k - (0.0 if target is None else target))
        gnorm = float(np.linalg.norm(g))
        if r.min() < RADIUS_UNDERFLOW * l1:
            message = "radius underflow; minimizer may lie on the simplex boundary"
            break
        if converged_at(rep, gnorm):
            done = True
            message = "converged"

    err = float(np.max(np.abs(rep.k - (rep.lam if target is None else target))))
    return MinimizeResult(
        r_star=r, value=rep.lam, projected_grad_norm=gnorm, is_real=rep.is_real,
        iterations=it, converged=done, objective=f, curvature_error=err, report=rep,
        history=tuple(history), newton_steps=newton_steps, message=message,
    )


def minimize_extended(t: Triangulation, config: MinimizeConfig | None = None) -> MinimizeResult:
    """Minimize the extended Cooper-Rivin functional on ``{sum r = sum r0}``.

    The minimum value of the extended CRG functional is the extended
    Yamabe invariant; at a real minimizer the packing has constant
    curvature.
    """
    return _minimize(t, None, config or MinimizeConfig())


def solve_prescribed(t: Triangulation, target, config: MinimizeConfig | None = None) -> MinimizeResult:
    """Minimize ``sum (K~_i - target_i) r_i`` on the simplex.

    ``converged`` additionally requires ``max|K - target| <= grad_tol * N``,
    so a target that differs from every attainable curvature by a constant
    shift is reported as unsolved.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (t.num_vertices,):
        raise ValueError(f"target has shape {target.shape}, expected ({t.num_vertices},)")
    if not np.all(np.isfinite(target)):
        raise ValueError("target curvature must be finite")
    return _minimize(t, target, config or MinimizeConfig())


def random_starts(n: int, n_starts: int, rng: np.random.Generator, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """``n_starts`` packings log-uniform in ``[lo, hi]^n``, scaled to ``sum r = n``."""
    r = np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n_starts, n)))
    return r * (n / r.sum(axis=1, keepdims=True))


def multi_start(t: Triangulation, config: MinimizeConfig | None = None, n_starts: int = 8,
                seed: int = 0) -> list[MinimizeResult]:
    config = config or MinimizeConfig()
    rng = np.random.default_rng(seed)
    out = []
    for r0 in random_starts(t.num_vertices, n_starts, rng):
        out.append(minimize_extended(t, dataclasses.replace(config, r0=r0)))
    return out


def yamabe_invariant_estimate(t: Triangulation, config: MinimizeConfig | None = None,
                              n_starts: int = 1, seed: int = 0) -> float:
    """Extended Yamabe invariant: the minimum of the extended CRG functional.

    With ``n_starts > 1`` the smallest value over seeded random starts is
    returned; the functional is convex so all starts should agree.
    """
    if n_starts <= 1:
        return minimize_extended(t, config).value
    return min(res.value for res in multi_start(t, config, n_starts, seed))


# --- energy gap estimation ------------------------------------------------------

def _check_direction(r_hat: np.ndarray, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != r_hat.shape:
        raise ValueError("direction and packing differ in length")
    norm = float(np.linalg.norm(gamma))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must have unit norm, got {norm:.3g}")
    if abs(float(gamma.sum())) > 1e-9:
        raise ValueError("direction must satisfy sum(gamma) = 0")
    return gamma


def ray_profile(t: Triangulation, r_hat, gamma, n_samples: int = 200) -> tuple[float, float]:
    """Sampled supremum of the extended CRG functional along ``r_hat + s * gamma``.

    ``s`` runs over ``0`` and a geometric grid up to just below the
    positivity bound ``min(-r_hat_i / gamma_i : gamma_i < 0)``.

    Returns
    -------
    sup_lambda, s_at_sup
    """
    r_hat = as_packing(t, r_hat)
    gamma = _check_direction(r_hat, gamma)
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    neg = gamma < 0
    s_max = float(np.min(-r_hat[neg] / gamma[neg]))
    grid = np.concatenate([[0.0], np.geomspace(s_max * 1e-6, s_max * (1.0 - 1e-9), n_samples - 1)])
    best, at = -math.inf, 0.0
    for s in grid:
        lam = extended_curvature(t, r_hat + s * gamma).lam
        if lam > best:
            best, at = lam, float(s)
    return best, at


@dataclass(frozen=True)
class ChiEstimate:
    """Upper estimate of the energy gap: min over sampled rays of the sampled sup.

    Non-rigorous: both the set of directions and the points on each ray
    are finite samples.
    """
    value: float
    lambda_hat: float
    n_rays: int
    n_samples: int
    seed: int
    ray_sups: np.ndarray = field(repr=False)

    def running_min(self) -> np.ndarray:
        """Estimate after the first ``k`` rays, for ``k = 1..n_rays``."""
        return np.minimum.accumulate(self.ray_sups)


def random_direction(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(n)
    g -= g.mean()
    return g / np.linalg.norm(g)


def chi_estimate(t: Triangulation, r_hat, n_rays: int = 100, n_samples: int = 200,
                 seed: int = 0) -> ChiEstimate:
    """Estimate the energy gap at a constant-curvature packing ``r_hat``.

    Directions are drawn one at a time from a seeded generator, so runs
    with more rays extend those with fewer and the estimate can only go
    down as ``n_rays`` grows.
    """
    r_hat = as_packing(t, r_hat)
    if n_rays < 1:
        raise ValueError("n_rays must be positive")
    rng = np.random.default_rng(seed)
    sups = np.empty(n_rays)
    for k in range(n_rays):
        sups[k] = ray_profile(t, r_hat, random_direction(t.num_vertices, rng), n_samples)[0]
    return ChiEstimate(
        value=float(sups.min()), lambda_hat=extended_curvature(t, r_hat).lam,
        n_rays=n_rays, n_samples=n_samples, seed=seed, ray_sups=sups,
    )

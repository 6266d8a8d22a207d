"""Conservation laws, the phi = g/h calculus and commuting flows.

Everything here verifies user-supplied objects against the defining
equations; only the flux of a density is ever reconstructed (by quadrature).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import paths
from .expr import Expr, Grid, differentiate, parse
from .hydro import DiagonalSystem, EigenFrame, GeneralSystem, check_hyperbolicity, eval_on
from .report import (
    TOL_FD,
    TOL_SYMBOLIC,
    CollisionError,
    CompatibilityError,
    Residual,
    grid_points,
    mixed_error,
    sample_points,
    summarize,
    vacuous,
)

PHI_GAP = 1e-8
MU_GAP = 1e-10


@dataclass(frozen=True, eq=False)
class ConservationLaw:
    """Density ``h`` and flux ``g`` of ``h_t = g_x``."""

    h: Expr
    g: Expr
    name: str | None = None

    @classmethod
    def parse(cls, h: str, g: str, coords: Sequence[str], name: str | None = None) -> ConservationLaw:
        return cls(parse(h, coords), parse(g, coords), name)

    @property
    def phi(self) -> Expr:
        return self.g / self.h

    def shifted(self, c: float) -> ConservationLaw:
        return ConservationLaw(self.h, self.g + c, self.name)


@dataclass(frozen=True, eq=False)
class CommutingFlow:
    """A commuting flow.

    For diagonal systems give the velocities ``mu``; for general systems give
    either ``mu`` (ordered like the ascending characteristic velocities) or
    the flux vector ``flux`` of ``u_tau = q(u)_x``.  ``q`` maps density names
    to the flow's flux of that density (``d_i q = mu^i d_i u``).
    """

    mu: tuple[Expr, ...] | None = None
    q: Mapping[str, Expr] = field(default_factory=dict)
    flux: tuple[Expr, ...] | None = None
    name: str | None = None

    @classmethod
    def parse(
        cls,
        mu: Sequence[str] | None,
        coords: Sequence[str],
        q: Mapping[str, str] | None = None,
        flux: Sequence[str] | None = None,
        name: str | None = None,
    ) -> CommutingFlow:
        return cls(
            None if mu is None else tuple(parse(s, coords) for s in mu),
            {k: parse(v, coords) for k, v in (q or {}).items()},
            None if flux is None else tuple(parse(s, coords) for s in flux),
            name,
        )


# ---------------------------------------------------------------------------
# uniform access to L_i, lambda and c for both kinds of system


class _Diagonal:
    def __init__(self, sys: DiagonalSystem, where):
        check_hyperbolicity(sys, where)
        self.sys = sys
        self.n = sys.n
        self.coords, self.points = sample_points(where)
        self.lam = self.stack(sys.lam)
        self.c = None

    def ev(self, e: Expr) -> np.ndarray:
        return eval_on(e, self.coords, self.points)

    def stack(self, exprs) -> np.ndarray:
        return np.stack([self.ev(e) for e in exprs], axis=-1)

    def L(self, e: Expr) -> np.ndarray:
        return self.stack([differentiate(e, i) for i in range(self.n)])

    def LL(self, e: Expr) -> np.ndarray:
        n = self.n
        out = np.empty(self.points.shape[:-1] + (n, n))
        for i in range(n):
            di = differentiate(e, i)
            for j in range(n):
                out[..., i, j] = self.ev(differentiate(di, j))
        return out

    def L_lam(self) -> np.ndarray:
        n = self.n
        out = np.empty(self.points.shape[:-1] + (n, n))
        for j in range(n):
            for i in range(n):
                out[..., j, i] = self.ev(differentiate(self.sys.lam[i], j))
        return out


class _Frame:
    def __init__(self, frame: EigenFrame):
        self.frame = frame
        self.n = frame.n
        self.points = frame.points
        self.coords = frame.coords()
        self.lam = frame.lam
        self.c = frame.c

    def ev(self, e: Expr) -> np.ndarray:
        return eval_on(e, self.coords, self.points)

    def stack(self, exprs) -> np.ndarray:
        return np.stack([self.ev(e) for e in exprs], axis=-1)

    def _grad(self, e: Expr) -> np.ndarray:
        return self.stack([differentiate(e, k) for k in range(self.n)])

    def L(self, e: Expr) -> np.ndarray:
        return self.frame.L(self._grad(e))

    def LL(self, e: Expr) -> np.ndarray:
        n = self.n
        hess = np.empty(self.points.shape[:-1] + (n, n))
        for k in range(n):
            dk = differentiate(e, k)
            for s in range(n):
                hess[..., k, s] = self.ev(differentiate(dk, s))
        return self.frame.LL(self._grad(e), hess)

    def L_lam(self) -> np.ndarray:
        return self.frame.L_lam()


def _calculus(sys, grid: Grid | None, frame: EigenFrame | None):
    if isinstance(sys, DiagonalSystem):
        if grid is None:
            raise ValueError("diagonal checks need a grid or sample points")
        return _Diagonal(sys, grid)
    if frame is None:
        raise ValueError("general systems need an eigen frame")
    return _Frame(frame)


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(n) if i != j]


# ---------------------------------------------------------------------------
# conservation laws


@dataclass
class LawReport:
    first: Residual
    second: Residual

    @property
    def passed(self) -> bool:
        return self.first.passed and self.second.passed

    def residuals(self) -> list[Residual]:
        return [self.first, self.second]


def _law_residuals(calc, law: ConservationLaw, tol: float, name: str) -> LawReport:
    n = calc.n
    lam = calc.lam
    Lh = calc.L(law.h)
    Lg = calc.L(law.g)
    first = summarize(f"{name}: first order", np.moveaxis(mixed_error(Lg, lam * Lh), -1, 0), calc.points, tol)
    if n < 2:
        return LawReport(first, vacuous(f"{name}: second order", tol, "n = 1"))
    LLh = calc.LL(law.h)
    Llam = calc.L_lam()
    errs = []
    for i, j in _pairs(n):
        rhs = (
            Llam[..., j, i] / (lam[..., j] - lam[..., i]) * Lh[..., i]
            + Llam[..., i, j] / (lam[..., i] - lam[..., j]) * Lh[..., j]
        )
        if calc.c is not None:
            for k in range(n):
                rhs = rhs + calc.c[..., k, i, j] * (lam[..., i] - lam[..., k]) / (lam[..., i] - lam[..., j]) * Lh[..., k]
        errs.append(mixed_error(LLh[..., i, j], rhs))
    second = summarize(f"{name}: second order", np.stack(errs), calc.points, tol)
    return LawReport(first, second)


def verify_law_diagonal(
    sys: DiagonalSystem, law: ConservationLaw, grid: Grid, tol: float = TOL_SYMBOLIC
) -> LawReport:
    """First-order ``d_i g = lam^i d_i h`` and second-order ``d_i d_j h = a_ij d_i h + a_ji d_j h``."""
    return _law_residuals(_Diagonal(sys, grid), law, tol, law.name or "law")


def verify_law_general(
    sys: GeneralSystem, frame: EigenFrame, law: ConservationLaw, tol: float = TOL_FD
) -> LawReport:
    """``L_i g = lam^i L_i h`` and the second-order system for ``h`` in ``frame``."""
    return _law_residuals(_Frame(frame), law, tol, law.name or "law")


@dataclass
class PhiReport:
    log_h: Residual
    phi_system: Residual

    @property
    def passed(self) -> bool:
        return self.log_h.passed and self.phi_system.passed


def verify_phi(
    sys,
    law: ConservationLaw,
    grid: Grid | None = None,
    frame: EigenFrame | None = None,
    tol: float = TOL_SYMBOLIC,
) -> PhiReport:
    """Check ``L_i ln h = L_i phi / (lam^i - phi)`` and the nonlinear system for phi."""
    calc = _calculus(sys, grid, frame)
    n = calc.n
    h = calc.ev(law.h)
    if np.any(h == 0):
        raise CollisionError("density vanishes", calc.points[h == 0])
    phi_e = law.phi
    phi = calc.ev(phi_e)[..., None]
    lam = calc.lam
    close = np.abs(phi - lam) < PHI_GAP
    if np.any(close):
        raise CollisionError("phi meets a characteristic velocity (focal regime)", calc.points[np.any(close, axis=-1)])
    name = law.name or "law"
    Lh = calc.L(law.h)
    Lphi = calc.L(phi_e)
    first = summarize(
        f"{name}: ln h vs phi",
        np.moveaxis(mixed_error(Lh / h[..., None], Lphi / (lam - phi)), -1, 0),
        calc.points,
        tol,
    )
    if n < 2:
        return PhiReport(first, vacuous(f"{name}: phi system", tol, "n = 1"))
    phi = phi[..., 0]
    LL = calc.LL(phi_e)
    Llam = calc.L_lam()
    errs = []
    for i, j in _pairs(n):
        li, lj = lam[..., i], lam[..., j]
        rhs = (
            (1 / (phi - li) + 1 / (phi - lj)) * Lphi[..., i] * Lphi[..., j]
            + Llam[..., j, i] / (lj - li) * (phi - lj) / (phi - li) * Lphi[..., i]
            + Llam[..., i, j] / (li - lj) * (phi - li) / (phi - lj) * Lphi[..., j]
        )
        if calc.c is not None:
            for k in range(n):
                lk = lam[..., k]
                rhs = rhs + calc.c[..., k, i, j] * (li - lk) / (li - lj) * (phi - lj) / (phi - lk) * Lphi[..., k]
        errs.append(mixed_error(LL[..., i, j], rhs))
    return PhiReport(first, summarize(f"{name}: phi system", np.stack(errs), calc.points, tol))


# ---------------------------------------------------------------------------
# commuting flows


@dataclass
class CommutingReport:
    comm1: Residual
    comm2: Residual
    shared_frame: Residual | None = None

    @property
    def passed(self) -> bool:
        ok = self.comm1.passed and self.comm2.passed
        return ok and (self.shared_frame is None or self.shared_frame.passed)

    def residuals(self) -> list[Residual]:
        out = [self.comm1, self.comm2]
        if self.shared_frame is not None:
            out.append(self.shared_frame)
        return out


def flow_velocities(sys, flow: CommutingFlow, grid: Grid | None = None, frame: EigenFrame | None = None):
    """``(mu[P, i], Lmu[P, j, i] = L_j mu^i, offdiag or None)`` on the working points."""
    calc = _calculus(sys, grid, frame)
    return _flow_data(calc, flow)


def _flow_data(calc, flow: CommutingFlow):
    n = calc.n
    if flow.mu is not None:
        mu = calc.stack(flow.mu)
        Lmu = np.stack([calc.L(m) for m in flow.mu], axis=-1)  # [P, j, i]
        return mu, Lmu, None
    if flow.flux is None or not isinstance(calc, _Frame):
        raise ValueError("flow needs velocities mu (or a flux vector for general systems)")
    wsys = GeneralSystem.from_flux(flow.flux, calc.frame.system.coords)
    mu, dmu, offdiag = calc.frame.flow_velocities(wsys.matrix_at)
    Lmu = np.einsum("...kj,...ki->...ji", calc.frame.xi, dmu)
    return mu, Lmu, offdiag


def verify_commuting(
    sys,
    flow: CommutingFlow,
    grid: Grid | None = None,
    frame: EigenFrame | None = None,
    tol: float | None = None,
    max_collision_fraction: float = 0.01,
) -> CommutingReport:
    calc = _calculus(sys, grid, frame)
    if tol is None:
        tol = TOL_SYMBOLIC if isinstance(calc, _Diagonal) else TOL_FD
    n = calc.n
    lam = calc.lam
    mu, Lmu, offdiag = _flow_data(calc, flow)
    Llam = calc.L_lam()
    name = flow.name or "flow"

    collide = np.zeros(calc.points.shape[:-1], dtype=bool)
    for i, j in itertools.combinations(range(n), 2):
        collide |= np.abs(mu[..., i] - mu[..., j]) < MU_GAP
    if collide.mean() > max_collision_fraction:
        raise CollisionError(
            f"{name}: velocities mu collide on {collide.mean():.0%} of points", calc.points[collide]
        )
    with np.errstate(all="ignore"):
        errs = []
        for i, j in _pairs(n):
            lhs = Lmu[..., j, i] / (mu[..., j] - mu[..., i])
            rhs = Llam[..., j, i] / (lam[..., j] - lam[..., i])
            errs.append(mixed_error(lhs, rhs))
    comm1 = summarize(f"{name}: comm1", np.stack(errs), calc.points, tol, skip=collide)

    triples = list(itertools.permutations(range(n), 3))
    if calc.c is None or not triples:
        comm2 = vacuous(f"{name}: comm2", tol, "no c^k_ij with distinct indices")
    else:
        with np.errstate(all="ignore"):
            vals = []
            for i, j, k in triples:
                mi, mj, mk = mu[..., i], mu[..., j], mu[..., k]
                li, lj, lk = lam[..., i], lam[..., j], lam[..., k]
                v = calc.c[..., k, i, j] * ((mi - mk) / (mi - mj) - (li - lk) / (li - lj))
                vals.append(mixed_error(v, 0.0))
        comm2 = summarize(f"{name}: comm2", np.stack(vals), calc.points, tol, skip=collide)
    shared = None
    if offdiag is not None:
        shared = summarize(f"{name}: shared eigenframe", offdiag, calc.points, tol)
    return CommutingReport(comm1, comm2, shared)


def affine_fit(lam: np.ndarray, mu: np.ndarray) -> tuple[float, float, float]:
    """Least-squares fit ``mu = b*lam - a`` with global constants.

    Returns ``(a, b, residual)`` with the residual in the mixed metric.
    """
    x = np.asarray(lam, dtype=float).ravel()
    y = np.asarray(mu, dtype=float).ravel()
    design = np.stack([x, -np.ones_like(x)], axis=1)
    (b, a), *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(a), float(b), float(np.max(mixed_error(y, b * x - a)))


# ---------------------------------------------------------------------------
# flux reconstruction


@dataclass
class FluxField:
    grid: Grid
    base: tuple[float, ...]
    values: np.ndarray
    loop_residual: float


def flux_from_density(
    sys: DiagonalSystem,
    h: Expr,
    base: Sequence[float],
    grid: Grid,
    tol: float = TOL_SYMBOLIC,
) -> FluxField:
    """Integrate ``dg = sum_i lam^i d_i h dR^i`` from ``base`` with ``g(base) = 0``.

    Works for any set of velocities, so the flux ``q`` of a commuting flow is
    obtained by passing ``DiagonalSystem(mu, coords)``.
    """
    n = sys.n
    law = ConservationLaw(h, h, "density")
    if n >= 2:
        second = _law_residuals(_Diagonal(sys, grid), law, tol, "density").second
        if not second.passed:
            raise CompatibilityError(
                f"density violates the second-order system (residual {second.max:.3e})",
                [second.argmax] if second.argmax else [],
            )
    dh = [differentiate(h, k) for k in range(n)]
    integrand = [sys.lam[k] * dh[k] for k in range(n)]

    def form(k, p):
        return eval_on(integrand[k], tuple(p[..., m] for m in range(n)), p)

    _, pts = grid_points(grid)
    values = paths.staircase_integral(form, base, pts, list(range(n)), [m - 1 for m in grid.points])
    planes = list(itertools.combinations(range(n), 2))
    loop = paths.loop_residuals(form, grid, planes) if planes else 0.0
    scale = max(float(np.max(np.abs(form(k, pts)))) for k in range(n))
    limit = 1e-6 * grid.diameter * max(scale, 1e-300)
    if loop > limit:
        raise CompatibilityError(f"flux is path dependent (loop residual {loop:.3e} > {limit:.3e})")
    return FluxField(grid, tuple(float(b) for b in base), values, loop)

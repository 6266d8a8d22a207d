"""Line congruences ``y^s = u^s y^0 - f^s`` and the surfaces built from them.

Points in the ambient space are ordered ``(y^0, y^1, ..., y^n)``.  Surface
meshes are sampled on a parameter grid; second derivatives of meshes are
taken by central differences on that grid, first derivatives symbolically
unless stated otherwise.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .claws import CommutingFlow, ConservationLaw
from .expr import ONE, Expr, Grid, differentiate
from .hydro import DiagonalSystem, EigenFrame, eval_on
from .report import (
    TOL_SYMBOLIC,
    CollisionError,
    DegenerateError,
    FrameError,
    Residual,
    SingularityError,
    grid_points,
    mixed_error,
    sample_points,
    summarize,
    vacuous,
)
from .transforms import MissingFluxError, adjoint_levy, levy

FOCAL_GAP = 1e-8
RANK_REL = 1e-8


@dataclass(frozen=True, eq=False)
class Congruence:
    """n-parameter family of lines given by a conservative representation.

    ``names`` label the densities so that commuting flows can supply fluxes.
    """

    u: tuple[Expr, ...]
    f: tuple[Expr, ...]
    coords: tuple[str, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.u) != len(self.f):
            raise ValueError("need one flux per density")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"u{s + 1}" for s in range(len(self.u))))

    @classmethod
    def from_laws(cls, laws: Sequence[ConservationLaw], coords: Sequence[str]) -> Congruence:
        names = tuple(l.name or f"u{s + 1}" for s, l in enumerate(laws))
        return cls(tuple(l.h for l in laws), tuple(l.g for l in laws), tuple(coords), names)

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def ambient(self) -> int:
        return self.n + 1

    def laws(self) -> list[ConservationLaw]:
        return [ConservationLaw(u, f, name) for u, f, name in zip(self.u, self.f, self.names)]

    def fluxes_of(self, flow: CommutingFlow) -> tuple[Expr, ...]:
        missing = [k for k in self.names if k not in flow.q]
        if missing:
            raise MissingFluxError(f"flow carries no flux q for densities {missing}")
        return tuple(flow.q[k] for k in self.names)

    def point_at(self, y0: Expr) -> tuple[Expr, ...]:
        """Symbolic point of the line with first coordinate ``y0``."""
        return (y0,) + tuple(u * y0 - f for u, f in zip(self.u, self.f))


@dataclass
class LineSample:
    point: np.ndarray
    direction: np.ndarray


@dataclass
class Surface:
    """Points sampled on a parameter grid.

    ``points`` has shape ``(*grid.shape, d)`` or ``(sheets, *grid.shape, d)``.
    """

    params: np.ndarray
    points: np.ndarray
    sheets: int | None = None
    reports: list[Residual] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _ev_all(exprs: Sequence[Expr], coords, pts) -> np.ndarray:
    return np.stack([eval_on(e, coords, pts) for e in exprs], axis=-1)


def _velocities(source, where) -> tuple[tuple, np.ndarray, np.ndarray]:
    if isinstance(source, EigenFrame):
        return source.coords(), source.points, source.lam
    coords, pts = sample_points(where)
    return coords, pts, _ev_all(source.lam, coords, pts)


def _line_angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between the lines spanned by ``a`` and ``b`` (last axis), in ``[0, pi/2]``."""
    an = a / np.linalg.norm(a, axis=-1, keepdims=True)
    bn = b / np.linalg.norm(b, axis=-1, keepdims=True)
    d = np.minimum(np.linalg.norm(an - bn, axis=-1), np.linalg.norm(an + bn, axis=-1))
    return 2 * np.arcsin(np.clip(d / 2, 0, 1))


def _angle_to_span(v: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle between ``v[..., d]`` and span of ``basis[..., k, d]``; plus relative rank margin."""
    q, r = np.linalg.qr(np.swapaxes(basis, -1, -2))
    sv = np.linalg.svd(basis, compute_uv=False)
    margin = sv[..., -1] / np.maximum(sv[..., 0], 1e-300)
    proj = np.einsum("...dk,...k->...d", q, np.einsum("...dk,...d->...k", q, v))
    perp = np.linalg.norm(v - proj, axis=-1)
    return np.arcsin(np.clip(perp / np.linalg.norm(v, axis=-1), 0, 1)), margin


# ---------------------------------------------------------------------------
# lines and focal points


def line_at(c: Congruence, R: Sequence[float]) -> LineSample:
    coords, pts = sample_points(np.asarray(R, dtype=float)[None, :])
    u = _ev_all(c.u, coords, pts)[0]
    f = _ev_all(c.f, coords, pts)[0]
    return LineSample(np.concatenate([[0.0], -f]), np.concatenate([[1.0], u]))


def on_line_residual(c: Congruence, points: np.ndarray, where) -> np.ndarray:
    """``|y^s - (u^s y^0 - f^s)|`` (mixed metric) for ambient points sampled at ``where``."""
    coords, pts = sample_points(where)
    u = _ev_all(c.u, coords, pts)
    f = _ev_all(c.f, coords, pts)
    y0 = points[..., :1]
    return np.max(mixed_error(points[..., 1:], u * y0 - f), axis=-1)


@dataclass
class FocalSet:
    params: np.ndarray
    points: np.ndarray  # (*P, n, n+1): sheet i is the i-th focal point
    on_line: Residual
    tangency: list[Residual] = field(default_factory=list)
    degenerate: list[int] = field(default_factory=list)


def focal_points(
    c: Congruence,
    source: DiagonalSystem | EigenFrame,
    where=None,
    tangency: bool = True,
    step: float = 1e-5,
) -> FocalSet:
    """Focal points ``r_i = (lam^i, u lam^i - f)``.

    With ``tangency`` each sheet's tangent space (central differences with
    ``step``) is tested for containing the line direction; sheets whose
    tangent frame is rank deficient are listed in ``degenerate`` instead.
    """
    coords, pts, lam = _velocities(source, where)
    u = _ev_all(c.u, coords, pts)
    f = _ev_all(c.f, coords, pts)
    n = c.n
    sheets = np.concatenate([lam[..., :, None], u[..., None, :] * lam[..., :, None] - f[..., None, :]], axis=-1)
    err = np.stack([on_line_residual(c, sheets[..., i, :], (coords, pts)[1]) for i in range(n)])
    out = FocalSet(pts, sheets, summarize("focal points on line", err, pts, 1e-12))
    if not tangency:
        return out
    if isinstance(source, EigenFrame):
        lam_fn = None
    else:
        lam_fn = source.lam
    if lam_fn is None:
        out.tangency.append(vacuous("focal tangency", 1e-5, "needs symbolic velocities"))
        return out
    direction = np.concatenate([np.ones(pts.shape[:-1] + (1,)), u], axis=-1)
    for i in range(n):
        r_i = c.point_at(lam_fn[i])
        tangents = []
        for k in range(n):
            hi = pts.copy()
            lo = pts.copy()
            hi[..., k] += step
            lo[..., k] -= step
            ch, _ = sample_points(hi)
            cl, _ = sample_points(lo)
            tangents.append((_ev_all(r_i, ch, hi) - _ev_all(r_i, cl, lo)) / (2 * step))
        basis = np.stack(tangents, axis=-2)
        angle, margin = _angle_to_span(direction, basis)
        if np.min(margin) < RANK_REL:
            out.degenerate.append(i)
            out.tangency.append(vacuous(f"focal sheet {i + 1} tangency", 1e-5, "rank-deficient focal sheet"))
        else:
            out.tangency.append(summarize(f"focal sheet {i + 1} tangency", angle, pts, 1e-5))
    return out


# ---------------------------------------------------------------------------
# conjugate hypersurfaces


def _grid_derivatives(points: np.ndarray, spacing: Sequence[float]):
    """Central first derivatives and mixed second derivatives on the interior of a grid."""
    n = len(spacing)
    inner = tuple(slice(1, -1) for _ in range(n))

    def shifted(offsets):
        return points[tuple(slice(1 + o, points.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    first = []
    for k in range(n):
        e = [0] * n
        e[k] = 1
        first.append((shifted(e) - shifted([-x for x in e])) / (2 * spacing[k]))
    mixed = {}
    for i, j in itertools.combinations(range(n), 2):
        def off(si, sj):
            o = [0] * n
            o[i], o[j] = si, sj
            return shifted(o)

        mixed[i, j] = (off(1, 1) - off(1, -1) - off(-1, 1) + off(-1, -1)) / (4 * spacing[i] * spacing[j])
    return first, mixed, inner


def conjugacy_residual(points: np.ndarray, grid: Grid, name: str = "conjugacy", tol: float = 1e-4) -> Residual:
    """Transverse part of the mixed derivatives relative to the tangent space, over ``|d_i d_j r|``."""
    first, mixed, inner = _grid_derivatives(points, grid.spacing)
    _, pts = grid_points(grid)
    pts = pts[inner]
    if not mixed:
        return vacuous(name, tol, "one-parameter family")
    basis = np.stack(first, axis=-2)
    sv = np.linalg.svd(basis, compute_uv=False)
    margin = sv[..., -1] / np.maximum(sv[..., 0], 1e-300)
    if np.any(margin < RANK_REL):
        raise FrameError("tangent frame is rank deficient", pts[margin < RANK_REL])
    q, _ = np.linalg.qr(np.swapaxes(basis, -1, -2))
    errs = []
    for m in mixed.values():
        proj = np.einsum("...dk,...k->...d", q, np.einsum("...dk,...d->...k", q, m))
        size = np.linalg.norm(m, axis=-1)
        scale = np.maximum(size, 1e-12 * np.max(np.abs(points)))
        errs.append(np.linalg.norm(m - proj, axis=-1) / scale)
    return summarize(name, np.stack(errs), pts, tol)


def conjugate_point(c: Congruence, law: ConservationLaw) -> tuple[Expr, ...]:
    return c.point_at(law.phi)


def conjugate_hypersurface(
    c: Congruence,
    law: ConservationLaw,
    grid: Grid,
    source: DiagonalSystem | None = None,
    tol: float = 1e-4,
) -> Surface:
    """Mesh of ``r = (phi, u phi - f)`` with ``phi = g/h`` and its conjugacy report."""
    coords, pts = grid_points(grid)
    phi = eval_on(law.phi, coords, pts)
    if source is not None:
        lam = _ev_all(source.lam, coords, pts)
        close = np.abs(phi[..., None] - lam) < FOCAL_GAP
        if np.any(close):
            raise CollisionError("phi meets a characteristic velocity", pts[np.any(close, axis=-1)])
    mesh = _ev_all(conjugate_point(c, law), coords, pts)
    rep = conjugacy_residual(mesh, grid, "conjugacy", tol)
    on_line = summarize("conjugate points on line", on_line_residual(c, mesh, grid), pts, 1e-12)
    return Surface(pts, mesh, reports=[rep, on_line])


def parallel_family_check(
    c: Congruence,
    law: ConservationLaw,
    shifts: Sequence[float],
    where,
    tol: float = 1e-6,
) -> Residual:
    """Max angle between ``d_i r_c`` and ``d_i r_c'`` over the conjugate surfaces of ``(h, g + c)``."""
    name = "parallel family"
    if len(shifts) < 2:
        return vacuous(name, tol, "fewer than two shifts")
    coords, pts = sample_points(where)
    tangents = []
    for s in shifts:
        r = conjugate_point(c, law.shifted(s))
        tangents.append([_ev_all([differentiate(x, i) for x in r], coords, pts) for i in range(c.n)])
    # a tangent vanishes where a shifted phi meets a velocity; no direction there
    skip = np.zeros(pts.shape[:-1], dtype=bool)
    for per_shift in tangents:
        for t in per_shift:
            size = np.linalg.norm(t, axis=-1)
            skip |= size < 1e-12 * max(float(size.max()), 1e-300)
    errs = []
    with np.errstate(all="ignore"):
        for a, b in itertools.combinations(range(len(shifts)), 2):
            for i in range(c.n):
                errs.append(_line_angle(tangents[a][i], tangents[b][i]))
    return summarize(name, np.stack(errs), pts, tol, skip=skip)


# ---------------------------------------------------------------------------
# harmonic surfaces (n = 2)


@dataclass
class HarmonicData:
    point: tuple[Expr, ...]
    characteristics: list[tuple[tuple[Expr, ...], tuple[Expr, ...]]]
    plane_normal: tuple[Expr, ...]


def harmonic_data(c: Congruence, source: DiagonalSystem, flow: CommutingFlow) -> HarmonicData:
    if c.n != 2:
        raise ValueError("harmonic surfaces need a two-parameter congruence")
    if flow.mu is None:
        raise ValueError("flow needs velocities mu")
    q = c.fluxes_of(flow)
    lam, mu = source.lam, flow.mu
    dmu = mu[0] - mu[1]
    y0 = (lam[1] * mu[0] - lam[0] * mu[1]) / dmu
    ratio = (lam[0] - lam[1]) / dmu
    point = (y0,) + tuple(y0 * u + ratio * qs - f for u, qs, f in zip(c.u, q, c.f))
    chars = []
    for k in range(2):
        U = tuple(u - qs / mu[k] for u, qs in zip(c.u, q))
        F = tuple(f - lam[k] * qs / mu[k] for f, qs in zip(c.f, q))
        chars.append((U, F))
    u1, u2 = c.u
    q1, q2 = q
    normal = (u2 * q1 - u1 * q2, q2, -q1)
    return HarmonicData(point, chars, normal)


def harmonic_surface(
    c: Congruence,
    source: DiagonalSystem,
    flow: CommutingFlow,
    grid: Grid,
    tol_exact: float = TOL_SYMBOLIC,
    tol_angle: float = 1e-5,
    tol_conjugacy: float = 1e-4,
) -> Surface:
    """Harmonic surface of a commuting flow plus incidence, envelope and characteristic reports."""
    data = harmonic_data(c, source, flow)
    coords, pts = grid_points(grid)
    mu = _ev_all(flow.mu, coords, pts)
    close = np.abs(mu[..., 0] - mu[..., 1]) < 1e-10 * np.maximum(1, np.abs(mu).max(axis=-1))
    if np.any(close):
        raise CollisionError("flow velocities collide", pts[close])
    mesh = _ev_all(data.point, coords, pts)
    tangents = np.stack(
        [_ev_all([differentiate(x, i) for x in data.point], coords, pts) for i in range(2)], axis=-2
    )
    normal = np.cross(tangents[..., 0, :], tangents[..., 1, :])
    size = np.linalg.norm(normal, axis=-1)
    scale = np.linalg.norm(tangents[..., 0, :], axis=-1) * np.linalg.norm(tangents[..., 1, :], axis=-1)
    bad = size < RANK_REL * np.maximum(scale, 1e-300)
    if np.any(bad):
        raise DegenerateError("harmonic mesh has a rank-deficient Jacobian", pts[bad])
    u = _ev_all(c.u, coords, pts)
    f = _ev_all(c.f, coords, pts)
    lam = _ev_all(source.lam, coords, pts)
    direction = np.concatenate([np.ones(pts.shape[:-1] + (1,)), u], axis=-1)
    incidence, _ = _angle_to_span(direction, tangents)
    # the line also has to pass through the affine tangent plane
    y0 = mesh[..., :1]
    offset = np.concatenate([y0, u * y0 - f], axis=-1) - mesh
    unit_n = normal / size[..., None]
    through = np.abs(np.sum(unit_n * offset, axis=-1)) / np.maximum(1.0, np.linalg.norm(offset, axis=-1))
    reports = [
        summarize("line direction in tangent plane", incidence, pts, tol_angle),
        summarize("line passes through tangent plane", through, pts, tol_exact),
    ]
    plane_n = _ev_all(data.plane_normal, coords, pts)
    reports.append(summarize("tangent plane equals plane of the family", _line_angle(normal, plane_n), pts, tol_angle))
    reports.append(conjugacy_residual(mesh, grid, "harmonic net conjugacy", tol_conjugacy))

    char_lines = []
    for k, (U, F) in enumerate(data.characteristics):
        Uv, Fv = _ev_all(U, coords, pts), _ev_all(F, coords, pts)
        char_lines.append((Uv, Fv))
        y0 = lam[..., k : k + 1]
        through = np.concatenate([y0, Uv * y0 - Fv], axis=-1)
        focal = np.concatenate([y0, u * y0 - f], axis=-1)
        err = np.max(mixed_error(through, focal), axis=-1)
        reports.append(summarize(f"characteristic {k + 1} through focal point {k + 1}", err, pts, 1e-10))
    (U1, F1), (U2, F2) = char_lines
    dU = U1 - U2
    y0 = np.sum(dU * (F1 - F2), axis=-1) / np.sum(dU * dU, axis=-1)
    meet = np.concatenate([y0[..., None], U1 * y0[..., None] - F1], axis=-1)
    reports.append(summarize("characteristics meet at harmonic point", np.max(mixed_error(meet, mesh), axis=-1), pts, tol_exact))
    return Surface(pts, mesh, reports=reports)


# ---------------------------------------------------------------------------
# transformed congruences


def _rank_flag(c: Congruence, where) -> bool:
    """True if some density vanishes identically or ``R -> (u, f)`` loses rank."""
    coords, pts = sample_points(where)
    for u, f in zip(c.u, c.f):
        uv = np.abs(eval_on(u, coords, pts))
        if uv.max() < 1e-12 * max(1.0, float(np.abs(eval_on(f, coords, pts)).max())):
            return True
    rows = []
    for e in c.u + c.f:
        rows.append(_ev_all([differentiate(e, k) for k in range(c.n)], coords, pts))
    jac = np.stack(rows, axis=-2)
    sv = np.linalg.svd(jac, compute_uv=False)
    return bool(np.any(sv[..., -1] < RANK_REL * np.maximum(sv[..., 0], 1e-300)))


def _velocity_match(c: Congruence, Lambda_at: np.ndarray, where, name: str, tol: float) -> Residual:
    """Compare ``d_i F / d_i U`` (best-conditioned density) with ``Lambda``."""
    coords, pts = sample_points(where)
    errs = []
    for i in range(c.n):
        best = np.zeros(pts.shape[:-1])
        ratio = np.full(pts.shape[:-1], np.nan)
        for U, F in zip(c.u, c.f):
            dU = eval_on(differentiate(U, i), coords, pts)
            dF = eval_on(differentiate(F, i), coords, pts)
            use = np.abs(dU) > best
            with np.errstate(all="ignore"):
                ratio = np.where(use, dF / dU, ratio)
            best = np.where(use, np.abs(dU), best)
        errs.append(mixed_error(ratio, Lambda_at[..., i]))
    return summarize(name, np.stack(errs), pts, tol)


@dataclass
class CongruenceResult:
    congruence: Congruence
    reports: list[Residual]
    degenerate: bool = False

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def levy_congruence(
    c: Congruence,
    law: ConservationLaw,
    alpha: int,
    where=None,
    source: DiagonalSystem | None = None,
    tol: float = 1e-8,
    tol_angle: float = 1e-8,
) -> CongruenceResult:
    """Congruence of tangents to the ``R^alpha``-lines of the conjugate hypersurface of ``law``."""
    h, g = law.h, law.g
    dh = differentiate(h, alpha)
    dg = differentiate(g, alpha)
    U = tuple(u - h / dh * differentiate(u, alpha) for u in c.u)
    F = tuple(f - g / dg * differentiate(f, alpha) for f in c.f)
    new = Congruence(U, F, c.coords, c.names)
    reports: list[Residual] = []
    degenerate = False
    if where is not None:
        coords, pts = sample_points(where)
        degenerate = _rank_flag(new, where)
        r = conjugate_point(c, law)
        tangent = _ev_all([differentiate(x, alpha) for x in r], coords, pts)
        direction = np.concatenate([np.ones(pts.shape[:-1] + (1,)), _ev_all(U, coords, pts)], axis=-1)
        reports.append(summarize("new line tangent to conjugate surface", _line_angle(tangent, direction), pts, tol_angle))
        reports.append(
            summarize("conjugate point on new line", on_line_residual(new, _ev_all(r, coords, pts), where), pts, tol)
        )
        if source is not None and not degenerate:
            T = levy(source, law, alpha, where)
            reports.append(_velocity_match(new, T.velocities_at(where), where, "velocities match levy", tol))
    return CongruenceResult(new, reports, degenerate)


def adjoint_plane_family(
    c: Congruence,
    flow: CommutingFlow,
    alpha: int,
    source: DiagonalSystem,
    where=None,
    tol: float = 1e-10,
    tol_velocity: float = 1e-8,
) -> CongruenceResult:
    """Characteristic congruence ``l_alpha`` of the plane family of a commuting flow."""
    q = c.fluxes_of(flow)
    mu_a = flow.mu[alpha]
    lam_a = source.lam[alpha]
    U = tuple(u - qs / mu_a for u, qs in zip(c.u, q))
    F = tuple(f - lam_a * qs / mu_a for f, qs in zip(c.f, q))
    new = Congruence(U, F, c.coords, c.names)
    reports: list[Residual] = []
    degenerate = False
    if where is None:
        return CongruenceResult(new, reports, degenerate)
    coords, pts = sample_points(where)
    degenerate = _rank_flag(new, where)
    lam = eval_on(lam_a, coords, pts)[..., None]
    u, f = _ev_all(c.u, coords, pts), _ev_all(c.f, coords, pts)
    Uv, Fv = _ev_all(U, coords, pts), _ev_all(F, coords, pts)
    focal = np.concatenate([lam, u * lam - f], axis=-1)
    meet = np.concatenate([lam, Uv * lam - Fv], axis=-1)
    reports.append(summarize("l_alpha meets focal hypersurface", np.max(mixed_error(meet, focal), axis=-1), pts, tol))

    # plane E_s = q^1 (y^s - u^s y0 + f^s) - q^s (y^1 - u^1 y0 + f^1) = 0, s >= 2
    qv = _ev_all(q, coords, pts)
    dq = _ev_all([differentiate(x, alpha) for x in q], coords, pts)
    du = _ev_all([differentiate(x, alpha) for x in c.u], coords, pts)
    df = _ev_all([differentiate(x, alpha) for x in c.f], coords, pts)
    inc, char = [], []
    for y0 in (0.0, 1.0):
        line_y = u * y0 - f
        new_y = Uv * y0 - Fv
        for s in range(1, c.n):
            def E(y, s=s, y0=y0):
                return qv[..., 0] * (y[..., s] - u[..., s] * y0 + f[..., s]) - qv[..., s] * (
                    y[..., 0] - u[..., 0] * y0 + f[..., 0]
                )

            def dE(y, s=s, y0=y0):
                return (
                    dq[..., 0] * (y[..., s] - u[..., s] * y0 + f[..., s])
                    + qv[..., 0] * (-du[..., s] * y0 + df[..., s])
                    - dq[..., s] * (y[..., 0] - u[..., 0] * y0 + f[..., 0])
                    - qv[..., s] * (-du[..., 0] * y0 + df[..., 0])
                )

            scale = np.abs(qv).max(axis=-1) * (1 + np.abs(u).max(axis=-1) + np.abs(f).max(axis=-1) + np.abs(new_y).max(axis=-1))
            inc.append(np.abs(E(line_y)) / np.maximum(scale, 1.0))
            inc.append(np.abs(E(new_y)) / np.maximum(scale, 1.0))
            char.append(np.abs(dE(new_y)) / np.maximum(scale, 1.0))
    if inc:
        reports.append(summarize("lines lie in the plane", np.stack(inc), pts, tol))
        reports.append(summarize("l_alpha is the characteristic", np.stack(char), pts, tol))
    else:
        reports.append(vacuous("lines lie in the plane", tol, "n = 1"))
    if not degenerate:
        try:
            T = adjoint_levy(source, flow, alpha, where)
        except SingularityError:
            degenerate = True
        else:
            reports.append(_velocity_match(new, T.velocities_at(where), where, "velocities match adjoint levy", tol_velocity))
    return CongruenceResult(new, reports, degenerate)


# ---------------------------------------------------------------------------
# export


def sample_congruence_points(exprs_per_sheet: Sequence[Sequence[Expr]], grid: Grid) -> Surface:
    coords, pts = grid_points(grid)
    sheets = [_ev_all(list(e), coords, pts) for e in exprs_per_sheet]
    if len(sheets) == 1:
        return Surface(pts, sheets[0])
    return Surface(pts, np.stack(sheets), sheets=len(sheets))


def export_mesh(surface: Surface, path: str | Path, fmt: str = "obj", coord_names: Sequence[str] | None = None) -> Path:
    """Write ``surface`` as OBJ (3D, quads from grid adjacency) or CSV."""
    path = Path(path)
    params = np.asarray(surface.params, dtype=float)
    sheets = surface.points if surface.sheets else surface.points[None]
    shape = params.shape[:-1]
    n = params.shape[-1]
    d = sheets.shape[-1]
    if fmt == "obj":
        if d != 3:
            raise ValueError(f"OBJ export needs 3 ambient coordinates, got {d}")
        if len(shape) != 2 or min(shape) < 2:
            raise ValueError("OBJ export needs a rectangular two-parameter grid of at least 2x2")
        out = io.StringIO()
        rows, cols = shape
        offset = 0
        for sheet in sheets:
            for p in sheet.reshape(-1, 3):
                out.write("v %.17g %.17g %.17g\n" % tuple(p))
        for s in range(len(sheets)):
            offset = s * rows * cols
            for a in range(rows - 1):
                for b in range(cols - 1):
                    i00 = offset + a * cols + b + 1
                    out.write(f"f {i00} {i00 + cols} {i00 + cols + 1} {i00 + 1}\n")
        path.write_text(out.getvalue(), encoding="utf-8", newline="\n")
        return path
    if fmt != "csv":
        raise ValueError(f"unknown mesh format {fmt!r}")
    names = list(coord_names) if coord_names else [f"R{k + 1}" for k in range(n)]
    header = names + [f"y{k}" for k in range(d)]
    multi = len(sheets) > 1
    if multi:
        header = ["sheet"] + header
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        flat_params = params.reshape(-1, n)
        for s, sheet in enumerate(sheets):
            for prm, p in zip(flat_params, sheet.reshape(-1, d)):
                row = ["%.17g" % x for x in prm] + ["%.17g" % x for x in p]
                w.writerow(([str(s + 1)] if multi else []) + row)
    return path

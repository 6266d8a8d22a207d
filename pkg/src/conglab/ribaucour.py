"""Surfaces in Euclidean 3-space, their shape operators and sphere congruences.

Conventions: the unit normal is ``n = orientation * (r_1 x r_2)/|r_1 x r_2|``,
the Weingarten matrix satisfies ``d_j n = w^i_j d_i r`` (so the outward unit
sphere has ``w = I``), and sphere centres are ``c = r - R n``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .claws import ConservationLaw, LawReport, verify_law_general
from .expr import Expr, Grid, const, differentiate, parse, sqrt
from .hydro import GeneralSystem, eigen_frame, eval_on
from .report import (
    TOL_FD,
    CollisionError,
    DegenerateError,
    Residual,
    grid_points,
    mixed_error,
    sample_points,
    summarize,
)

UMBILIC_GAP = 1e-6
RIBAUCOUR_ANGLE = 5e-3
BRANCH_ANGLE = 1e-6


class UmbilicError(CollisionError):
    """Principal curvatures coincide."""


class EnvelopeError(DegenerateError):
    """The sphere family has no (or no well-defined) second envelope sheet."""


Vec = tuple[Expr, Expr, Expr]


def _dot(a, b) -> Expr:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b) -> Vec:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _scale(s, a) -> Vec:
    return (s * a[0], s * a[1], s * a[2])


def _sub(a, b) -> Vec:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _add(a, b) -> Vec:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _d(v, k) -> Vec:
    return tuple(differentiate(x, k) for x in v)


def _ev(v, coords, pts) -> np.ndarray:
    return np.stack([eval_on(x, coords, pts) for x in v], axis=-1)


def _solve2(G, B):
    """Symbolic ``G^-1 B`` for 2x2 matrices given as nested tuples."""
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    inv = ((G[1][1] / det, -G[0][1] / det), (-G[1][0] / det, G[0][0] / det))
    cols = len(B[0])
    return tuple(tuple(inv[i][0] * B[0][j] + inv[i][1] * B[1][j] for j in range(cols)) for i in range(2))


@dataclass(frozen=True, eq=False)
class SurfaceImmersion:
    r: Vec
    coords: tuple[str, str]
    orientation: int = 1

    @classmethod
    def parse(cls, r: Sequence[str], coords: Sequence[str], orientation: int = 1) -> SurfaceImmersion:
        if len(r) != 3 or len(coords) != 2:
            raise ValueError("a surface needs three components in two parameters")
        return cls(tuple(parse(s, coords) for s in r), tuple(coords), orientation)

    def tangents(self) -> tuple[Vec, Vec]:
        return _d(self.r, 0), _d(self.r, 1)

    def normal(self) -> Vec:
        r1, r2 = self.tangents()
        cr = _cross(r1, r2)
        return _scale(const(self.orientation) / sqrt(_dot(cr, cr)), cr)

    def first_form(self):
        r1, r2 = self.tangents()
        return ((_dot(r1, r1), _dot(r1, r2)), (_dot(r2, r1), _dot(r2, r2)))

    def weingarten_exprs(self):
        """``w[i][j]`` with ``d_j n = sum_i w[i][j] d_i r``."""
        r = self.tangents()
        n = self.normal()
        dn = (_d(n, 0), _d(n, 1))
        B = tuple(tuple(_dot(r[k], dn[j]) for j in range(2)) for k in range(2))
        return _solve2(self.first_form(), B)

    def check_regular(self, where) -> None:
        coords, pts = sample_points(where)
        r1, r2 = (_ev(t, coords, pts) for t in self.tangents())
        size = np.linalg.norm(np.cross(r1, r2), axis=-1)
        scale = np.linalg.norm(r1, axis=-1) * np.linalg.norm(r2, axis=-1)
        bad = ~(size > 1e-10 * np.maximum(scale, 1e-300))
        if np.any(bad):
            raise DegenerateError("surface is not an immersion", pts[bad])


def weingarten(surface: SurfaceImmersion, where) -> np.ndarray:
    """Weingarten matrices ``w[..., i, j]`` at a point ``(u1, u2)`` or on a grid/point array."""
    if not isinstance(where, Grid):
        where = np.asarray(where, dtype=float)
    single = not isinstance(where, Grid) and where.ndim == 1
    if single:
        where = where[None, :]
    surface.check_regular(where)
    coords, pts = sample_points(where)
    W = surface.weingarten_exprs()
    out = np.stack([np.stack([eval_on(W[i][j], coords, pts) for j in range(2)], -1) for i in range(2)], -2)
    return out[0] if single else out


def principal_curvatures(w: np.ndarray) -> np.ndarray:
    """Eigenvalues of Weingarten matrices, ascending (real for genuine shape operators)."""
    ev = np.linalg.eigvals(w)
    return np.sort(ev.real, axis=-1)


def _check_umbilic(w: np.ndarray, pts: np.ndarray, what: str) -> np.ndarray:
    kappa = principal_curvatures(w)
    gap = np.abs(kappa[..., 1] - kappa[..., 0])
    bad = gap < UMBILIC_GAP * np.maximum(1.0, np.abs(kappa).max(axis=-1))
    if np.any(bad):
        raise UmbilicError(f"{what}: principal curvatures coincide (umbilic points)", pts[bad])
    return kappa


def induced_system(surface: SurfaceImmersion, where) -> GeneralSystem:
    """The system ``u_t = w u_x`` whose velocities are the principal curvatures."""
    w = weingarten(surface, where)
    _, pts = sample_points(where)
    _check_umbilic(w, pts, "induced system")
    return GeneralSystem.from_matrix(surface.weingarten_exprs(), surface.coords)


# ---------------------------------------------------------------------------
# sphere congruences


@dataclass(frozen=True, eq=False)
class SphereCongruence:
    base: SurfaceImmersion
    radius: Expr

    @classmethod
    def parse(cls, base: SurfaceImmersion, radius: str) -> SphereCongruence:
        return cls(base, parse(radius, base.coords))

    def centers(self) -> Vec:
        return _sub(self.base.r, _scale(self.radius, self.base.normal()))


def _envelope_roots(sc: SphereCongruence, coords, pts):
    """Both unit solutions ``m`` of ``<d_i c, m> = -d_i R`` (shape ``(2, *P, 3)``)."""
    c = sc.centers()
    J = np.stack([_ev(_d(c, k), coords, pts) for k in range(2)], axis=-2)
    b = -np.stack([eval_on(differentiate(sc.radius, k), coords, pts) for k in range(2)], axis=-1)
    gram = np.einsum("...id,...jd->...ij", J, J)
    k = np.cross(J[..., 0, :], J[..., 1, :])
    ksize = np.linalg.norm(k, axis=-1)
    scale = np.linalg.norm(J[..., 0, :], axis=-1) * np.linalg.norm(J[..., 1, :], axis=-1)
    bad = ~(ksize > 1e-10 * np.maximum(scale, 1e-300))
    if np.any(bad):
        raise EnvelopeError("sphere centres do not sweep a surface (degenerate envelope)", pts[bad])
    m0 = np.einsum("...ij,...id->...jd", np.linalg.inv(gram) @ b[..., None], J)[..., 0, :]
    rest = 1.0 - np.sum(m0 * m0, axis=-1)
    if np.any(rest < 0):
        raise EnvelopeError("sphere family has no real envelope", pts[rest < 0])
    t = np.sqrt(rest)[..., None] * k / ksize[..., None]
    return np.stack([m0 + t, m0 - t])


def _angle(a, b):
    cosv = np.sum(a * b, axis=-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.arccos(np.clip(cosv, -1, 1))


@dataclass
class SecondSheet:
    grid: Grid
    points: np.ndarray  # p~ on the grid
    normals: np.ndarray  # m~ on the grid
    centers: np.ndarray
    branch_switches: int = 0


def second_sheet(sc: SphereCongruence, grid: Grid, avoid: np.ndarray | None = None) -> SecondSheet:
    """Second envelope sheet ``p~ = c + R m~`` with the root away from ``avoid`` (default: the normal).

    The root is fixed at the grid centre by maximal angle from ``avoid`` and
    continued outward by nearest-neighbour matching.
    """
    coords, pts = grid_points(grid)
    R = eval_on(sc.radius, coords, pts)
    if np.all(np.abs(R) < 1e-12):
        raise EnvelopeError("radius vanishes identically (spheres degenerate to points)")
    n = _ev(sc.base.normal(), coords, pts) if avoid is None else avoid
    roots = _envelope_roots(sc, coords, pts)
    ang = np.stack([_angle(roots[0], n), _angle(roots[1], n)])
    both_close = np.all(ang < BRANCH_ANGLE, axis=0)
    if np.any(both_close):
        raise EnvelopeError("both envelope roots coincide with the first sheet", pts[both_close])
    preferred = np.argmax(ang, axis=0)

    shape = grid.shape
    choice = -np.ones(shape, dtype=int)
    start = grid.center_index
    choice[start] = preferred[start]
    queue = deque([start])
    while queue:
        idx = queue.popleft()
        ref = roots[choice[idx]][idx]
        for axis in range(len(shape)):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                nb = tuple(nb)
                if not 0 <= nb[axis] < shape[axis] or choice[nb] >= 0:
                    continue
                d0 = np.linalg.norm(roots[0][nb] - ref)
                d1 = np.linalg.norm(roots[1][nb] - ref)
                choice[nb] = 0 if d0 <= d1 else 1
                queue.append(nb)
    m = np.where((choice == 0)[..., None], roots[0], roots[1])
    switches = int(np.sum(choice != preferred))
    centers = _ev(sc.centers(), coords, pts)
    return SecondSheet(grid, centers + R[..., None] * m, m, centers, switches)


def second_sheet_surface(sc: SphereCongruence, grid: Grid) -> tuple[SurfaceImmersion, Vec]:
    """Symbolic second sheet, oriented so its normal is ``m~``; returns the surface and ``m~``."""
    c = sc.centers()
    c1, c2 = _d(c, 0), _d(c, 1)
    b1, b2 = -differentiate(sc.radius, 0), -differentiate(sc.radius, 1)
    G = ((_dot(c1, c1), _dot(c1, c2)), (_dot(c2, c1), _dot(c2, c2)))
    coef = _solve2(G, ((b1,), (b2,)))
    m0 = _add(_scale(coef[0][0], c1), _scale(coef[1][0], c2))
    k = _cross(c1, c2)
    t = sqrt(const(1.0) - _dot(m0, m0)) / sqrt(_dot(k, k))
    numeric = second_sheet(sc, grid)
    coords, pts = grid_points(grid)
    candidates = [_add(m0, _scale(t, k)), _sub(m0, _scale(t, k))]
    errs = [np.max(np.linalg.norm(_ev(m, coords, pts) - numeric.normals, axis=-1)) for m in candidates]
    best = int(np.argmin(errs))
    if errs[best] > 1e-8:
        raise EnvelopeError("second sheet switches branch on the grid")
    m = candidates[best]
    p = _add(c, _scale(sc.radius, m))
    surf = SurfaceImmersion(p, sc.base.coords, 1)
    t1, t2 = (_ev(x, coords, pts) for x in surf.tangents())
    side = np.sum(np.cross(t1, t2) * numeric.normals, axis=-1)
    flips = np.sign(side) != np.sign(side[grid.center_index])
    if np.any(flips):
        raise EnvelopeError("second sheet folds (its orientation flips)", pts[flips])
    if side[grid.center_index] < 0:
        surf = SurfaceImmersion(p, sc.base.coords, -1)
    return surf, m


# ---------------------------------------------------------------------------
# Ribaucour criteria


def _principal_directions(w: np.ndarray) -> np.ndarray:
    """Eigenvectors (columns) of real 2x2 matrices, ordered by ascending eigenvalue."""
    vals, vecs = np.linalg.eig(w)
    order = np.argsort(vals.real, axis=-1)
    vecs = np.take_along_axis(vecs.real, order[..., None, :], axis=-1)
    return vecs


def _line_angle(a, b):
    an = a / np.linalg.norm(a, axis=-1, keepdims=True)
    bn = b / np.linalg.norm(b, axis=-1, keepdims=True)
    d = np.minimum(np.linalg.norm(an - bn, axis=-1), np.linalg.norm(an + bn, axis=-1))
    return 2 * np.arcsin(np.clip(d / 2, 0, 1))


def _fd_weingarten(points: np.ndarray, normals: np.ndarray, spacing) -> np.ndarray:
    """Weingarten matrices from central differences of sampled points and normals (interior)."""
    h1, h2 = spacing

    def d(arr, axis, h):
        if axis == 0:
            return (arr[2:, 1:-1] - arr[:-2, 1:-1]) / (2 * h)
        return (arr[1:-1, 2:] - arr[1:-1, :-2]) / (2 * h)

    r = [d(points, 0, h1), d(points, 1, h2)]
    dn = [d(normals, 0, h1), d(normals, 1, h2)]
    G = np.stack([np.stack([np.sum(r[i] * r[j], -1) for j in range(2)], -1) for i in range(2)], -2)
    B = np.stack([np.stack([np.sum(r[k] * dn[j], -1) for j in range(2)], -1) for k in range(2)], -2)
    return np.linalg.solve(G, B)


@dataclass
class RibaucourReport:
    angle: Residual
    second_sheet: SecondSheet
    curvatures_first: np.ndarray = field(repr=False, default=None)
    curvatures_second: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.angle.passed


def ribaucour_check(sc: SphereCongruence, grid: Grid, tol: float = RIBAUCOUR_ANGLE) -> RibaucourReport:
    """Largest angle between the principal directions of the two envelope sheets."""
    coords, pts = grid_points(grid)
    w1 = weingarten(sc.base, grid)
    k1 = _check_umbilic(w1, pts, "first sheet")
    sheet = second_sheet(sc, grid)
    w2 = _fd_weingarten(sheet.points, sheet.normals, grid.spacing)
    inner = pts[1:-1, 1:-1]
    k2 = _check_umbilic(w2, inner, "second sheet")
    e = _principal_directions(w1[1:-1, 1:-1])
    f = _principal_directions(w2)
    same = np.maximum(_line_angle(e[..., 0], f[..., 0]), _line_angle(e[..., 1], f[..., 1]))
    swapped = np.maximum(_line_angle(e[..., 0], f[..., 1]), _line_angle(e[..., 1], f[..., 0]))
    angle = np.minimum(same, swapped)
    rep = summarize("principal directions correspond", angle, inner, tol)
    return RibaucourReport(rep, sheet, k1, k2)


@dataclass
class LawMatchReport:
    radius_match: Residual
    law: LawReport

    @property
    def passed(self) -> bool:
        return self.radius_match.passed and self.law.passed

    def residuals(self) -> list[Residual]:
        return [self.radius_match, *self.law.residuals()]


def ribaucour_theorem_check(
    sc: SphereCongruence, law: ConservationLaw, grid: Grid, tol: float = TOL_FD
) -> LawMatchReport:
    """Check ``R = h/g`` and that ``(h, g)`` is a law of the induced system."""
    coords, pts = grid_points(grid)
    g = eval_on(law.g, coords, pts)
    if np.any(g == 0):
        raise DegenerateError("flux of the law vanishes", pts[g == 0])
    R = eval_on(sc.radius, coords, pts)
    match = summarize("radius equals h/g", mixed_error(R, eval_on(law.h, coords, pts) / g), pts, tol)
    sys = induced_system(sc.base, grid)
    frame = eigen_frame(sys, grid)
    return LawMatchReport(match, verify_law_general(sys, frame, law, tol))

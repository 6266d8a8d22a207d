"""Hydrodynamic-type systems and the coefficient fields derived from them.

Two representations are supported:

* :class:`DiagonalSystem` -- Riemann-invariant form ``R^i_t = lam^i(R) R^i_x``
  with symbolic velocities;
* :class:`GeneralSystem` -- ``u_t = v(u) u_x`` given by a matrix of
  expressions (usually the Jacobian of a flux).  Its eigen-data are computed
  numerically in an :class:`EigenFrame`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import paths
from .expr import EvalError, Expr, Grid, differentiate, evaluate, parse
from .report import (
    TOL_SYMBOLIC,
    CompatibilityError,
    FrameError,
    HyperbolicityError,
    Residual,
    SingularityError,
    grid_points,
    sample_points,
    locate_eval_error,
    mixed_error,
    summarize,
    vacuous,
)

GAP = 1e-8


def eval_on(e: Expr, coords, points: np.ndarray) -> np.ndarray:
    """Evaluate ``e`` on coordinate arrays, turning singularities into located errors."""
    try:
        return np.asarray(evaluate(e, coords), dtype=float) * np.ones(points.shape[:-1])
    except EvalError as err:
        raise SingularityError(f"{err.kind} evaluating {e}", locate_eval_error(err, points)) from err


@dataclass(frozen=True, eq=False)
class DiagonalSystem:
    """Diagonal system with velocities ``lam[i]`` in coordinates ``coords``.

    ``lame`` optionally carries symbolic Lame coefficients ``h_i``.
    """

    lam: tuple[Expr, ...]
    coords: tuple[str, ...]
    lame: tuple[Expr, ...] | None = None
    _a: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(self.lam))
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(self.lam) != len(self.coords):
            raise ValueError("need one velocity per coordinate")
        if self.lame is not None:
            object.__setattr__(self, "lame", tuple(self.lame))
            if len(self.lame) != len(self.coords):
                raise ValueError("need one Lame coefficient per coordinate")

    @classmethod
    def parse(cls, lam: Sequence[str], coords: Sequence[str], lame: Sequence[str] | None = None):
        lam_e = [parse(s, coords) for s in lam]
        lame_e = None if lame is None else [parse(s, coords) for s in lame]
        return cls(tuple(lam_e), tuple(coords), None if lame_e is None else tuple(lame_e))

    @property
    def n(self) -> int:
        return len(self.lam)

    def a(self, i: int, j: int) -> Expr:
        """Rotation coefficient ``a_ij = d_j lam^i / (lam^j - lam^i)``."""
        if i == j:
            raise ValueError("a_ij is defined for i != j only")
        key = (i, j)
        if key not in self._a:
            self._a[key] = differentiate(self.lam[i], j) / (self.lam[j] - self.lam[i])
        return self._a[key]


@dataclass(frozen=True)
class RotationCoefficients:
    n: int
    table: dict[tuple[int, int], Expr]

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        return self.table[ij]


def check_hyperbolicity(sys: DiagonalSystem, where, gap: float = GAP) -> float:
    """Smallest pairwise velocity gap on a grid or point array; raises if below ``gap``."""
    coords, pts = sample_points(where)
    lam = [eval_on(e, coords, pts) for e in sys.lam]
    worst = np.inf
    for i, j in itertools.combinations(range(sys.n), 2):
        d = np.abs(lam[i] - lam[j])
        bad = d < gap
        if np.any(bad):
            raise HyperbolicityError(
                f"velocities {i + 1} and {j + 1} collide", pts[bad], pair=(i + 1, j + 1)
            )
        worst = min(worst, float(d.min()))
    return worst


def rotation_coefficients(sys: DiagonalSystem, grid: Grid | None = None, gap: float = GAP) -> RotationCoefficients:
    if grid is not None:
        check_hyperbolicity(sys, grid, gap)
    table = {(i, j): sys.a(i, j) for i in range(sys.n) for j in range(sys.n) if i != j}
    return RotationCoefficients(sys.n, table)


def semihamiltonian_residual(sys: DiagonalSystem, grid: Grid, tol: float = TOL_SYMBOLIC) -> Residual:
    """Residual of ``d_k a_ij = a_ik a_kj + a_ij a_jk - a_ij a_ik`` over distinct triples."""
    name = "semihamiltonian"
    if sys.n < 3:
        return vacuous(name, tol, "no distinct triples for n < 3")
    check_hyperbolicity(sys, grid)
    coords, pts = grid_points(grid)
    a = {}
    for i, j in itertools.permutations(range(sys.n), 2):
        a[i, j] = eval_on(sys.a(i, j), coords, pts)
    errs = []
    for i, j, k in itertools.permutations(range(sys.n), 3):
        lhs = eval_on(differentiate(sys.a(i, j), k), coords, pts)
        rhs = a[i, k] * a[k, j] + a[i, j] * a[j, k] - a[i, j] * a[i, k]
        errs.append(mixed_error(lhs, rhs))
    return summarize(name, np.stack(errs), pts, tol)


# ---------------------------------------------------------------------------
# general systems


@dataclass(frozen=True, eq=False)
class GeneralSystem:
    """``u_t = v(u) u_x`` with ``matrix[i][j] = v^i_j``; ``flux`` if conservative."""

    matrix: tuple[tuple[Expr, ...], ...]
    coords: tuple[str, ...]
    flux: tuple[Expr, ...] | None = None

    @classmethod
    def from_flux(cls, flux: Sequence[Expr | str], coords: Sequence[str]) -> GeneralSystem:
        f = tuple(parse(s, coords) if isinstance(s, str) else s for s in flux)
        n = len(coords)
        mat = tuple(tuple(differentiate(f[i], j) for j in range(n)) for i in range(n))
        return cls(mat, tuple(coords), f)

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[Expr | str]], coords: Sequence[str]) -> GeneralSystem:
        mat = tuple(tuple(parse(s, coords) if isinstance(s, str) else s for s in row) for row in matrix)
        return cls(mat, tuple(coords))

    @property
    def n(self) -> int:
        return len(self.coords)

    def matrix_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        coords = tuple(points[..., k] for k in range(self.n))
        out = np.empty(points.shape[:-1] + (self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                out[..., i, j] = eval_on(self.matrix[i][j], coords, points)
        return out


def _sorted_eig(v: np.ndarray, points: np.ndarray):
    w, vec = np.linalg.eig(v)
    scale = 1.0 + np.abs(w)
    if np.any(np.abs(w.imag) > 1e-10 * scale):
        bad = np.any(np.abs(w.imag) > 1e-10 * scale, axis=-1)
        raise FrameError("complex characteristic velocities", points[bad])
    w = w.real
    vec = vec.real
    order = np.argsort(w, axis=-1)
    w = np.take_along_axis(w, order, axis=-1)
    vec = np.take_along_axis(vec, order[..., None, :], axis=-1)
    gaps = np.diff(w, axis=-1)
    if gaps.size and np.any(gaps < GAP * (1.0 + np.abs(w[..., 1:]))):
        bad = np.any(gaps < GAP * (1.0 + np.abs(w[..., 1:])), axis=-1)
        raise FrameError("characteristic velocities collide", points[bad])
    return w, vec


def _normalize(vec: np.ndarray, ref: Sequence[int], points: np.ndarray) -> np.ndarray:
    n = vec.shape[-1]
    pivot = np.stack([vec[..., ref[i], i] for i in range(n)], axis=-1)
    size = np.linalg.norm(vec, axis=-2)
    if np.any(np.abs(pivot) < 1e-12 * size):
        bad = np.any(np.abs(pivot) < 1e-12 * size, axis=-1)
        raise FrameError("normalising component of an eigenvector vanishes", points[bad])
    return vec / pivot[..., None, :]


def frame_at(sys: GeneralSystem, points: np.ndarray, ref: Sequence[int]):
    """Sorted eigenvalues and normalised right eigenvectors (columns) at ``points``."""
    points = np.asarray(points, dtype=float)
    w, vec = _sorted_eig(sys.matrix_at(points), points)
    vec = _normalize(vec, ref, points)
    cond = np.linalg.cond(vec)
    if np.any(cond > 1e12):
        raise FrameError("ill-conditioned eigenvector frame", points[cond > 1e12])
    return w, vec


def central_difference(fn, points: np.ndarray, steps: Sequence[float], order: int = 2) -> np.ndarray:
    """Partial derivatives of ``fn`` (array-valued) at ``points`` by central differences.

    Returns an array with a new axis right after the point axes: ``(*P, k, ...)``.
    """
    n = points.shape[-1]
    if order == 2:
        stencil = ((1, 0.5), (-1, -0.5))
    elif order == 4:
        stencil = ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12))
    else:
        raise ValueError("finite-difference order must be 2 or 4")
    out = []
    for k in range(n):
        acc = None
        for shift, weight in stencil:
            p = points.copy()
            p[..., k] += shift * steps[k]
            term = weight * np.asarray(fn(p))
            acc = term if acc is None else acc + term
        out.append(acc / steps[k])
    return np.stack(out, axis=points.ndim - 1)


@dataclass
class EigenFrame:
    """Eigen-data of a general system sampled at a set of points.

    Array layouts (``P`` = point shape): ``lam[P, i]``; ``xi[P, s, i]`` is
    component ``s`` of eigenvector ``i``; ``dlam[P, k, i] = d_k lam^i``;
    ``dxi[P, k, s, i] = d_k xi_i^s``; ``c[P, k, i, j] = c^k_ij``.
    """

    system: GeneralSystem
    points: np.ndarray
    lam: np.ndarray
    xi: np.ndarray
    dlam: np.ndarray
    dxi: np.ndarray
    c: np.ndarray
    ref: tuple[int, ...]
    steps: tuple[float, ...]
    order: int

    @property
    def n(self) -> int:
        return self.lam.shape[-1]

    def coords(self):
        return tuple(self.points[..., k] for k in range(self.n))

    def L(self, grad: np.ndarray) -> np.ndarray:
        """``L_i h`` from the gradient ``grad[P, k] = d_k h``."""
        return np.einsum("...ki,...k->...i", self.xi, grad)

    def LL(self, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
        """``L_i L_j h`` as ``out[P, i, j]`` from gradient and Hessian of ``h``."""
        first = np.einsum("...ki,...ksj,...s->...ij", self.xi, self.dxi, grad)
        second = np.einsum("...ki,...sj,...ks->...ij", self.xi, self.xi, hess)
        return first + second

    def L_lam(self) -> np.ndarray:
        """``out[P, j, i] = L_j lam^i``."""
        return np.einsum("...kj,...ki->...ji", self.xi, self.dlam)

    def flow_velocities(self, flow_matrix_at) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Velocities ``mu^i`` of a second matrix in this frame.

        Returns ``(mu[P, i], dmu[P, k, i], offdiag[P])`` where ``offdiag`` is
        the relative size of the off-diagonal part of ``Xi^-1 W Xi`` (zero iff
        the two matrices share the eigenframe).
        """

        def project(pts):
            _, vec = frame_at(self.system, pts, self.ref)
            w = flow_matrix_at(pts)
            return np.linalg.solve(vec, w @ vec)

        m = project(self.points)
        mu = np.diagonal(m, axis1=-2, axis2=-1).copy()
        off = m - np.einsum("...i,ij->...ij", mu, np.eye(self.n))
        offdiag = np.linalg.norm(off, axis=(-2, -1)) / np.maximum(1.0, np.linalg.norm(m, axis=(-2, -1)))
        dmu = central_difference(
            lambda p: np.diagonal(project(p), axis1=-2, axis2=-1), self.points, self.steps, self.order
        )
        return mu, dmu, offdiag


def default_steps(grid: Grid) -> tuple[float, ...]:
    return tuple(1e-4 * (hi - lo) for lo, hi in zip(grid.mins, grid.maxs))


def eigen_frame(
    sys: GeneralSystem,
    grid: Grid | None = None,
    points: np.ndarray | None = None,
    order: int = 2,
    steps: Sequence[float] | None = None,
) -> EigenFrame:
    """Eigen-decomposition of ``v`` plus finite-difference frame derivatives.

    The normalising component of each eigenvector is chosen once, at the grid
    centre (or the first point), and frozen for every other evaluation.
    """
    if points is None:
        if grid is None:
            raise ValueError("need a grid or explicit points")
        _, points = grid_points(grid)
        center = np.array(grid.point(grid.center_index))
    else:
        points = np.asarray(points, dtype=float)
        center = points.reshape(-1, points.shape[-1])[0]
    if steps is None:
        if grid is None:
            raise ValueError("explicit points need explicit finite-difference steps")
        steps = default_steps(grid)
    steps = tuple(float(s) for s in steps)
    _, vec0 = _sorted_eig(sys.matrix_at(center[None, :]), center[None, :])
    ref = tuple(int(k) for k in np.argmax(np.abs(vec0[0]), axis=0))

    lam, xi = frame_at(sys, points, ref)
    dlam = central_difference(lambda p: frame_at(sys, p, ref)[0], points, steps, order)
    dxi = central_difference(lambda p: frame_at(sys, p, ref)[1], points, steps, order)
    t = np.einsum("...ki,...ksj->...sij", xi, dxi)
    bracket = t - np.swapaxes(t, -1, -2)
    c = np.einsum("...ks,...sij->...kij", np.linalg.inv(xi), bracket)
    return EigenFrame(sys, points, lam, xi, dlam, dxi, c, ref, steps, order)


@dataclass
class DiagonalizabilityReport:
    diagonalizable: bool
    max_c: float
    tol: float
    per_index: dict[int, float]
    argmax: tuple[float, ...] | None
    vacuous: bool

    def riemann_invariant_exists(self, i: int) -> bool:
        """Single-index criterion: ``c^i_jk = 0`` for all ``j, k != i``."""
        return self.per_index[i] <= self.tol


def diagonalizability_test(frame: EigenFrame, tol: float = 1e-6) -> DiagonalizabilityReport:
    n = frame.n
    triples = list(itertools.permutations(range(n), 3))
    per_index = {i: 0.0 for i in range(n)}
    if not triples:
        return DiagonalizabilityReport(True, 0.0, tol, per_index, None, True)
    vals = np.stack([np.abs(frame.c[..., k, i, j]) for k, i, j in triples])
    for i in range(n):
        sel = [m for m, (k, _, _) in enumerate(triples) if k == i]
        per_index[i] = float(vals[sel].max())
    per_point = vals.max(axis=0)
    flat = per_point.reshape(-1)
    idx = int(np.argmax(flat))
    pts = frame.points.reshape(-1, n)
    max_c = float(flat[idx])
    return DiagonalizabilityReport(max_c <= tol, max_c, tol, per_index, tuple(pts[idx]), False)


# ---------------------------------------------------------------------------
# Lame coefficients


@dataclass
class LameField:
    grid: Grid
    base: tuple[float, ...]
    values: np.ndarray  # (n, *grid.shape)
    loop_residual: float


def lame_from_rotation(
    rc: RotationCoefficients,
    base: Sequence[float],
    grid: Grid,
    tol: float = 1e-8,
) -> LameField:
    """Integrate ``d_j ln h_i = a_ij`` (j != i) from ``base`` with ``h_i(base) = 1``.

    Gauge: the path first moves along axis ``i`` with zero contribution, so
    ``h_i = 1`` on the line through ``base`` parallel to axis ``i``.
    """
    n = rc.n
    _, pts = grid_points(grid)
    base = tuple(float(b) for b in base)
    values = []
    worst = 0.0
    for i in range(n):
        others = [j for j in range(n) if j != i]

        def form(k, p, i=i):
            if k == i:
                return np.zeros(p.shape[:-1])
            return eval_on(rc[i, k], tuple(p[..., m] for m in range(n)), p)

        log_h = paths.staircase_integral(form, base, pts, others, [m - 1 for m in grid.points])
        planes = list(itertools.combinations(others, 2))
        loop = paths.loop_residuals(form, grid, planes) if planes else 0.0
        if loop > tol:
            raise CompatibilityError(
                f"Lame coefficient h_{i + 1} is path dependent (loop residual {loop:.3e})"
            )
        worst = max(worst, loop)
        values.append(np.exp(log_h))
    return LameField(grid, base, np.stack(values), worst)

"""Levy, adjoint Levy and Laplace transformations of diagonal systems.

Velocities, rotation coefficients and Lame factors of the Levy-type
transforms are built symbolically by substitution; the Laplace transform
only maps laws, and its velocities are recovered numerically as
``d_i F / d_i U``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .claws import CommutingFlow, ConservationLaw, verify_law_diagonal
from .expr import ONE, Expr, differentiate, to_string
from .hydro import DiagonalSystem, check_hyperbolicity, eval_on
from .report import (
    TOL_SYMBOLIC,
    DegenerateError,
    Residual,
    SingularityError,
    mixed_error,
    sample_points,
    summarize,
)

SINGULAR_REL = 1e-10


class KernelWarning(UserWarning):
    """The transformed density vanishes identically (the generating law itself)."""


class MissingFluxError(LookupError):
    """A commuting flow carries no flux for the density being transformed."""


@dataclass(eq=False)
class TransformResult:
    """Outcome of a transformation applied to ``source``.

    ``Lambda``/``A``/``lame_factors`` are ``None`` for the Laplace transform,
    whose velocities are only available numerically from ``laws``.
    The transformed Lame coefficients are ``H_i = h_i * lame_factors[i]``.
    """

    kind: str
    source: DiagonalSystem
    alpha: int
    beta: int | None
    Lambda: tuple[Expr, ...] | None
    A: dict[tuple[int, int], Expr] | None
    lame_factors: tuple[Expr, ...] | None
    law_map: Callable[[ConservationLaw], ConservationLaw]
    laws: list[ConservationLaw] = field(default_factory=list)
    kernel: Expr | None = None

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def H(self) -> tuple[Expr, ...] | None:
        if self.lame_factors is None or self.source.lame is None:
            return None
        return tuple(h * k for h, k in zip(self.source.lame, self.lame_factors))

    def transformed_system(self) -> DiagonalSystem:
        if self.Lambda is None:
            raise ValueError("Laplace transforms have no symbolic velocities")
        return DiagonalSystem(self.Lambda, self.source.coords, self.H)

    def transform_law(self, law: ConservationLaw) -> ConservationLaw:
        if self.kernel is not None and to_string(law.h) == to_string(self.kernel):
            warnings.warn(
                "transforming the generating density itself: the result vanishes identically",
                KernelWarning,
                stacklevel=2,
            )
        return self.law_map(law)

    def velocities_at(self, where) -> np.ndarray:
        """``Lambda^i`` at the points, shape ``(*P, n)``; NaN where undefined (Laplace)."""
        coords, pts = sample_points(where)
        if self.Lambda is not None:
            return np.stack([eval_on(e, coords, pts) for e in self.Lambda], axis=-1)
        return laplace_velocities(self.laws, self.n, coords, pts)

    def identity_residuals(self, where, laws: Sequence[ConservationLaw] = (), tol: float = TOL_SYMBOLIC) -> list[Residual]:
        """Coefficient, Lame and law-transport identities at the given points."""
        coords, pts = sample_points(where)
        out = []
        if self.Lambda is not None:
            lam = [eval_on(e, coords, pts) for e in self.Lambda]
            errs = []
            for (i, j), a in self.A.items():
                rhs = eval_on(differentiate(self.Lambda[i], j), coords, pts) / (lam[j] - lam[i])
                errs.append(mixed_error(eval_on(a, coords, pts), rhs))
            out.append(summarize(f"{self.kind}: rotation coefficients", np.stack(errs), pts, tol))
            H = self.H
            if H is not None:
                errs = []
                for (i, j), a in self.A.items():
                    dlog = eval_on(differentiate(H[i], j), coords, pts) / eval_on(H[i], coords, pts)
                    errs.append(mixed_error(dlog, eval_on(a, coords, pts)))
                out.append(summarize(f"{self.kind}: Lame coefficients", np.stack(errs), pts, tol))
            new = self.transformed_system()
            for law in laws:
                moved = self.law_map(law)
                rep = verify_law_diagonal(new, moved, where, tol)
                for r in rep.residuals():
                    r.name = f"{self.kind}: transported {r.name}"
                    out.append(r)
        else:
            for law in laws:
                moved = self.law_map(law)
                U, F = moved.h, moved.g
                lam = self.velocities_at(where)
                errs = []
                for i in range(self.n):
                    dU = eval_on(differentiate(U, i), coords, pts)
                    dF = eval_on(differentiate(F, i), coords, pts)
                    errs.append(mixed_error(dF, np.where(np.isnan(lam[..., i]), dF, lam[..., i] * dU)))
                out.append(summarize(f"{self.kind}: transported {law.name or 'law'}", np.stack(errs), pts, tol))
        return out


def _check_apart(exprs: Sequence[tuple[Expr, Sequence[Expr], str]], where) -> None:
    """Each entry ``(denominator, scale terms, label)`` must stay away from zero."""
    if where is None:
        return
    coords, pts = sample_points(where)
    for denom, terms, what in exprs:
        value = eval_on(denom, coords, pts)
        scale = np.ones(pts.shape[:-1])
        for t in terms:
            scale = np.maximum(scale, np.abs(eval_on(t, coords, pts)))
        bad = ~(np.abs(value) >= SINGULAR_REL * scale)
        if np.any(bad):
            raise SingularityError(f"{what} vanishes", pts[bad])


def _index(sys: DiagonalSystem, alpha: int, name: str = "alpha") -> int:
    if not 0 <= alpha < sys.n:
        raise ValueError(f"{name} = {alpha} out of range for n = {sys.n}")
    return alpha


# ---------------------------------------------------------------------------
# Levy


def levy(sys: DiagonalSystem, law: ConservationLaw, alpha: int, where=None) -> TransformResult:
    """Levy transform generated by ``law`` in direction ``alpha`` (0-based)."""
    al = _index(sys, alpha)
    h, g = law.h, law.g
    dh = differentiate(h, al)
    if where is not None:
        check_hyperbolicity(sys, where)
    checks = [(h, [], "density h"), (dh, [], "d_alpha h")]
    ratio = h / dh
    K = {}
    for i in range(sys.n):
        if i == al:
            continue
        a_ia = sys.a(i, al)
        K[i] = ONE - a_ia * ratio
        checks.append((dh - a_ia * h, [dh, a_ia * h], f"d_alpha h - a_{i + 1}{al + 1} h"))
    _check_apart(checks, where)

    Lam = []
    for i in range(sys.n):
        if i == al:
            Lam.append(law.phi)
        else:
            a_ia = sys.a(i, al)
            Lam.append((sys.lam[i] * dh - a_ia * g) / (dh - a_ia * h))
    A = {}
    for i in range(sys.n):
        for j in range(sys.n):
            if i == j:
                continue
            if i == al:
                A[i, j] = K[j] * differentiate(h, j) / h
            else:
                A[i, j] = sys.a(i, j) + differentiate(K[i], j) / K[i]
    factors = tuple(ratio if i == al else K[i] for i in range(sys.n))

    def law_map(target: ConservationLaw) -> ConservationLaw:
        U = target.h - ratio * differentiate(target.h, al)
        F = target.g - g / differentiate(g, al) * differentiate(target.g, al)
        return ConservationLaw(U, F, target.name)

    return TransformResult("levy", sys, al, None, tuple(Lam), A, factors, law_map, kernel=h)


# ---------------------------------------------------------------------------
# adjoint Levy


def adjoint_levy(sys: DiagonalSystem, flow: CommutingFlow, alpha: int, where=None) -> TransformResult:
    """Adjoint Levy transform generated by the commuting flow ``flow``."""
    al = _index(sys, alpha)
    if flow.mu is None:
        raise ValueError("adjoint Levy needs the velocities mu of the flow")
    mu = flow.mu
    mu_a = mu[al]
    dmu_a = differentiate(mu_a, al)
    if where is not None:
        check_hyperbolicity(sys, where)
    checks = [(mu_a, [], "mu^alpha"), (dmu_a, [], "d_alpha mu^alpha")]
    for i in range(sys.n):
        if i != al:
            checks.append((mu_a - mu[i], [mu_a, mu[i]], f"mu^alpha - mu^{i + 1}"))
    _check_apart(checks, where)

    lam_a = sys.lam[al]
    M = {i: ONE - mu[i] / mu_a for i in range(sys.n) if i != al}
    Lam = []
    for i in range(sys.n):
        if i == al:
            Lam.append((lam_a * dmu_a - mu_a * differentiate(lam_a, al)) / dmu_a)
        else:
            Lam.append((sys.lam[i] * mu_a - lam_a * mu[i]) / (mu_a - mu[i]))
    A = {}
    for i in range(sys.n):
        for j in range(sys.n):
            if i == j:
                continue
            if i == al:
                A[i, j] = sys.a(i, j) + differentiate(dmu_a, j) / dmu_a - differentiate(mu_a, j) / mu_a
            else:
                A[i, j] = sys.a(i, j) + differentiate(M[i], j) / M[i]
    factors = tuple(dmu_a / mu_a if i == al else M[i] for i in range(sys.n))

    def law_map(target: ConservationLaw) -> ConservationLaw:
        key = target.name
        if key is None or key not in flow.q:
            raise MissingFluxError(f"flow carries no flux q for density {key!r}")
        q = flow.q[key]
        return ConservationLaw(target.h - q / mu_a, target.g - lam_a * q / mu_a, target.name)

    return TransformResult("adjoint", sys, al, None, tuple(Lam), A, factors, law_map)


# ---------------------------------------------------------------------------
# Laplace


def laplace_velocities(laws: Sequence[ConservationLaw], n: int, coords, pts) -> np.ndarray:
    """``d_i F / d_i U`` taken from the law with the largest ``|d_i U|``; NaN where none is usable."""
    if not laws:
        raise DegenerateError("Laplace velocities need at least one transformed law")
    out = np.full(pts.shape[:-1] + (n,), np.nan)
    any_ok = np.zeros(pts.shape[:-1], dtype=bool)
    for i in range(n):
        best = np.zeros(pts.shape[:-1])
        for law in laws:
            dU = eval_on(differentiate(law.h, i), coords, pts)
            dF = eval_on(differentiate(law.g, i), coords, pts)
            scale = np.maximum(1.0, np.abs(eval_on(law.h, coords, pts)))
            usable = (np.abs(dU) > SINGULAR_REL * scale) & (np.abs(dU) > best)
            with np.errstate(all="ignore"):
                out[..., i] = np.where(usable, dF / dU, out[..., i])
            best = np.where(usable, np.abs(dU), best)
            any_ok |= usable
    if not np.all(any_ok):
        raise DegenerateError("every transformed density is locally constant", pts[~any_ok])
    return out


def laplace(
    sys: DiagonalSystem,
    alpha: int,
    beta: int,
    laws: Sequence[ConservationLaw],
    where=None,
) -> TransformResult:
    """Laplace transform ``U = u - d_alpha u / a_beta_alpha`` applied to ``laws``.

    Fluxes map as ``F = f - lam^beta d_alpha u / a_beta_alpha``, the choice
    that makes ``d_i F / d_i U`` independent of the law.
    """
    al = _index(sys, alpha)
    be = _index(sys, beta, "beta")
    if al == be:
        raise ValueError("Laplace transform needs alpha != beta")
    a_ba = sys.a(be, al)
    if where is not None:
        check_hyperbolicity(sys, where)
    _check_apart([(a_ba, [], f"a_{be + 1}{al + 1}")], where)
    lam_b = sys.lam[be]

    def law_map(target: ConservationLaw) -> ConservationLaw:
        shift = differentiate(target.h, al) / a_ba
        return ConservationLaw(target.h - shift, target.g - lam_b * shift, target.name)

    moved = [law_map(law) for law in laws]
    result = TransformResult("laplace", sys, al, be, None, None, None, law_map, moved)
    if where is not None and moved:
        result.velocities_at(where)
    return result


# ---------------------------------------------------------------------------
# compositions and identities


def _grad_rows(exprs: Sequence[Expr], n: int, coords, pts) -> np.ndarray:
    rows = []
    for e in exprs:
        rows.append([eval_on(e, coords, pts)] + [eval_on(differentiate(e, j), coords, pts) for j in range(n)])
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def _det_ratio(top: Expr, rows: Sequence[Expr], n: int, coords, pts, what: str) -> np.ndarray:
    full = _grad_rows([top, *rows], n, coords, pts)
    denom_m = full[..., 1:, 1:]
    denom = np.linalg.det(denom_m)
    scale = np.prod(np.maximum(np.linalg.norm(denom_m, axis=-1), 1e-300), axis=-1)
    bad = ~(np.abs(denom) >= SINGULAR_REL * scale)
    if np.any(bad):
        raise SingularityError(f"{what} denominator determinant vanishes", pts[bad])
    return np.linalg.det(full) / denom


def levy_composition(
    sys: DiagonalSystem,
    laws: Sequence[ConservationLaw],
    target: ConservationLaw,
    where,
) -> tuple[np.ndarray, np.ndarray]:
    """``(U, F)`` of ``L_n o ... o L_1`` applied to ``target`` by the determinant formula."""
    n = sys.n
    if len(laws) != n:
        raise ValueError(f"need exactly {n} generating laws")
    coords, pts = sample_points(where)
    U = _det_ratio(target.h, [l.h for l in laws], n, coords, pts, "density")
    F = _det_ratio(target.g, [l.g for l in laws], n, coords, pts, "flux")
    return U, F


def compose_sequential(
    sys: DiagonalSystem, laws: Sequence[ConservationLaw], target: ConservationLaw
) -> tuple[ConservationLaw, DiagonalSystem]:
    """Apply ``L_1`` with law 1, then ``L_2`` with the transformed law 2, and so on."""
    current = sys
    pending = list(laws)
    moved = target
    for k in range(sys.n):
        T = levy(current, pending[k], k)
        moved = T.law_map(moved)
        pending = pending[: k + 1] + [T.law_map(l) for l in pending[k + 1 :]]
        current = T.transformed_system()
    return moved, current


def shifted_flow(sys: DiagonalSystem, law: ConservationLaw, alpha: int) -> CommutingFlow:
    """Flow of the Levy-transformed system whose adjoint transform undoes ``levy(sys, law, alpha)``."""
    h = law.h
    dh = differentiate(h, alpha)
    mu = []
    for i in range(sys.n):
        if i == alpha:
            mu.append(ONE / h)
        else:
            a_ia = sys.a(i, alpha)
            mu.append(a_ia / (a_ia * h - dh))
    return CommutingFlow(tuple(mu), name="shifted")


def shifted_law(sys: DiagonalSystem, flow: CommutingFlow, alpha: int) -> ConservationLaw:
    """Law of the adjoint-transformed system whose Levy transform undoes ``adjoint_levy``."""
    mu_a = flow.mu[alpha]
    return ConservationLaw(ONE / mu_a, sys.lam[alpha] / mu_a, "shifted")


def verify_inversion(
    sys: DiagonalSystem,
    alpha: int,
    where,
    law: ConservationLaw | None = None,
    flow: CommutingFlow | None = None,
    tol: float = TOL_SYMBOLIC,
) -> list[Residual]:
    """Round trips ``L*_a o L_a`` (given a law) and ``L_a o L*_a`` (given a flow)."""
    if law is None and flow is None:
        raise ValueError("need a law, a flow, or both")
    coords, pts = sample_points(where)
    lam = np.stack([eval_on(e, coords, pts) for e in sys.lam], axis=-1)
    out = []
    if law is not None:
        T = levy(sys, law, alpha, where)
        back = adjoint_levy(T.transformed_system(), shifted_flow(sys, law, alpha), alpha, where)
        err = np.moveaxis(mixed_error(back.velocities_at(where), lam), -1, 0)
        out.append(summarize("adjoint after levy", err, pts, tol))
    if flow is not None:
        T = adjoint_levy(sys, flow, alpha, where)
        back = levy(T.transformed_system(), shifted_law(sys, flow, alpha), alpha, where)
        err = np.moveaxis(mixed_error(back.velocities_at(where), lam), -1, 0)
        out.append(summarize("levy after adjoint", err, pts, tol))
    return out


def verify_laplace_levy_identity(
    sys: DiagonalSystem,
    law: ConservationLaw,
    alpha: int,
    beta: int,
    targets: Sequence[ConservationLaw],
    where,
    tol: float = 1e-8,
) -> list[Residual]:
    """Compare ``L_alpha`` with ``S_alpha_beta o L_beta`` on ``targets``."""
    if alpha == beta:
        raise ValueError("identity needs alpha != beta")
    if not targets:
        raise ValueError("need at least one target law")
    coords, pts = sample_points(where)
    direct = levy(sys, law, alpha, where)
    first = levy(sys, law, beta, where)
    moved = [first.law_map(t) for t in targets]
    composed = laplace(first.transformed_system(), alpha, beta, moved, where)

    dens, flux = [], []
    for t, m in zip(targets, composed.laws):
        d = direct.law_map(t)
        dens.append(mixed_error(eval_on(d.h, coords, pts), eval_on(m.h, coords, pts)))
        flux.append(mixed_error(eval_on(d.g, coords, pts), eval_on(m.g, coords, pts)))
    out = [
        summarize("densities", np.stack(dens), pts, tol),
        summarize("fluxes", np.stack(flux), pts, tol),
    ]
    lam_c = composed.velocities_at(where)
    lam_d = direct.velocities_at(where)
    undefined = np.isnan(lam_c)
    err = np.where(undefined, -np.inf, mixed_error(lam_d, np.where(undefined, 0.0, lam_c)))
    vel = summarize("velocities", np.moveaxis(err, -1, 0), pts, tol)
    vel.extra["undefined_indices"] = [i + 1 for i in range(sys.n) if np.all(undefined[..., i])]
    out.append(vel)
    return out

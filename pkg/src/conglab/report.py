"""Residual reports and the error types shared by the verification modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .expr import EvalError, Grid

TOL_SYMBOLIC = 1e-9
TOL_FD = 1e-5


class VerificationError(RuntimeError):
    """A precondition of a check failed at specific points."""

    def __init__(self, message: str, points: Sequence[Sequence[float]] = (), **info):
        self.points = [tuple(float(x) for x in p) for p in points]
        self.info = info
        if self.points:
            shown = ", ".join(str(tuple(round(x, 6) for x in p)) for p in self.points[:5])
            more = f" (+{len(self.points) - 5} more)" if len(self.points) > 5 else ""
            message = f"{message}; at {shown}{more}"
        super().__init__(message)


class HyperbolicityError(VerificationError):
    pass


class SingularityError(VerificationError):
    pass


class CompatibilityError(VerificationError):
    pass


class CollisionError(VerificationError):
    """Two quantities that must stay apart (phi and lambda, mu^i and mu^j) met."""


class FrameError(VerificationError):
    pass


class DegenerateError(VerificationError):
    pass


@dataclass
class Residual:
    """Max/mean of a residual field plus where the max occurred.

    Residual values use the mixed metric ``|lhs - rhs| / max(1, |lhs|, |rhs|)``:
    absolute for O(1) quantities, relative for large ones.
    """

    name: str
    max: float
    mean: float
    argmax: tuple[float, ...] | None
    tol: float
    skipped: int = 0
    total: int = 0
    vacuous: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.vacuous or self.max <= self.tol

    def to_dict(self) -> dict[str, Any]:
        d = {
            "name": self.name,
            "max_residual": self.max,
            "mean_residual": self.mean,
            "argmax": list(self.argmax) if self.argmax is not None else None,
            "skipped": self.skipped,
            "points": self.total,
            "tolerance": self.tol,
            "vacuous": self.vacuous,
            "passed": self.passed,
        }
        if self.extra:
            d["extra"] = self.extra
        return d


def mixed_error(lhs, rhs) -> np.ndarray:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return np.abs(lhs - rhs) / scale


def summarize(
    name: str,
    err: np.ndarray,
    points: np.ndarray,
    tol: float,
    skip: np.ndarray | None = None,
    **extra,
) -> Residual:
    """Reduce a residual field.

    ``err`` has shape ``(..., *P)`` where ``points`` has shape ``(*P, n)``;
    leading axes (component indices) are maxed out first.  ``skip`` marks
    point positions (shape ``P``) excluded from the reduction.
    """
    err = np.asarray(err, dtype=float)
    pshape = points.shape[:-1]
    lead = err.ndim - len(pshape)
    per_point = err.reshape((-1,) + pshape).max(axis=0) if lead > 0 else err
    per_point = np.where(np.isnan(per_point), np.inf, per_point)
    total = int(np.prod(pshape)) if pshape else 1
    skipped = 0
    if skip is not None:
        skip = np.broadcast_to(skip, pshape)
        skipped = int(skip.sum())
        per_point = np.where(skip, -np.inf, per_point)
    flat = per_point.reshape(-1)
    flat_pts = points.reshape(-1, points.shape[-1])
    used = flat[flat > -np.inf]
    if used.size == 0:
        return Residual(name, 0.0, 0.0, None, tol, skipped, total, vacuous=True, extra=extra)
    k = int(np.argmax(flat))
    return Residual(
        name,
        float(flat[k]),
        float(np.mean(used)),
        tuple(float(x) for x in flat_pts[k]),
        tol,
        skipped,
        total,
        extra=extra,
    )


def vacuous(name: str, tol: float, reason: str) -> Residual:
    return Residual(name, 0.0, 0.0, None, tol, vacuous=True, extra={"reason": reason})


def grid_points(grid: Grid) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Coordinate arrays (for evaluation) and stacked points ``(*shape, n)``."""
    mesh = grid.mesh()
    return mesh, np.stack(mesh, axis=-1)


def sample_points(where) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Accept a Grid or an array of points ``(..., n)``."""
    if isinstance(where, Grid):
        return grid_points(where)
    return points_from(where)


def points_from(pts) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    pts = np.asarray(pts, dtype=float)
    return tuple(pts[..., k] for k in range(pts.shape[-1])), pts


def locate_eval_error(err: EvalError, points: np.ndarray) -> list[tuple[float, ...]]:
    flat = points.reshape(-1, points.shape[-1])
    idx = err.where[err.where < len(flat)] if err.where.size else np.zeros(0, dtype=int)
    return [tuple(flat[i]) for i in idx]


def require_apart(
    value: np.ndarray,
    scale: np.ndarray | float,
    points: np.ndarray,
    what: str,
    rel: float = 1e-10,
    exc: type[VerificationError] = SingularityError,
) -> None:
    """Raise ``exc`` where ``|value| < rel * max(scale, 1e-300)``."""
    value = np.asarray(value, dtype=float)
    scale = np.maximum(np.abs(np.asarray(scale, dtype=float)), 1e-300)
    bad = ~(np.abs(value) >= rel * scale)
    if np.any(bad):
        bad = np.broadcast_to(bad, points.shape[:-1])
        raise exc(f"{what} vanishes", points[bad])

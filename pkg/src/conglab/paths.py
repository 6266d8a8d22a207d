"""Line integrals of 1-forms along axis-ordered staircase paths on a grid.

A 1-form is given as a callable ``form(k, points) -> values`` returning its
``dR^k`` component at ``points`` (shape ``(..., n)``).  Segments are split
into one piece per grid cell and each piece is integrated with Gauss-Legendre.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .expr import Grid

OneForm = Callable[[int, np.ndarray], np.ndarray]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def staircase_integral(
    form: OneForm,
    base: Sequence[float],
    targets: np.ndarray,
    order: Sequence[int],
    pieces: Sequence[int],
) -> np.ndarray:
    """Integrate ``form`` from ``base`` to each target along ``order``.

    Axes not listed in ``order`` are jumped to their target value up front
    (their component of the form is taken to be zero).  ``pieces[k]`` is the
    number of sub-intervals used on axis ``k``.
    """
    targets = np.asarray(targets, dtype=float)
    base = np.asarray(base, dtype=float)
    n = targets.shape[-1]
    current = np.broadcast_to(base, targets.shape).copy()
    skipped = [k for k in range(n) if k not in order]
    current[..., skipped] = targets[..., skipped]
    total = np.zeros(targets.shape[:-1])
    for k in order:
        m = max(int(pieces[k]), 1)
        t = ((np.arange(m)[:, None] + _GL_T[None, :]) / m).ravel()
        w = np.tile(_GL_W, m) / m
        start = current[..., k]
        delta = targets[..., k] - start
        pts = np.repeat(current[..., None, :], t.size, axis=-2)
        pts[..., k] = start[..., None] + delta[..., None] * t
        vals = np.asarray(form(k, pts), dtype=float)
        total = total + delta * np.sum(vals * w, axis=-1)
        current[..., k] = targets[..., k]
    return total


def edge_integrals(form: OneForm, grid: Grid, k: int) -> np.ndarray:
    """Integral of the ``dR^k`` component over every grid edge along axis ``k``.

    Shape is the grid shape with axis ``k`` shortened by one.
    """
    _, pts = _grid_points(grid)
    h = grid.spacing[k]
    sl = [slice(None)] * grid.ndim
    sl[k] = slice(0, grid.points[k] - 1)
    starts = pts[tuple(sl)]
    nodes = np.repeat(starts[..., None, :], _GL_T.size, axis=-2)
    nodes[..., k] = starts[..., k][..., None] + h * _GL_T
    vals = np.asarray(form(k, nodes), dtype=float)
    return h * np.sum(vals * _GL_W, axis=-1)


def loop_residuals(form: OneForm, grid: Grid, planes: Sequence[tuple[int, int]]) -> float:
    """Largest circulation of ``form`` around an elementary cell in the given planes."""
    worst = 0.0
    cache: dict[int, np.ndarray] = {}
    for j, k in planes:
        ej = cache.setdefault(j, edge_integrals(form, grid, j))
        ek = cache.setdefault(k, edge_integrals(form, grid, k))
        mj, mk = grid.points[j], grid.points[k]

        def take(arr, axis, sl):
            idx = [slice(None)] * grid.ndim
            idx[axis] = sl
            return arr[tuple(idx)]

        bottom = take(ej, k, slice(0, mk - 1))
        top = take(ej, k, slice(1, mk))
        left = take(ek, j, slice(0, mj - 1))
        right = take(ek, j, slice(1, mj))
        circ = bottom + right - top - left
        worst = max(worst, float(np.max(np.abs(circ))))
    return worst


def _grid_points(grid: Grid):
    mesh = grid.mesh()
    return mesh, np.stack(mesh, axis=-1)

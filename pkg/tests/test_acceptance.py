"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed at the end of the run."""

import time

import numpy as np
import pytest

from conglab import claws, fixtures, geometry, hydro, ribaucour, transforms
from conglab.claws import CommutingFlow, ConservationLaw
from conglab.expr import Grid, evaluate
from conglab.report import grid_points, mixed_error

RESULTS: dict[int, tuple[str, bool, str]] = {}

OBSTRUCTION_FLUX = [
    "u1 + 0.3*u2*u3 + 0.2*u1^2",
    "2*u2 + 0.3*u1*u3 + 0.1*u3^2",
    "3*u3 + 0.3*u1*u2 + 0.2*u2*u3",
]


def record(number, title, checks):
    """``checks`` maps a label to ``(value, limit, kind)`` with kind ``le`` or ``ge``."""
    parts = []
    ok = True
    for label, (value, limit, kind) in checks.items():
        good = value <= limit if kind == "le" else value >= limit
        ok &= bool(good)
        op = "<=" if kind == "le" else ">="
        parts.append(f"{label} {value:.3g} {op} {limit:g}")
    RESULTS[number] = (title, ok, "; ".join(parts))
    assert ok, RESULTS[number]


def worst(residuals):
    return max(r.max for r in residuals)


def test_01_semihamiltonian_identity():
    fx = fixtures.sys_c(7)
    t0 = time.perf_counter()
    rep = hydro.semihamiltonian_residual(fx.system, fx.grid, 1e-10)
    elapsed = time.perf_counter() - t0
    record(1, "semihamiltonian identity, three-component system", {
        "residual": (rep.max, 1e-10, "le"),
        "seconds": (elapsed, 1.0, "le"),
    })


def test_02_levy_transport():
    fx = fixtures.sys_b()
    law = ConservationLaw.parse("R1+R2", "R1*R2", fixtures.C2)
    T = transforms.levy(fx.system, law, 0, fx.grid)
    pts = fx.grid.random_points(100, seed=0)
    coords = (pts[:, 0], pts[:, 1])
    closed = np.stack([coords[0] * coords[1] / (coords[0] + coords[1]), coords[0] / 2], -1)
    spot = np.abs(T.velocities_at(np.array([1.0, 2.0])) - [2 / 3, 1 / 2]).max()
    identities = T.identity_residuals(pts, [fx.laws["u2"], fx.laws["u3"]], tol=1e-9)
    record(2, "Levy transport on the exchange system", {
        "spot value": (spot, 1e-12, "le"),
        "closed form": (np.abs(T.velocities_at(pts) - closed).max(), 1e-12, "le"),
        "identities": (worst(identities), 1e-9, "le"),
    })


def test_03_adjoint_levy_transport():
    fx = fixtures.sys_a()
    T = transforms.adjoint_levy(fx.system, fx.flows["square"], 0, fx.grid)
    spot = np.abs(T.velocities_at(np.array([2.0, 3.0])) - [1.0, 10 / 3]).max()
    identities = T.identity_residuals(fx.grid.random_points(100, seed=0), list(fx.laws.values()), tol=1e-9)
    record(3, "adjoint Levy transport on the decoupled system", {
        "spot value": (spot, 1e-12, "le"),
        "identities": (worst(identities), 1e-9, "le"),
    })


def test_04_inversion():
    fx = fixtures.sys_b(21)
    res = []
    for alpha in (0, 1):
        res += transforms.verify_inversion(
            fx.system, alpha, fx.grid, law=fx.laws["u2"], flow=fx.flows["quadratic"], tol=1e-9
        )
    record(4, "Levy and adjoint Levy invert each other", {"round trips": (worst(res), 1e-9, "le")})


def test_05_laplace_factorization():
    fx = fixtures.sys_c()
    targets = [fx.laws[k] for k in ("h2", "h3", "h4")]
    res = []
    for alpha, beta in [(0, 1), (1, 2), (2, 0), (1, 0)]:
        res += transforms.verify_laplace_levy_identity(fx.system, fx.laws["h1"], alpha, beta, targets, fx.grid, 1e-8)
    record(5, "Laplace transform factorizes Levy transforms", {"densities, fluxes, velocities": (worst(res), 1e-8, "le")})


def test_06_composition_determinant():
    fx = fixtures.sys_c()
    gens = [fx.laws[k] for k in ("h2", "h3", "h4")]
    pts = fx.grid.random_points(50, seed=0, margin=0.02)
    U, F = transforms.levy_composition(fx.system, gens, fx.laws["h1"], pts)
    moved, _ = transforms.compose_sequential(fx.system, gens, fx.laws["h1"])
    coords = tuple(pts[:, k] for k in range(3))
    err = max(
        np.max(mixed_error(U, evaluate(moved.h, coords))),
        np.max(mixed_error(F, evaluate(moved.g, coords))),
    )
    record(6, "determinant formula equals sequential composition", {"difference": (err, 1e-8, "le")})


def test_07_conjugate_hypersurfaces():
    fx = fixtures.sys_b(21)
    c = geometry.Congruence.from_laws(fx.rep_laws(), fx.coords)
    law = ConservationLaw.parse("R1+R2", "R1*R2", fx.coords)
    conj = geometry.conjugate_hypersurface(c, law, fx.grid, fx.system).reports[0]
    negative = geometry.conjugate_hypersurface(c, ConservationLaw.parse("R1*R2", "1", fx.coords), fx.grid).reports[0]
    parallel = geometry.parallel_family_check(c, fx.laws["u3"], [0.0, 1.0, 5.0], fx.grid)
    record(7, "conjugate hypersurfaces of laws", {
        "conjugacy": (conj.max, 1e-4, "le"),
        "negative control": (negative.max, 1e-1, "ge"),
        "parallel family": (parallel.max, 1e-6, "le"),
    })


def test_08_harmonic_surface():
    fx = fixtures.sys_b(21)
    c = geometry.Congruence.from_laws(fx.rep_laws(), fx.coords)
    surf = geometry.harmonic_surface(c, fx.system, fx.flows["quadratic"], fx.grid, tol_exact=1e-9, tol_angle=1e-5)
    by_name = {r.name: r for r in surf.reports}
    data = geometry.harmonic_data(c, fx.system, fx.flows["quadratic"])
    y0 = evaluate(data.point[0], (1.0, 2.0))
    record(8, "harmonic surface of a commuting flow", {
        "characteristics meet": (by_name["characteristics meet at harmonic point"].max, 1e-9, "le"),
        "line in tangent plane (rad)": (by_name["line direction in tangent plane"].max, 1e-5, "le"),
        "through focal points": (max(by_name[f"characteristic {k} through focal point {k}"].max for k in (1, 2)), 1e-10, "le"),
        "y0 spot value": (abs(y0 - 5 / 6), 1e-12, "le"),
    })


def test_09_obstruction():
    sys, grid = fixtures.obstruction_system()
    frame = hydro.eigen_frame(sys, grid)
    measured = hydro.diagonalizability_test(frame).max_c
    coords = ("u1", "u2", "u3")
    flux = OBSTRUCTION_FLUX
    affine = CommutingFlow.parse(None, coords, flux=[f"1.5*({f}) - 0.25*u{i + 1}" for i, f in enumerate(flux)], name="affine")
    rng = np.random.default_rng(2024)
    terms = ["u1^2", "u2^2", "u3^2", "u1*u2", "u1*u3", "u2*u3"]
    perturbed = [
        f + " + 0.1*(" + " + ".join(f"({w:.6f})*{t}" for w, t in zip(rng.uniform(-1, 1, 6), terms)) + ")" for f in flux
    ]
    bad = CommutingFlow.parse(None, coords, flux=perturbed, name="perturbed")
    good = claws.verify_commuting(sys, affine, frame=frame, tol=1e-6)
    fails = claws.verify_commuting(sys, bad, frame=frame)
    record(9, "commuting flows of a non-diagonalizable system", {
        "measured max |c|": (measured, 1e-3, "ge"),
        "affine flow": (worst(good.residuals()), 1e-6, "le"),
        "perturbed flow comm2": (fails.comm2.max, 1e-3, "ge"),
    })


def test_10_ribaucour():
    params = ("u1", "u2")
    ellipsoid = ribaucour.SurfaceImmersion.parse(["sin(u1)*cos(u2)", "1.2*sin(u1)*sin(u2)", "1.5*cos(u1)"], params)
    grid = Grid((0.2, 0.6), (0.6, 1.0), (21, 21))
    good = ribaucour.ribaucour_check(ribaucour.SphereCongruence.parse(ellipsoid, "0.1"), grid, 5e-3)
    theorem = ribaucour.ribaucour_theorem_check(
        ribaucour.SphereCongruence.parse(ellipsoid, "0.1"), ConservationLaw.parse("0.1", "1", params), grid
    )
    bad = ribaucour.ribaucour_check(ribaucour.SphereCongruence.parse(ellipsoid, "0.1+0.05*u1"), grid, 5e-3)
    sphere = ribaucour.SurfaceImmersion.parse(["sin(u1)*cos(u2)", "sin(u1)*sin(u2)", "cos(u1)"], params)
    sgrid = Grid((0.5, 0.5), (1.0, 1.0), (11, 11))
    sheet = ribaucour.second_sheet(ribaucour.SphereCongruence.parse(sphere, "0.3"), sgrid)
    coords, _ = grid_points(sgrid)
    r = np.stack([evaluate(e, coords) for e in sphere.r], -1)
    record(10, "Ribaucour sphere congruences", {
        "parallel congruence angle (rad)": (good.angle.max, 5e-3, "le"),
        "law correspondence residual": (worst(theorem.residuals()), 1e-5, "le"),
        "perturbed radius angle (rad)": (bad.angle.max, 5e-3, "ge"),
        "sphere second sheet": (np.abs(sheet.points - 0.4 * r).max(), 1e-9, "le"),
    })

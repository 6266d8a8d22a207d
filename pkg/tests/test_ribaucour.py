import numpy as np
import pytest

from conglab import ribaucour
from conglab.claws import ConservationLaw
from conglab.expr import Grid
from conglab.report import DegenerateError, grid_points
from conglab.ribaucour import EnvelopeError, SphereCongruence, SurfaceImmersion, UmbilicError
from oracle_values import ORACLES

P = ("u1", "u2")
SPHERE = ["sin(u1)*cos(u2)", "sin(u1)*sin(u2)", "cos(u1)"]
ELLIPSOID = ["sin(u1)*cos(u2)", "1.2*sin(u1)*sin(u2)", "1.5*cos(u1)"]
CYLINDER = ["2*cos(u2)", "-2*sin(u2)", "u1"]
PATCH = Grid((0.2, 0.6), (0.6, 1.0), (21, 21))


@pytest.fixture(scope="module")
def ellipsoid():
    return SurfaceImmersion.parse(ELLIPSOID, P)


def test_weingarten_of_sphere_and_cylinder():
    w = ribaucour.weingarten(SurfaceImmersion.parse(SPHERE, P), (0.7, 0.4))
    np.testing.assert_allclose(w, ORACLES["weingarten_sphere"], atol=1e-12)
    w = ribaucour.weingarten(SurfaceImmersion.parse(CYLINDER, P), (0.3, 0.4))
    np.testing.assert_allclose(w, ORACLES["weingarten_cylinder"], atol=1e-12)


def test_weingarten_of_plane_vanishes():
    w = ribaucour.weingarten(SurfaceImmersion.parse(["u1", "u2", "0"], P), (0.3, 0.4))
    np.testing.assert_allclose(w, 0.0, atol=1e-15)


def test_weingarten_agrees_with_finite_differences(ellipsoid):
    u = np.array([0.4, 0.8])
    step = 1e-5
    n = lambda p: np.array([float(x) for x in _ev(ellipsoid.normal(), p)])
    r = [np.array([float(x) for x in _ev(t, u)]) for t in ellipsoid.tangents()]
    basis = np.stack(r, axis=1)
    w = ribaucour.weingarten(ellipsoid, u)
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        dn = (n(u + e) - n(u - e)) / (2 * step)
        coeff, *_ = np.linalg.lstsq(basis, dn, rcond=None)
        np.testing.assert_allclose(coeff, w[:, j], atol=1e-6)


def _ev(vec, p):
    from conglab.expr import evaluate

    return [evaluate(x, tuple(p)) for x in vec]


def test_principal_curvatures_of_cylinder():
    w = ribaucour.weingarten(SurfaceImmersion.parse(CYLINDER, P), PATCH)
    k = ribaucour.principal_curvatures(w)
    np.testing.assert_allclose(k[..., 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(k[..., 1], 0.5, atol=1e-12)


def test_sphere_has_no_induced_system():
    with pytest.raises(UmbilicError):
        ribaucour.induced_system(SurfaceImmersion.parse(SPHERE, P), PATCH)


def test_singular_parametrization_is_rejected():
    s = SurfaceImmersion.parse(["u1+u2", "u1+u2", "0"], P)
    with pytest.raises(DegenerateError):
        ribaucour.weingarten(s, (0.3, 0.4))


def test_induced_system_of_ellipsoid_is_hyperbolic(ellipsoid):
    from conglab.hydro import eigen_frame

    frame = eigen_frame(ribaucour.induced_system(ellipsoid, PATCH), PATCH)
    assert np.all(np.diff(frame.lam, axis=-1) > 0)


def test_second_sheet_of_sphere_is_scaled_sphere():
    sc = SphereCongruence.parse(SurfaceImmersion.parse(SPHERE, P), "0.3")
    grid = Grid((0.5, 0.5), (1.0, 1.0), (11, 11))
    sheet = ribaucour.second_sheet(sc, grid)
    coords, pts = grid_points(grid)
    r = np.stack(_ev(SurfaceImmersion.parse(SPHERE, P).r, (pts[..., 0], pts[..., 1])), -1)
    np.testing.assert_allclose(sheet.points, 0.4 * r, atol=1e-9)


def test_parallel_congruence_is_ribaucour(ellipsoid):
    rep = ribaucour.ribaucour_check(SphereCongruence.parse(ellipsoid, "0.1"), PATCH)
    assert rep.passed, rep.angle
    assert rep.second_sheet.branch_switches == 0


def test_generic_radius_is_not_ribaucour(ellipsoid):
    rep = ribaucour.ribaucour_check(SphereCongruence.parse(ellipsoid, "0.1+0.05*u1"), PATCH)
    assert not rep.passed
    assert rep.angle.max > 5e-2


def test_theorem_check_with_trivial_law(ellipsoid):
    sc = SphereCongruence.parse(ellipsoid, "0.1")
    rep = ribaucour.ribaucour_theorem_check(sc, ConservationLaw.parse("0.1", "1", P), PATCH)
    assert rep.passed, rep.residuals()


def test_theorem_check_rejects_mismatched_radius(ellipsoid):
    sc = SphereCongruence.parse(ellipsoid, "0.2")
    rep = ribaucour.ribaucour_theorem_check(sc, ConservationLaw.parse("0.1", "1", P), PATCH)
    assert not rep.radius_match.passed


def test_second_sheet_is_an_involution(ellipsoid):
    sc = SphereCongruence.parse(ellipsoid, "0.1+0.05*u1")
    surf, _ = ribaucour.second_sheet_surface(sc, PATCH)
    back = ribaucour.second_sheet(SphereCongruence(surf, sc.radius), PATCH)
    coords, _ = grid_points(PATCH)
    original = np.stack(_ev(ellipsoid.r, coords), -1)
    np.testing.assert_allclose(back.points, original, atol=1e-12)


def test_cylinder_with_its_own_radius_has_no_envelope():
    sc = SphereCongruence.parse(SurfaceImmersion.parse(CYLINDER, P), "2")
    with pytest.raises(EnvelopeError):
        ribaucour.second_sheet(sc, Grid((0.5, 0.5), (1.0, 1.0), (5, 5)))


def test_zero_radius_has_no_envelope():
    sc = SphereCongruence.parse(SurfaceImmersion.parse(SPHERE, P), "0")
    with pytest.raises(EnvelopeError):
        ribaucour.second_sheet(sc, Grid((0.5, 0.5), (1.0, 1.0), (5, 5)))


def test_folded_second_sheet_is_reported(ellipsoid):
    sc = SphereCongruence.parse(ellipsoid, "0.140625 + 0.046875*u2")
    with pytest.raises(EnvelopeError, match="folds"):
        ribaucour.second_sheet_surface(sc, Grid((0.2, 0.6), (0.6, 1.0), (9, 9)))

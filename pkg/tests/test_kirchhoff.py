import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ring
from sfl.kirchhoff import (AnalyticProvider, CoulombProvider, FiniteDifferenceProvider,
                           SurfaceMesh, ZeroProvider, aligned_mesh, boundary_term,
                           identity_check, source_term, steady_time, two_sphere_composite)
from sfl.model import InvariantError, SpacetimePoint
from sfl.solver import QuadratureSpec, field_batch


@given(R=st.floats(0.5, 200), n_t=st.integers(2, 40), n_p=st.integers(2, 60),
       sub=st.sampled_from([1, 2, 5]))
def test_mesh_weights_sum_to_sphere_area(R, n_t, n_p, sub):
    pts, w, nrm = SurfaceMesh(radius=R, n_theta=n_t, n_phi=n_p).nodes(sub=sub)
    assert math.fsum(w) == pytest.approx(4 * math.pi * R**2, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(nrm, axis=1), 1.0, rtol=1e-13)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), R, rtol=1e-13)


def test_band_refinement_keeps_area_and_adds_cells():
    plain = SurfaceMesh(radius=3.0, n_theta=16)
    band = SurfaceMesh(radius=3.0, n_theta=16, band=(1.0, 1.3), band_factor=4)
    assert band.theta_edges().size > plain.theta_edges().size
    assert math.fsum(band.nodes()[1]) == pytest.approx(4 * math.pi * 9.0, rel=1e-13)


def test_orientation_flips_normals():
    a = SurfaceMesh(radius=2.0, n_theta=4, n_phi=6).nodes()
    b = SurfaceMesh(radius=2.0, n_theta=4, n_phi=6, orientation=-1).nodes()
    np.testing.assert_array_equal(a[2], -b[2])
    assert np.all(np.sum(a[0] * a[2], axis=1) > 0)


def test_mesh_invariants():
    with pytest.raises(InvariantError):
        SurfaceMesh(radius=0.0)
    with pytest.raises(InvariantError):
        SurfaceMesh(orientation=0)


def test_aligned_mesh_axis_points_at_observer():
    m = aligned_mesh(10.0, (3.0, 4.0, 0.0))
    np.testing.assert_allclose(m.axis, (0.6, 0.8, 0.0))


@pytest.mark.parametrize("x0, xp", [((30.0, 5.0, -4.0), (2.0, -3.0, 1.0)),
                                    ((0.0, 0.0, 15.0), (0.5, 0.5, 4.0))])
def test_coulomb_field_reconstructed_inside(x0, xp):
    # field is harmonic inside the sphere, so the surface integral alone
    # reproduces it
    cp = CoulombProvider(x0, 2.0)
    B = cp(np.array([[*xp, 0.0]]), np.zeros((1, 3)))[0, :3]
    got = boundary_term(cp, SurfaceMesh(radius=10.0, n_theta=64, n_phi=128), xp, 0.0, sub=4)
    assert np.linalg.norm(got - B) <= 1e-4 * np.linalg.norm(B)


def test_coulomb_exterior_observer_sees_nothing():
    cp = CoulombProvider((30.0, 0.0, 0.0))
    got = boundary_term(cp, SurfaceMesh(radius=10.0, n_theta=64, n_phi=128), (0.0, 14.0, 0.0), 0.0, sub=4)
    B = cp(np.array([[0.0, 14.0, 0.0, 0.0]]), np.zeros((1, 3)))[0, :3]
    assert np.linalg.norm(got) <= 1e-4 * np.linalg.norm(B)


def test_coulomb_shell_between_spheres():
    cp = CoulombProvider((0.5, -0.2, 0.3))
    xp = np.array([4.0, 2.0, -3.0])
    comp, inner, outer = two_sphere_composite(cp, 2.0, 12.0, xp, 0.0, 48, 96, sub=4, mode="between")
    B = cp(np.array([[*xp, 0.0]]), np.zeros((1, 3)))[0, :3]
    assert np.linalg.norm(comp - B) <= 1e-4 * np.linalg.norm(B)


def test_coulomb_two_sphere_exterior_cancels():
    cp = CoulombProvider((0.5, -0.2, 0.3))
    comp, inner, outer = two_sphere_composite(cp, 2.0, 8.0, (20.0, 3.0, 1.0), 0.0, 48, 96, sub=4)
    big = max(np.linalg.norm(inner), np.linalg.norm(outer))
    assert np.linalg.norm(comp) <= 1e-6 * big
    assert np.linalg.norm(inner) > 0


def test_zero_provider_and_zero_source():
    assert not np.any(boundary_term(ZeroProvider(), SurfaceMesh(radius=5.0, n_theta=8, n_phi=8),
                                    (0.0, 0.0, 1.0), 3.0))
    d = identity_check(ring(1.25, amplitude=(0, 0, 0)), SpacetimePoint(5.0, 0.0, 0.0))
    assert d.residual == 0 and not np.any(d.source_term) and not np.any(d.boundary_term)


def test_observer_near_surface_rejected():
    mesh = SurfaceMesh(radius=10.0, n_theta=16, n_phi=32)
    with pytest.raises(InvariantError) as e:
        boundary_term(ZeroProvider(), mesh, (10.1, 0.0, 0.0), 1.0)
    assert e.value.invariant == "observer_near_surface"


def test_two_sphere_geometry_checks():
    cp = CoulombProvider((0.0, 0.0, 0.5))
    with pytest.raises(InvariantError):
        two_sphere_composite(cp, 5.0, 3.0, (20.0, 0, 0), 0.0)
    with pytest.raises(InvariantError):
        two_sphere_composite(cp, 2.0, 5.0, (4.0, 0, 0), 0.0)
    with pytest.raises(InvariantError):
        two_sphere_composite(CoulombProvider((0.0, 0.0, 3.0)), 2.0, 5.0, (20.0, 0, 0), 0.0)


def test_identity_geometry_check():
    with pytest.raises(InvariantError):
        identity_check(ring(1.25), SpacetimePoint(20.0, 0.0, 0.0), R_sigma=10.0)


def test_steady_time():
    assert steady_time((3.0, 4.0, 0.0), 10.0, 1.5) == pytest.approx(5 + 20 + 1.5 + 2)


@pytest.mark.parametrize("r0", [0.875, 1.25])
def test_analytic_provider_matches_finite_differences(r0):
    cfg = ring(r0, amplitude=(0.3, 0.2, 1.0))
    q = QuadratureSpec()
    ev = np.array([[20.0, 5.0, 3.0, 40.0], [-7.0, 9.0, -30.0, 60.0]])
    dirs = np.array([[0.6, 0.0, 0.8], [0.0, -1.0, 0.0]])
    a = AnalyticProvider(cfg, q)(ev, dirs)
    f = FiniteDifferenceProvider(cfg, q, h=1e-3)(ev, dirs)
    for i in range(2):
        for blk in (slice(0, 3), slice(3, 6), slice(6, 9)):
            assert np.linalg.norm(a[i, blk] - f[i, blk]) <= 1e-4 * np.linalg.norm(a[i, blk])


def test_source_term_is_curl_form_far_field():
    cfg = ring(0.875)
    ev = np.array([[60.0, 20.0, 30.0, 90.0]])
    B = field_batch(cfg, ev, warn=False).B[0]
    assert np.linalg.norm(source_term(cfg, ev) - B) <= 0.05 * np.linalg.norm(B)


def test_identity_holds_for_compact_observer_and_sphere():
    cfg = ring(0.875)
    d = identity_check(cfg, SpacetimePoint.spherical(6.0, 1.0, 0.3), R_sigma=12.0, n_theta=32, n_phi=64)
    assert d.residual <= 0.05

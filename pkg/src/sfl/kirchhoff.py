"""Source and surface terms of the retarded solution for B.

For each Cartesian component B_k the wave equation solution inside a closed
surface splits into the retarded volume integral of curl j and the surface
integral

    (1/4 pi) \\oint dS [ n.grad B_k / R + (n.Rhat)( B_k / R^2 + dB_k/dt / R ) ]

with every field value taken at t_P - R, R = |x_P - x_S| and
Rhat = (x_S - x_P)/R. With outward normals and the observer inside, the two
terms add up to the field at the observer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InvariantError, SourceConfig, SpacetimePoint
from .solver import (QuadratureSpec, _events, _is_zero, build_cells, conventional_batch,
                     field_batch, provider_batch)


@dataclass(frozen=True)
class SurfaceMesh:
    """Sphere with a (theta, phi) product grid about ``axis``.

    Each theta cell is integrated with Gauss-Legendre nodes in cos(theta);
    ``sub`` fixes how many (None picks them from the phase variation).
    ``orientation`` is +1 for outward normals and -1 for inward ones.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    n_theta: int = 64
    n_phi: int = 128
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    orientation: int = 1
    band: tuple[float, float] | None = None
    band_factor: int = 4

    def __post_init__(self):
        if not self.radius > 0 or self.n_theta < 2 or self.n_phi < 2:
            raise InvariantError("mesh_geometry", "radius > 0 and at least 2x2 cells required")
        if self.orientation not in (1, -1):
            raise InvariantError("mesh_orientation", "orientation must be +1 or -1")

    def theta_edges(self) -> np.ndarray:
        edges = np.linspace(0.0, math.pi, self.n_theta + 1)
        if self.band is None:
            return edges
        lo, hi = self.band
        out = [0.0]
        for a, b in zip(edges[:-1], edges[1:]):
            if hi >= a and lo <= b:
                out.extend(np.linspace(a, b, self.band_factor + 1)[1:])
            else:
                out.append(b)
        return np.asarray(out)

    @property
    def cell_diameter(self) -> float:
        return self.radius * max(np.diff(self.theta_edges()).max(), 2 * math.pi / self.n_phi)

    def _frame(self):
        a = np.asarray(self.axis, float)
        a = a / np.linalg.norm(a)
        helper = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
        e1 = np.cross(a, helper)
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(a, e1), a

    def nodes(self, k_max: float = 0.0, x_P=None, sub: int | None = 1, spread: float = 0.0):
        """(points, weights, oriented unit normals).

        When ``sub`` is None the Gauss order of each theta cell follows the
        variation of k_max*|x_P - x_S| across it plus ``spread`` radians per
        unit angle for the field's own angular structure.
        """
        te = self.theta_edges()
        mu_e = np.cos(te)
        c = np.asarray(self.center, float)
        d = 0.0 if x_P is None else float(np.dot(np.asarray(x_P, float) - c, self._frame()[2]))
        rho = 0.0 if x_P is None else float(np.linalg.norm(np.asarray(x_P, float) - c))
        mus, wmu = [], []
        for a, b in zip(mu_e[:-1], mu_e[1:]):
            if sub is None:
                D = lambda mu: math.sqrt(max(rho**2 + self.radius**2 - 2 * d * self.radius * mu, 0.0))
                dphase = k_max * abs(D(a) - D(b)) + spread * abs(math.acos(b) - math.acos(a))
                n = int(min(96, max(2, math.ceil(0.5 * dphase) + 3)))
            else:
                n = sub
            x, wx = np.polynomial.legendre.leggauss(n)
            mus.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            wmu.append(0.5 * (a - b) * wx)
        mu = np.concatenate(mus)
        wm = np.concatenate(wmu)
        ph = (np.arange(self.n_phi) + 0.5) * 2 * math.pi / self.n_phi
        MU, PH = np.meshgrid(mu, ph, indexing="ij")
        W = np.outer(wm, np.full(self.n_phi, 2 * math.pi / self.n_phi)) * self.radius**2
        st = np.sqrt(1 - MU**2)
        e1, e2, e3 = self._frame()
        nrm = (st * np.cos(PH))[..., None] * e1 + (st * np.sin(PH))[..., None] * e2 + MU[..., None] * e3
        nrm = nrm.reshape(-1, 3)
        return c + self.radius * nrm, W.ravel(), self.orientation * nrm


# -- field providers ----------------------------------------------------------

class AnalyticProvider:
    """B, dB/dt and directional derivatives from the retarded vector
    potential differentiated cell by cell."""

    def __init__(self, source, q: QuadratureSpec | None = None, jobs: int = 1):
        self.source = source
        self.q = q or QuadratureSpec()
        self.cells = build_cells(source, self.q)
        self.jobs = jobs
        self.max_frequency = source.max_frequency
        self.r_max = source.r_max

    def __call__(self, events, dirs):
        return provider_batch(self.source, events, dirs, self.q, self.jobs, cells=self.cells)


class FiniteDifferenceProvider:
    """Same quantities from finite differences of solver field samples."""

    def __init__(self, source, q: QuadratureSpec | None = None, h: float = 1e-2, jobs: int = 1):
        self.source = source
        self.q = q or QuadratureSpec()
        self.h = h
        self.jobs = jobs
        self.max_frequency = source.max_frequency
        self.r_max = source.r_max

    def _B(self, ev):
        return field_batch(self.source, ev, self.q, jobs=self.jobs, warn=False,
                           with_error=False).B

    def __call__(self, events, dirs):
        ev = _events(events)
        d = np.asarray(dirs, float)
        h = self.h
        dt = np.zeros(4)
        dt[3] = h
        sp = np.concatenate([d * h, np.zeros((len(d), 1))], axis=1)
        B = self._B(ev)
        Bt = (self._B(ev + dt) - self._B(ev - dt)) / (2 * h)
        Bn = (self._B(ev + sp) - self._B(ev - sp)) / (2 * h)
        return np.concatenate([B, Bt, Bn], axis=1)


class CoulombProvider:
    """Static field q (x - x0)/|x - x0|^3 of a charge at x0."""

    max_frequency = 0.0

    def __init__(self, x0, charge: float = 1.0):
        self.x0 = np.asarray(x0, float)
        self.charge = charge
        self.r_max = float(np.linalg.norm(self.x0))

    def __call__(self, events, dirs):
        ev = _events(events)
        d = np.asarray(dirs, float)
        r = ev[:, :3] - self.x0
        rn = np.linalg.norm(r, axis=1)[:, None]
        B = self.charge * r / rn**3
        rd = np.sum(r * d, axis=1)[:, None]
        Bn = self.charge * (d / rn**3 - 3 * r * rd / rn**5)
        return np.concatenate([B, np.zeros_like(B), Bn], axis=1)


class ZeroProvider:
    max_frequency = 0.0
    r_max = 0.0

    def __call__(self, events, dirs):
        return np.zeros((_events(events).shape[0], 9))


# -- terms --------------------------------------------------------------------

def _xyz(P) -> np.ndarray:
    if isinstance(P, SpacetimePoint):
        return np.array([P.x, P.y, P.z], float)
    return np.asarray(P, float)[:3]


def aligned_mesh(radius: float, x_P, orientation: int = 1, n_theta: int = 64,
                 n_phi: int = 128, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Mesh whose polar axis points at the observer, so the retarded phase
    varies along theta only."""
    v = _xyz(x_P) - np.asarray(center, float)
    nv = np.linalg.norm(v)
    axis = tuple(v / nv) if nv > 0 else (0.0, 0.0, 1.0)
    return SurfaceMesh(tuple(center), radius, n_theta, n_phi, axis, orientation)


def boundary_term(field_provider, mesh: SurfaceMesh, P, t_P: float,
                  sub: int | None = None) -> np.ndarray:
    """Kirchhoff surface integral for the three components of B at (x_P, t_P)."""
    xp = _xyz(P)
    dist = abs(np.linalg.norm(xp - np.asarray(mesh.center)) - mesh.radius)
    if dist < mesh.cell_diameter:
        raise InvariantError("observer_near_surface",
                             f"observer within one cell diameter ({mesh.cell_diameter:.3g}) of the surface")
    k = float(getattr(field_provider, "max_frequency", 0.0))
    spread = 2.0 * (1.0 + k * float(getattr(field_provider, "r_max", 0.0)))
    pts, w, nrm = mesh.nodes(k, xp, sub=sub, spread=spread)
    dv = pts - xp
    R = np.linalg.norm(dv, axis=1)
    ev = np.concatenate([pts, (t_P - R)[:, None]], axis=1)
    vals = field_provider(ev, nrm)
    B, Bt, Bn = vals[:, :3], vals[:, 3:6], vals[:, 6:9]
    cos_n = np.sum(nrm * dv, axis=1) / R
    f = w[:, None] * (Bn / R[:, None] + cos_n[:, None] * (B / R[:, None] ** 2 + Bt / R[:, None]))
    return np.array([math.fsum(f[:, i]) for i in range(3)]) / (4 * math.pi)


def source_term(source, P, q: QuadratureSpec | None = None, jobs: int = 1) -> np.ndarray:
    """Retarded volume integral of curl j / R at one event (x, y, z, t)."""
    ev = _events(P)
    if _is_zero(source):
        return np.zeros(3)
    return conventional_batch(source, ev, q or QuadratureSpec(), jobs)[0]


@dataclass
class TermDecomposition:
    source_term: np.ndarray
    boundary_term: np.ndarray
    direct_field: np.ndarray
    residual: float
    err_est: float = 0.0

    @property
    def ratio(self) -> float:
        s = np.linalg.norm(self.source_term)
        return float(np.linalg.norm(self.boundary_term) / s) if s > 0 else math.inf


def steady_time(x_P, R_sigma: float, r_max: float) -> float:
    """Earliest t_P at which every retarded time on the sphere sees the
    source in steady state."""
    return float(np.linalg.norm(_xyz(x_P)) + 2 * R_sigma + r_max + 2.0)


def identity_check(source, P, t_P: float | None = None, R_sigma: float | None = None,
                   q: QuadratureSpec | None = None, n_theta: int = 64, n_phi: int = 128,
                   jobs: int = 1, sub: int | None = None) -> TermDecomposition:
    xp = _xyz(P)
    RP = float(np.linalg.norm(xp))
    R_sigma = 2 * RP if R_sigma is None else R_sigma
    if not RP < R_sigma or not source.r_max < R_sigma:
        raise InvariantError("identity_geometry", "observer and source must lie inside the sphere")
    if t_P is None:
        t_P = steady_time(xp, R_sigma, source.r_max)
    q = q or QuadratureSpec()
    ev = np.array([[*xp, t_P]])
    if _is_zero(source):
        z = np.zeros(3)
        return TermDecomposition(z, z.copy(), z.copy(), 0.0)
    fb = field_batch(source, ev, q, jobs=jobs, warn=False)
    direct = fb.B[0]
    src = source_term(source, ev, q, jobs)
    mesh = aligned_mesh(R_sigma, xp, 1, n_theta, n_phi)
    bnd = boundary_term(AnalyticProvider(source, q, jobs), mesh, xp, t_P, sub=sub)
    nd = np.linalg.norm(direct)
    res = float(np.linalg.norm(direct - src - bnd) / nd) if nd > 0 else 0.0
    return TermDecomposition(src, bnd, direct, res, float(fb.err_est[0]))


def two_sphere_composite(field_provider, R_inner: float, R_outer: float, P_outside,
                         t_P: float, n_theta: int = 64, n_phi: int = 128,
                         sub: int | None = None, mode: str = "exterior"):
    """Inner (inward normal) and outer (outward normal) surface integrals and
    their sum for an observer outside the closed shell surface."""
    xp = _xyz(P_outside)
    rp = float(np.linalg.norm(xp))
    if not 0 < R_inner < R_outer:
        raise InvariantError("two_sphere_radii", "need 0 < R_inner < R_outer")
    if mode == "exterior" and not rp > R_outer:
        raise InvariantError("two_sphere_observer", "observer must lie outside the outer sphere")
    if mode == "between" and not R_inner < rp < R_outer:
        raise InvariantError("two_sphere_observer", "observer must lie between the spheres")
    if getattr(field_provider, "r_max", 0.0) >= R_inner:
        raise InvariantError("two_sphere_source", "source must lie strictly inside the inner sphere")
    inner = boundary_term(field_provider, aligned_mesh(R_inner, xp, -1, n_theta, n_phi), xp, t_P, sub)
    outer = boundary_term(field_provider, aligned_mesh(R_outer, xp, 1, n_theta, n_phi), xp, t_P, sub)
    return inner + outer, inner, outer


def dominance_scan(source, radii, theta_P: float, phi_P: float = 0.0,
                   q: QuadratureSpec | None = None, sigma_factor: float = 2.0,
                   n_theta: int = 64, n_phi: int = 128, jobs: int = 1):
    """Identity decomposition along a fixed direction for several distances."""
    rows = []
    for R in radii:
        P = SpacetimePoint.spherical(R, theta_P, phi_P)
        d = identity_check(source, P, None, sigma_factor * R, q, n_theta, n_phi, jobs)
        rows.append((R, sigma_factor * R, d))
    return rows

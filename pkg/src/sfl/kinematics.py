"""Retarded times of circularly moving source points and cusp geometry.

A point on the orbit emits at time t and is heard at the event (x_P, t_P)
whenever g(t) = t_P - t - R(t) vanishes (c = 1). Above the light cylinder
g is not monotone and up to three emission times contribute at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .model import InvariantError, SpacetimePoint

N_SCAN = 2048
TOL_ROOT = 1e-10
TOL_MERGE = 1e-6
K_PERIODS = 3

OUTSIDE = "outside_envelope"
INSIDE = "inside_envelope"
NEAR_CUSP = "near_cusp"


class NearCuspWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Orbit:
    radius: float
    omega: float = 1.0
    phi0: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvariantError("orbit_radius", f"radius must be > 0, got {self.radius}")

    @property
    def speed(self) -> float:
        return self.radius * abs(self.omega)

    @property
    def period(self) -> float:
        # a static source has no period; any positive scan unit works
        return 2 * math.pi / abs(self.omega) if self.omega else 2 * math.pi

    def position(self, t):
        ang = self.omega * np.asarray(t, float) + self.phi0
        return np.stack([self.radius * np.cos(ang), self.radius * np.sin(ang),
                         np.full_like(ang, self.z)], axis=-1)


def _as_xyz(x_P) -> np.ndarray:
    if isinstance(x_P, SpacetimePoint):
        return np.array([x_P.x, x_P.y, x_P.z], float)
    return np.asarray(x_P, float).reshape(3)


class RetardedDistance:
    """R(t) = |x(t) - x_P| and its first two time derivatives in closed form."""

    def __init__(self, orb: Orbit, x_P):
        xp = _as_xyz(x_P)
        self.orbit = orb
        self.rho = math.hypot(xp[0], xp[1])
        self.phi_P = math.atan2(xp[1], xp[0])
        self.dz = xp[2] - orb.z
        self.b = orb.radius**2 + self.rho**2 + self.dz**2
        self.c = 2 * orb.radius * self.rho
        if self.b - self.c <= 0:
            raise InvariantError("observer_on_orbit", "x_P lies on the orbit circle (R = 0)")

    @property
    def R_min(self) -> float:
        return math.sqrt(self.b - self.c)

    @property
    def R_max(self) -> float:
        return math.sqrt(self.b + self.c)

    def _psi(self, t):
        return self.orbit.omega * np.asarray(t, float) + self.orbit.phi0 - self.phi_P

    def R(self, t):
        return np.sqrt(self.b - self.c * np.cos(self._psi(t)))

    def Rdot(self, t):
        psi = self._psi(t)
        return 0.5 * self.c * self.orbit.omega * np.sin(psi) / np.sqrt(self.b - self.c * np.cos(psi))

    def Rddot(self, t):
        psi = self._psi(t)
        R = np.sqrt(self.b - self.c * np.cos(psi))
        rd = 0.5 * self.c * self.orbit.omega * np.sin(psi) / R
        return (0.5 * self.c * self.orbit.omega**2 * np.cos(psi) - rd**2) / R

    __call__ = R


def retarded_distance(orb: Orbit, x_P) -> RetardedDistance:
    return RetardedDistance(orb, x_P)


@dataclass(frozen=True)
class RootSet:
    roots: tuple[float, ...]
    region: str
    window: tuple[float, float]

    @property
    def count(self) -> int:
        return len(self.roots)


def _scan_roots(rd: RetardedDistance, t_P: float, lo: float, hi: float, n: int,
                polish: bool) -> list[float]:
    t = np.linspace(lo, hi, n)
    g = t_P - t - rd.R(t)
    gp = -1.0 - rd.Rdot(t)

    def gf(s):
        return t_P - s - float(rd.R(s))

    def gpf(s):
        return -1.0 - float(rd.Rdot(s))

    roots = []
    for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0):
        a, b = t[i], t[i + 1]
        if g[i] == 0:
            roots.append(a)
        elif g[i + 1] != 0:
            roots.append(brentq(gf, a, b, xtol=1e-15, rtol=1e-15) if polish else 0.5 * (a + b))
    # tangential pairs hidden between two samples of equal sign
    for i in np.flatnonzero(np.sign(gp[:-1]) * np.sign(gp[1:]) < 0):
        if np.sign(g[i]) != np.sign(g[i + 1]) or g[i] == 0 or g[i + 1] == 0:
            continue
        a, b = t[i], t[i + 1]
        te = brentq(gpf, a, b, xtol=1e-15, rtol=1e-15)
        ge = gf(te)
        if np.sign(ge) != np.sign(g[i]) and ge != 0:
            if polish:
                roots += [brentq(gf, a, te, xtol=1e-15, rtol=1e-15),
                          brentq(gf, te, b, xtol=1e-15, rtol=1e-15)]
            else:
                roots += [0.5 * (a + te), 0.5 * (te + b)]
    return sorted(roots)


def retarded_times(orb: Orbit, P: SpacetimePoint, n_scan: int = N_SCAN,
                   k_periods: int = K_PERIODS, tol_merge: float = TOL_MERGE,
                   warn: bool = True) -> RootSet:
    """All emission times t in [0, t_P) heard at the event P."""
    t_P = float(P.t)
    if not t_P > 0:
        raise InvariantError("t_P_positive", f"t_P must be > 0, got {t_P}")
    rd = RetardedDistance(orb, P)
    T = orb.period
    window = (max(0.0, t_P - rd.R_max - k_periods * T), t_P)
    # roots can only sit where t_P - t lies between R_min and R_max
    lo = max(window[0], t_P - rd.R_max - 1e-9)
    hi = min(window[1], t_P - rd.R_min + 1e-9)
    roots: list[float] = []
    if hi > lo:
        n = max(16, int(math.ceil((hi - lo) / T * n_scan)) + 1)
        roots = [r for r in _scan_roots(rd, t_P, lo, hi, n, polish=True) if 0 <= r < t_P]
    near = any(b - a < tol_merge for a, b in zip(roots, roots[1:]))
    if near:
        region = NEAR_CUSP
        if warn:
            warnings.warn(f"retarded roots closer than {tol_merge:g}: ill-conditioned near cusp",
                          NearCuspWarning, stacklevel=2)
    else:
        region = INSIDE if len(roots) >= 2 else OUTSIDE
    return RootSet(tuple(roots), region, window)


def dense_root_count(orb: Orbit, P: SpacetimePoint, samples_per_period: int = 10_000) -> int:
    """Plain sign-change count of g on a dense grid over all feasible times."""
    rd = RetardedDistance(orb, P)
    t_P = float(P.t)
    lo = max(0.0, t_P - rd.R_max - 1e-9)
    hi = t_P - rd.R_min + 1e-9
    if hi <= lo:
        return 0
    t = np.linspace(lo, hi, max(16, int((hi - lo) / orb.period * samples_per_period)) + 1)
    g = t_P - t - rd.R(t)
    return int(np.count_nonzero(np.sign(g[:-1]) != np.sign(g[1:])))


def cusp_cone_angle(orb: Orbit) -> float:
    v = orb.speed
    if v < 1:
        raise InvariantError("cusp_requires_superluminal", f"r*omega/c = {v:g} < 1 has no cusp")
    return math.asin(1.0 / v)


def cusp_condition_residual(orb: Orbit, P: SpacetimePoint, t):
    """(Rdot + c, Rddot); both vanish together only on the cusp."""
    rd = RetardedDistance(orb, P)
    return rd.Rdot(t) + 1.0, rd.Rddot(t)


def _min_rdot(orb: Orbit, xp) -> tuple[float, float]:
    rd = RetardedDistance(orb, xp)
    # Rdot depends on psi only; its minimum sits in (pi, 2pi) for omega > 0
    sgn = 1.0 if orb.omega >= 0 else -1.0

    def f(psi):
        return sgn * 0.5 * rd.c * orb.omega * math.sin(psi) / math.sqrt(rd.b - rd.c * math.cos(psi))

    res = minimize_scalar(f, bounds=(math.pi, 2 * math.pi), method="bounded",
                          options={"xatol": 1e-13})
    psi = res.x
    if sgn < 0:
        psi = 2 * math.pi - psi
    t = (psi + rd.phi_P - orb.phi0) / orb.omega
    return float(rd.Rdot(t)), float(t)


def polish_cusp(orb: Orbit, R_P: float, phi_P: float = 0.0, upper: bool = True):
    """Polar angle at distance R_P where min_t Rdot = -c, and the emission
    time (modulo one period) realising it.

    Returns (theta_P, t) with the observer on the cusp sheet above the
    orbital plane (or below if ``upper`` is False).
    """
    theta0 = cusp_cone_angle(orb)

    def point(theta):
        return SpacetimePoint.spherical(R_P, theta, phi_P)

    def f(theta):
        return _min_rdot(orb, point(theta))[0] + 1.0

    # min Rdot = -1 separates the 1-root and 3-root sides
    a, b = max(1e-6, theta0 - 0.5 * theta0), min(math.pi / 2, theta0 + 0.5 * (math.pi / 2 - theta0) + 0.2)
    th = brentq(f, a, b, xtol=1e-15, rtol=1e-15)
    if not upper:
        th = math.pi - th
    return th, _min_rdot(orb, point(th))[1]


def envelope_section(orb: Orbit, t_P: float, plane: str = "xy", n_rays: int = 36,
                     n_samples: int = 64, tol: float = 1e-9, azimuth: float = 0.0):
    """Points where the root count jumps along rays from the orbit centre.

    ``plane`` is "xy" (the orbital plane) or "meridian" (the plane holding
    the rotation axis at ``azimuth``). Returns a list of dicts with the
    crossing position and the root counts on either side.
    """
    if not orb.speed > 1:
        raise InvariantError("envelope_requires_superluminal", "envelope exists only for r*omega > c")
    out = []
    s_max = t_P + orb.radius
    s = np.linspace(1e-3, s_max, n_samples)
    for beta in np.linspace(0, 2 * math.pi, n_rays, endpoint=False):
        if plane == "xy":
            d = np.array([math.cos(beta), math.sin(beta), 0.0])
        elif plane == "meridian":
            d = np.array([math.cos(azimuth) * math.cos(beta), math.sin(azimuth) * math.cos(beta),
                          math.sin(beta)])
        else:
            raise ValueError(f"unknown plane {plane!r}")
        base = np.array([0.0, 0.0, orb.z])

        def count(si):
            x = base + si * d
            try:
                return retarded_times(orb, SpacetimePoint(*x, t_P), warn=False).count
            except InvariantError:
                return -1

        counts = [count(si) for si in s]
        for i in range(n_samples - 1):
            c0, c1 = counts[i], counts[i + 1]
            if c0 == c1 or c0 < 0 or c1 < 0:
                continue
            a, b = s[i], s[i + 1]
            while b - a > tol:
                mid = 0.5 * (a + b)
                if count(mid) == c0:
                    a = mid
                else:
                    b = mid
            x = base + 0.5 * (a + b) * d
            out.append({"x": x[0], "y": x[1], "z": x[2], "t_P": t_P,
                        "n_before": c0, "n_after": c1})
    return out


def filament_locator(omega: float, theta_P: float, phi_P: float) -> tuple[float, float]:
    """Source radius and azimuth that approach the observer at c with zero
    acceleration in the far zone."""
    s = math.sin(theta_P)
    if abs(s) < 1e-15:
        raise InvariantError("filament_polar_angle", "theta_P on the rotation axis has no filament")
    return 1.0 / (omega * abs(s)), (phi_P + 1.5 * math.pi) % (2 * math.pi)


def in_beam(theta_P: float, r_l: float, r_u: float, omega: float = 1.0) -> bool:
    """True when some radius in [r_l, r_u] hosts the filament for theta_P."""
    d = abs(theta_P - math.pi / 2)
    lo = math.acos(min(1.0, 1.0 / (r_l * omega))) if r_l * omega >= 1 else 0.0
    if r_u * omega < 1:
        return False
    hi = math.acos(1.0 / (r_u * omega))
    if r_l * omega < 1:
        lo = 0.0
    return lo <= d <= hi

"""Rotating polarization sources and their pointwise densities.

Everything here works in dimensionless units with c = 1 and, for configs
produced by :mod:`sfl.config`, omega = 1, so the light cylinder is r = 1.
The pattern is

    P_{r,phi,z}(r, phi, z, t) = s_{r,phi,z}(r, z) cos(m (phi - omega t)) cos(Omega t)

switched on at t = 0. All source functions accept scalar or array valued
:class:`SpacetimePoint` instances and broadcast like numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SI_C = 299_792_458.0
GAUSSIAN_FLOOR = 1e-8
TOP_HAT_STEP = 1e-4

_GAUSS_CUT = math.sqrt(2.0 * math.log(1.0 / GAUSSIAN_FLOOR))
_FAMILIES = ("gaussian", "top_hat")


class InvariantError(ValueError):
    """A configuration violates a named model invariant."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class Shape:
    """One-dimensional amplitude profile; ``width`` is sigma for gaussian
    and the full width for top_hat."""

    family: str = "gaussian"
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvariantError("profile_family", f"unknown family {self.family!r}")
        if not self.width > 0:
            raise InvariantError("profile_width", f"width must be positive, got {self.width}")

    @property
    def half_extent(self) -> float:
        if self.family == "gaussian":
            return _GAUSS_CUT * self.width
        return 0.5 * self.width

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.half_extent, self.center + self.half_extent

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        d = u - self.center
        inside = np.abs(d) <= self.half_extent * (1 + 1e-12)
        if self.family == "gaussian":
            return np.where(inside, np.exp(-0.5 * (d / self.width) ** 2), 0.0)
        return inside.astype(float)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "gaussian":
            return -(u - self.center) / self.width**2 * self(u)
        # weak derivative of the step edges
        h = TOP_HAT_STEP * self.width
        return (self(u + h) - self(u - h)) / (2.0 * h)


@dataclass(frozen=True)
class SourceConfig:
    """Generic rotating source.

    ``amplitude`` holds the (s_r, s_phi, s_z) weights; each component shares
    the separable shape ``radial(r) * axial(z)``.
    """

    m: int = 2
    omega: float = 1.0
    capital_omega: float = 1.0 / 6.0
    radial: Shape = Shape("gaussian", 1.25, 0.01)
    axial: Shape = Shape("gaussian", 0.0, 0.05)
    amplitude: tuple[float, float, float] = (0.0, 0.0, 1.0)
    switch_on_time: float = 0.0

    @property
    def r_l(self) -> float:
        return self.radial.support[0]

    @property
    def r_u(self) -> float:
        return self.radial.support[1]

    @property
    def z_range(self) -> tuple[float, float]:
        return self.axial.support

    @property
    def nu(self) -> float:
        """Temporal rate of the rotating phase, m * omega."""
        return self.m * self.omega

    @property
    def max_frequency(self) -> float:
        return self.nu + abs(self.capital_omega)

    @property
    def r_max(self) -> float:
        """Largest distance of any source point from the origin."""
        z0, z1 = self.z_range
        return math.hypot(self.r_u, max(abs(z0), abs(z1)))

    @property
    def is_smooth(self) -> bool:
        return self.radial.family == "gaussian" and self.axial.family == "gaussian"

    @property
    def is_zero(self) -> bool:
        return not any(self.amplitude)

    def speed(self, r: float | None = None) -> float:
        """Pattern speed r*omega/c at ``r`` (default: radial profile center)."""
        return (self.radial.center if r is None else r) * self.omega

    def validate(self, mode: str | None = None) -> "SourceConfig":
        if int(self.m) != self.m or self.m < 1:
            raise InvariantError("m_positive_integer", f"m must be an integer >= 1, got {self.m}")
        if self.omega < 0 or not math.isfinite(self.omega):
            raise InvariantError("omega_nonnegative", f"omega must be >= 0, got {self.omega}")
        if len(self.amplitude) != 3:
            raise InvariantError("amplitude_components", "amplitude needs (s_r, s_phi, s_z)")
        if not self.r_l > 0:
            raise InvariantError("support_r_l_positive", f"r_l = {self.r_l:.6g} must be > 0")
        if mode == "superluminal" and not self.r_l * self.omega > 1.0:
            raise InvariantError(
                "support_superluminal",
                f"r_l*omega/c = {self.r_l * self.omega:.6g} must exceed 1 for a superluminal run",
            )
        if mode == "subluminal" and not self.r_u * self.omega < 1.0:
            raise InvariantError(
                "support_subluminal",
                f"r_u*omega/c = {self.r_u * self.omega:.6g} must be below 1 for a subluminal run",
            )
        if mode not in (None, "auto", "superluminal", "subluminal"):
            raise InvariantError("run_mode", f"unknown run mode {mode!r}")
        return self

    def scaled(self, factor: float) -> "SourceConfig":
        return replace(self, amplitude=tuple(factor * a for a in self.amplitude))

    def with_speed(self, v: float) -> "SourceConfig":
        """Same geometry, omega chosen so the profile center moves at ``v``."""
        return replace(self, omega=v / self.radial.center)

    def profile(self, r, z):
        """Cylindrical (s_r, s_phi, s_z) at (r, z), shape (3, ...)."""
        f = self.radial(r) * self.axial(z)
        return np.stack([a * f for a in self.amplitude])

    def profile_gradient(self, r, z):
        """(d s/d r, d s/d z), each of shape (3, ...)."""
        fr, fz = self.radial(r), self.axial(z)
        dr = self.radial.derivative(r) * fz
        dz = fr * self.axial.derivative(z)
        return (np.stack([a * dr for a in self.amplitude]),
                np.stack([a * dz for a in self.amplitude]))


@dataclass(frozen=True)
class SpacetimePoint:
    """Event (x, y, z, t); components may be numpy arrays of one shape."""

    x: float
    y: float
    z: float
    t: float = 0.0

    @classmethod
    def cylindrical(cls, r, phi, z, t=0.0) -> "SpacetimePoint":
        return cls(r * np.cos(phi), r * np.sin(phi), z, t)

    @classmethod
    def spherical(cls, R, theta, phi, t=0.0) -> "SpacetimePoint":
        s = R * np.sin(theta)
        return cls(s * np.cos(phi), s * np.sin(phi), R * np.cos(theta), t)

    @property
    def r(self):
        return np.hypot(self.x, self.y)

    @property
    def phi(self):
        return np.arctan2(self.y, self.x)

    @property
    def R(self):
        return np.sqrt(self.x**2 + self.y**2 + self.z**2)

    @property
    def theta(self):
        return np.arctan2(self.r, self.z)

    @property
    def position(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.x, self.y, self.z), axis=-1).astype(float)


def cylindrical_to_cartesian(vec, phi):
    """Rotate cylindrical components (3, ...) at azimuth ``phi`` to Cartesian."""
    vr, vp, vz = vec
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([vr * c - vp * s, vr * s + vp * c, vz * np.ones_like(c)])


def _pattern(cfg: SourceConfig, p: SpacetimePoint):
    r, z, t = p.r, np.asarray(p.z, float), np.asarray(p.t, float)
    a = cfg.m * (p.phi - cfg.omega * t)
    wt = cfg.capital_omega * t
    on = t >= cfg.switch_on_time
    return r, z, on, np.cos(a), np.sin(a), np.cos(wt), np.sin(wt)


def polarization(cfg: SourceConfig, p: SpacetimePoint):
    """Cylindrical (P_r, P_phi, P_z)."""
    r, z, on, ca, _, ct, _ = _pattern(cfg, p)
    return np.where(on, cfg.profile(r, z) * ca * ct, 0.0)


def polarization_current(cfg: SourceConfig, p: SpacetimePoint):
    """Analytic dP/dt in cylindrical components."""
    r, z, on, ca, sa, ct, st = _pattern(cfg, p)
    g = cfg.nu * sa * ct - cfg.capital_omega * ca * st
    return np.where(on, cfg.profile(r, z) * g, 0.0)


def bound_charge_density(cfg: SourceConfig, p: SpacetimePoint):
    """rho = -div P."""
    r, z, on, ca, sa, ct, _ = _pattern(cfg, p)
    s = cfg.profile(r, z)
    ds_dr, ds_dz = cfg.profile_gradient(r, z)
    d_cos = -(s[0] / r + ds_dr[0] + ds_dz[2])
    d_sin = cfg.m * s[1] / r
    return np.where(on, (d_cos * ca + d_sin * sa) * ct, 0.0)


def curl_current(cfg: SourceConfig, p: SpacetimePoint):
    """Cylindrical components of curl j."""
    r, z, on, ca, sa, ct, st = _pattern(cfg, p)
    nu, om = cfg.nu, cfg.capital_omega
    g = nu * sa * ct - om * ca * st
    h = nu * ca * ct + om * sa * st  # (1/m) d g / d phi
    c_g, c_h = _curl_coefficients(cfg, r, z)
    return np.where(on, c_g * g + c_h * h, 0.0)


def _curl_coefficients(cfg: SourceConfig, r, z):
    # curl(s g) with g(phi, t): split into the parts multiplying g and h
    s = cfg.profile(r, z)
    ds_dr, ds_dz = cfg.profile_gradient(r, z)
    m = cfg.m
    c_g = np.stack([-ds_dz[1], ds_dz[0] - ds_dr[2], s[1] / r + ds_dr[1]])
    c_h = np.stack([m * s[2] / r, np.zeros_like(s[0]), -m * s[0] / r])
    return c_g, c_h


# -- electrode machine --------------------------------------------------------

@dataclass(frozen=True)
class MachineConfig:
    """Electrode array on a dielectric arc, SI units."""

    n_electrodes: int = 41
    electrode_width: float = 42.6e-3
    electrode_pitch: float = 44.6e-3
    arc_radius: float = 10.025
    dielectric_thickness: float = 10e-3
    dielectric_width: float = 50e-3
    V0: float = 1.0
    delta_t: float = 148.8e-12
    m_omega: float = 2 * math.pi * 552.645e6
    capital_omega: float = 2 * math.pi * 46.042e6

    @property
    def speed(self) -> float:
        return self.electrode_pitch / self.delta_t

    @property
    def v_over_c(self) -> float:
        return self.speed / SI_C

    @property
    def pattern_omega(self) -> float:
        """Angular speed of the pattern around the arc center (rad/s)."""
        return self.speed / self.arc_radius

    def with_speed(self, v_over_c: float) -> "MachineConfig":
        return replace(self, delta_t=self.electrode_pitch / (v_over_c * SI_C))

    def validate(self) -> "MachineConfig":
        if not self.delta_t > 0:
            raise InvariantError("delta_t_positive", f"delta_t must be > 0, got {self.delta_t}")
        if int(self.n_electrodes) != self.n_electrodes or self.n_electrodes < 2:
            raise InvariantError("n_electrodes", f"need at least 2 electrodes, got {self.n_electrodes}")
        for name in ("electrode_width", "electrode_pitch", "arc_radius",
                     "dielectric_thickness", "dielectric_width"):
            if not getattr(self, name) > 0:
                raise InvariantError("lengths_positive", f"{name} must be positive")
        return self


@dataclass(frozen=True)
class DiscreteSource:
    """Point-sampled polarization cells.

    Cell k carries P_k(t) = vector[k] * cos(alpha[k] - nu t) cos(Omega t) for
    t >= 0 over volume weight[k].
    """

    positions: np.ndarray
    weights: np.ndarray
    vectors: np.ndarray
    alpha: np.ndarray
    nu: float
    capital_omega: float
    v_over_c: float = float("nan")
    length_unit: float = 1.0
    electrode: np.ndarray | None = None
    builder: tuple | None = None

    @property
    def max_frequency(self) -> float:
        return abs(self.nu) + abs(self.capital_omega)

    @property
    def r_max(self) -> float:
        return float(np.max(np.linalg.norm(self.positions, axis=1)))

    def polarization(self, t):
        t = np.asarray(t, float)[..., None]
        amp = np.cos(self.alpha - self.nu * t) * np.cos(self.capital_omega * t)
        return np.where(t >= 0, amp, 0.0)[..., None] * self.vectors


def machine_to_source(mc: MachineConfig, length_unit: float | None = None,
                      n_along: int = 8, n_across: int = 2) -> DiscreteSource:
    """Discretize the electrode array into uniform axial polarization cells.

    Lengths are measured in ``length_unit`` metres (default c/omega for this
    machine's own pattern speed) and times in length_unit/c.
    """
    if not mc.delta_t > 0:
        raise InvariantError("delta_t_positive", f"delta_t must be > 0, got {mc.delta_t}")
    mc.validate()
    L = SI_C / mc.pattern_omega if length_unit is None else float(length_unit)
    T = L / SI_C
    nu = mc.m_omega * T
    om = mc.capital_omega * T

    # sub-cell midpoints inside one electrode footprint (arc length x radial)
    u = (np.arange(n_along) + 0.5) / n_along - 0.5
    v = (np.arange(n_across) + 0.5) / n_across - 0.5
    du, dv = np.meshgrid(u * mc.electrode_width, v * mc.dielectric_width, indexing="ij")
    du, dv = du.ravel(), dv.ravel()
    cell_volume = mc.electrode_width * mc.dielectric_width * mc.dielectric_thickness
    sub_volume = cell_volume / du.size

    pos, alpha, idx = [], [], []
    for j in range(int(mc.n_electrodes)):
        rho = mc.arc_radius + dv
        phi = (j * mc.electrode_pitch + du) / mc.arc_radius
        pos.append(np.stack([rho * np.cos(phi), rho * np.sin(phi), np.zeros_like(phi)], axis=1))
        alpha.append(np.full(du.size, mc.m_omega * j * mc.delta_t))
        idx.append(np.full(du.size, j))
    positions = np.concatenate(pos) / L
    n = positions.shape[0]
    vectors = np.zeros((n, 3))
    vectors[:, 2] = mc.V0 / (mc.dielectric_thickness / L)
    return DiscreteSource(
        positions=positions,
        weights=np.full(n, sub_volume / L**3),
        vectors=vectors,
        alpha=np.concatenate(alpha),
        nu=nu,
        capital_omega=om,
        v_over_c=mc.v_over_c,
        length_unit=L,
        electrode=np.concatenate(idx),
        builder=(mc, L, n_along, n_across),
    )


# -- compact element ----------------------------------------------------------

@dataclass(frozen=True)
class CompactElement:
    """Small co-rotating polarized cube used for single-element fields.

    ``polarization`` is given in the co-rotating cylindrical frame; the cube
    of side ``extent`` is sampled by ``n_sub``**3 moving point dipoles.
    """

    radius: float = 2.0
    z: float = 0.0
    phase: float = 0.0
    extent: float = 0.05
    polarization: tuple[float, float, float] = (0.0, 0.0, 1.0)
    amplitude: float = 1.0
    omega: float = 1.0
    capital_omega: float = 0.0
    n_sub: int = 3

    def scaled(self, factor: float) -> "CompactElement":
        return replace(self, amplitude=self.amplitude * factor)

    def sub_points(self):
        """(radius, azimuth at t=0, z, weight) of every sub-dipole."""
        u = ((np.arange(self.n_sub) + 0.5) / self.n_sub - 0.5) * self.extent
        dr, ds, dz = np.meshgrid(u, u, u, indexing="ij")
        r = self.radius + dr.ravel()
        phi0 = self.phase + ds.ravel() / self.radius
        w = np.full(r.size, self.extent**3 / r.size)
        return r, phi0, self.z + dz.ravel(), w

    def dipole(self, phi, t):
        """Cartesian dipole moment density at azimuth ``phi`` and time ``t``."""
        vec = cylindrical_to_cartesian(np.asarray(self.polarization, float)[:, None],
                                       np.atleast_1d(phi))
        amp = self.amplitude * np.cos(self.capital_omega * np.asarray(t))
        return vec * np.where(np.asarray(t) >= 0, amp, 0.0)

"""Scans over distance and angle, and the fits applied to them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .kinematics import cusp_cone_angle, Orbit
from .model import CompactElement, InvariantError, SourceConfig, SpacetimePoint
from .solver import FieldBatch, QuadratureSpec, element_fields, field_batch

MIN_SAMPLES = 64
FIT_ERR_MAX = 0.10
GRAD_NOISE = 0.20


class ScanWarning(RuntimeWarning):
    pass


@dataclass
class Fit:
    """log S = intercept - n log R (power law) or S = slope R + intercept."""

    n: float
    intercept: float
    r2: float
    slope: float = float("nan")
    intercept_stderr: float = float("nan")


@dataclass
class ScanResult:
    columns: tuple[str, ...]
    rows: list[tuple]
    fit: Fit | None
    fit_window: list[int]
    flags: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], float)


# -- observables --------------------------------------------------------------

def intensity(series, times=None, period: float | None = None) -> float:
    """Mean |E x B| over a sampled period.

    ``series`` is a FieldBatch or an (E, B) pair of (n, 3) arrays.
    """
    E, B = (series.E, series.B) if isinstance(series, FieldBatch) else series
    E, B = np.asarray(E, float), np.asarray(B, float)
    n = E.shape[0]
    if n < MIN_SAMPLES:
        raise InvariantError("intensity_sampling", f"need >= {MIN_SAMPLES} samples per period, got {n}")
    if times is not None and period is not None:
        t = np.asarray(times, float)
        span = t[-1] - t[0] + (t[1] - t[0])
        if span < period * (1 - 1e-9):
            raise InvariantError("intensity_sampling", "series does not cover a full period")
    return float(np.mean(np.linalg.norm(np.cross(E, B), axis=1)))


def peak_b2(series) -> float:
    B = series.B if isinstance(series, FieldBatch) else np.asarray(series[1])
    return float(np.max(np.sum(B**2, axis=1)))


def modulation_period(source) -> float:
    om = abs(source.capital_omega)
    return 2 * math.pi / om if om > 0 else 2 * math.pi / abs(source.nu)


def steady_start(source, R: float) -> float:
    return R + source.r_max + 2.0


def sample_series(source, x_P, q: QuadratureSpec, t0: float, n_samples: int = MIN_SAMPLES,
                  jobs: int = 1, period: float | None = None) -> FieldBatch:
    T = modulation_period(source) if period is None else period
    t = t0 + np.arange(n_samples) * T / n_samples
    ev = np.column_stack([np.tile(np.asarray(x_P, float), (n_samples, 1)), t])
    return field_batch(source, ev, q, jobs=jobs, warn=False)


def _direction(theta: float, phi: float) -> np.ndarray:
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def _intensity_at(source, x_P, q, n_samples, jobs):
    R = float(np.linalg.norm(x_P))
    fb = sample_series(source, x_P, q, steady_start(source, R), n_samples, jobs)
    return intensity(fb), peak_b2(fb), float(np.max(fb.err_est))


# -- fits ---------------------------------------------------------------------

def fit_power_law(rows) -> tuple[float, float, float]:
    """(n, intercept, R^2) of S = exp(intercept) R^-n by least squares in log-log."""
    arr = np.asarray(rows, float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise InvariantError("fit_rows", "need at least 3 (R, S) rows")
    R, S = arr[:, 0], arr[:, 1]
    if np.any(R <= 0) or np.any(S <= 0):
        raise InvariantError("fit_positive", "power-law fit needs positive R and S")
    x, y = np.log(R), np.log(S)
    if np.ptp(y) == 0:
        return 0.0, float(y[0]), 1.0
    res = stats.linregress(x, y)
    return float(-res.slope), float(res.intercept), float(min(1.0, max(0.0, res.rvalue**2)))


def _fit_window(radii, errs) -> list[int]:
    return [i for i in range(1, len(radii)) if errs[i] <= FIT_ERR_MAX]


# -- scans --------------------------------------------------------------------

def decay_scan(source, direction, radii, q: QuadratureSpec | None = None,
               n_samples: int = MIN_SAMPLES, jobs: int = 1) -> ScanResult:
    """Period-mean intensity along a fixed (theta_P, phi_P) and its decay exponent."""
    q = q or QuadratureSpec()
    radii = [float(r) for r in radii]
    r_u = getattr(source, "r_u", None) or source.r_max
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvariantError("radii_ascending", "radii must be strictly ascending")
    if radii[0] < 10 * r_u:
        raise InvariantError("radii_far_zone", f"radii must be >= 10 r_u = {10 * r_u:.4g}")
    d = _direction(*direction)
    rows, flags = [], []
    for R in radii:
        s, b2, err = _intensity_at(source, R * d, q, n_samples, jobs)
        rows.append((R, s, err, b2))
        if err > FIT_ERR_MAX:
            flags.append(f"R={R:g}: err_est {err:.3g} > {FIT_ERR_MAX:g}")
    win = _fit_window(radii, [r[2] for r in rows])
    fit = None
    if len(win) >= 3 or (len(win) >= 2 and len(radii) <= 4):
        sel = [rows[i] for i in (win if len(win) >= 3 else range(len(rows)))]
        n, b, r2 = fit_power_law([(r[0], r[1]) for r in sel])
        fit = Fit(n, b, r2)
        if len(win) < 3:
            flags.append("fit window too short after exclusions; fitted all rows")
            win = list(range(len(rows)))
    alt = None
    if len(win) >= 3:
        alt = fit_power_law([(rows[i][0], rows[i][3]) for i in win])[0]
    return ScanResult(("R_P", "intensity", "err_est", "peak_B2"), rows, fit, win, flags,
                      {"n_peak_B2": alt, "direction": tuple(direction)})


def ratio_experiment(src_num, src_den, path, q: QuadratureSpec | None = None,
                     n_samples: int = MIN_SAMPLES, jobs: int = 1) -> ScanResult:
    """Intensity ratio num/den along ``path`` rows (R_P, theta_P, phi_P) with a
    straight-line fit in R_P."""
    q = q or QuadratureSpec()
    rows, flags = [], []
    for R, th, ph in path:
        x = R * _direction(th, ph)
        s1, _, e1 = _intensity_at(src_num, x, q, n_samples, jobs)
        s0, _, e0 = _intensity_at(src_den, x, q, n_samples, jobs)
        err = e1 + e0
        rows.append((float(R), s1 / s0, err, s1, s0))
        if err > FIT_ERR_MAX:
            flags.append(f"R={R:g}: err_est {err:.3g} > {FIT_ERR_MAX:g}")
    R = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    if np.ptp(y) == 0:
        fit = Fit(float("nan"), float(y[0]), 1.0, 0.0, 0.0)
    else:
        res = stats.linregress(R, y)
        fit = Fit(float("nan"), float(res.intercept), float(res.rvalue**2), float(res.slope),
                  float(res.intercept_stderr))
    return ScanResult(("R_P", "ratio", "err_est", "I_num", "I_den"), rows, fit,
                      list(range(len(rows))), flags)


def theta_profile(source, R_P: float, phi_P: float, thetas, q: QuadratureSpec | None = None,
                  n_samples: int = MIN_SAMPLES, jobs: int = 1):
    q = q or QuadratureSpec()
    vals, errs = [], []
    for th in thetas:
        s, _, e = _intensity_at(source, R_P * _direction(th, phi_P), q, n_samples, jobs)
        vals.append(s)
        errs.append(e)
    return np.array(vals), np.array(errs)


def fwhm(thetas, values) -> float:
    """Full width at half maximum about the highest interior sample."""
    th = np.asarray(thetas, float)
    v = np.asarray(values, float)
    i = int(np.argmax(v))
    if i == 0 or i == v.size - 1:
        raise InvariantError("subbeam_peak", "no interior peak in the theta window")
    half = 0.5 * v[i]
    lo = i
    while lo > 0 and v[lo] > half:
        lo -= 1
    hi = i
    while hi < v.size - 1 and v[hi] > half:
        hi += 1
    if v[lo] > half or v[hi] > half:
        raise InvariantError("subbeam_half_max", "half maximum not bracketed in the theta window")
    left = th[lo] + (half - v[lo]) * (th[lo + 1] - th[lo]) / (v[lo + 1] - v[lo])
    right = th[hi - 1] + (half - v[hi - 1]) * (th[hi] - th[hi - 1]) / (v[hi] - v[hi - 1])
    return float(right - left)


def default_theta_center(source) -> float:
    if not isinstance(source, SourceConfig):
        return math.pi / 4
    orb = Orbit(source.radial.center, source.omega)
    return cusp_cone_angle(orb) if orb.speed >= 1 else math.pi / 4


def subbeam_width(source, R_P: float, phi_P: float = 0.0, q: QuadratureSpec | None = None,
                  theta_center: float | None = None, half_window: float = 0.5,
                  n_theta: int = 41, n_samples: int = MIN_SAMPLES, jobs: int = 1):
    """FWHM in theta_P of the period-mean intensity; returns (width, thetas, values)."""
    if n_theta < 41:
        raise InvariantError("subbeam_sampling", "theta scan needs at least 41 points")
    tc = default_theta_center(source) if theta_center is None else theta_center
    th = np.linspace(max(1e-3, tc - half_window), min(math.pi - 1e-3, tc + half_window), n_theta)
    vals, _ = theta_profile(source, R_P, phi_P, th, q, n_samples, jobs)
    return fwhm(th, vals), th, vals


def gradient_scan(source, radii, q: QuadratureSpec | None = None, phi_P: float = 0.0,
                  theta_center: float | None = None, half_window: float = 0.25,
                  n_theta: int = 41, n_times: int = 16, jobs: int = 1) -> ScanResult:
    """Largest transverse gradient |dB/dtheta|/R_P over a theta scan and time
    samples at each radius; the fit reports its growth exponent."""
    q = q or QuadratureSpec()
    tc = default_theta_center(source) if theta_center is None else theta_center
    th = np.linspace(tc - half_window, tc + half_window, n_theta)
    T = 2 * math.pi / abs(source.nu)
    rows, flags = [], []
    for R in radii:
        t = steady_start(source, R) + np.arange(n_times) * T / n_times
        TH, TT = np.meshgrid(th, t, indexing="ij")
        x = R * np.stack([np.sin(TH) * math.cos(phi_P), np.sin(TH) * math.sin(phi_P), np.cos(TH)], -1)
        ev = np.concatenate([x.reshape(-1, 3), TT.reshape(-1, 1)], axis=1)
        fb = field_batch(source, ev, q, jobs=jobs, warn=False)
        B = fb.B.reshape(n_theta, n_times, 3)
        dth = th[1] - th[0]
        g1 = np.max(np.linalg.norm(np.diff(B, axis=0), axis=2)) / (R * dth)
        g2 = np.max(np.linalg.norm(B[2:] - B[:-2], axis=2)) / (R * 2 * dth)
        noise = abs(g1 - g2) / g1 if g1 > 0 else 0.0
        if noise > GRAD_NOISE:
            flags.append(f"R={R:g}: difference noise {noise:.3g} > {GRAD_NOISE:g}")
            warnings.warn(f"gradient noise {noise:.3g} at R_P={R:g}", ScanWarning, stacklevel=2)
        rows.append((float(R), float(g1), float(np.max(fb.err_est)), float(noise)))
    n, b, r2 = fit_power_law([(r[0], r[1]) for r in rows])
    return ScanResult(("R_P", "max_grad_B", "err_est", "fd_noise"), rows, Fit(n, b, r2, slope=-n),
                      list(range(len(rows))), flags, {"growth_exponent": -n})


def position_angle(E) -> np.ndarray:
    """Orientation of the field projected on the (x, y) plane, in [0, pi)."""
    E = np.asarray(E, float)
    return np.mod(np.arctan2(E[..., 1], E[..., 0]), math.pi)


def polarization_sweep(el: CompactElement, theta_P: float = math.pi / 12, phis=None,
                       t_P: float | None = None, R_P: float = 20.0, noise_floor: float = 1e-9):
    """Position angle of E against phi_P on a cone of fixed polar angle.

    Returns (phis, angles, |B|, flags) where flags marks samples whose field
    lies below ``noise_floor`` times the largest |B| in the sweep.
    """
    phis = np.linspace(0, 2 * math.pi, 181) if phis is None else np.asarray(phis, float)
    t_P = R_P + el.radius + 2 * math.pi if t_P is None else t_P
    pts = R_P * np.stack([np.sin(theta_P) * np.cos(phis), np.sin(theta_P) * np.sin(phis),
                          np.full_like(phis, np.cos(theta_P))], axis=1)
    ev = np.column_stack([pts, np.full(phis.size, t_P)])
    fb = element_fields(el, ev)
    bmag = np.linalg.norm(fb.B, axis=1)
    flags = bmag < noise_floor * max(bmag.max(), 1e-300)
    return phis, position_angle(fb.E), bmag, flags


def angle_swing(phis, angles) -> float:
    """max |d angle / d phi| over its median, angles taken modulo pi."""
    d = np.diff(np.asarray(angles, float))
    d = (d + math.pi / 2) % math.pi - math.pi / 2
    rate = np.abs(d / np.diff(np.asarray(phis, float)))
    med = np.median(rate)
    return float(rate.max() / med) if med > 0 else math.inf

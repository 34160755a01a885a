"""Compiled cell sums for retarded integrals.

Every source cell k carries the time dependence

    P_k(t) = p_k cos(alpha_k - nu t) cos(Omega t),   t >= t_on

so the current and its derivatives follow in closed form. Each kernel loops
over observation events, then over cells in storage order, accumulating with
Neumaier compensation; results therefore do not depend on how the events
are chunked across threads.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _acc(s, c, i, v):
    t = s[i] + v
    if abs(s[i]) >= abs(v):
        c[i] += (s[i] - t) + v
    else:
        c[i] += (v - t) + s[i]
    s[i] = t


@njit(cache=True, nogil=True)
def potential(pos, w, p, alpha, dc, ds, nu, om, t_on, obs, polar_form):
    """(A0, Ax, Ay, Az) at each event row (x, y, z, t) of ``obs``."""
    m = obs.shape[0]
    out = np.zeros((m, 4))
    s = np.zeros(4)
    c = np.zeros(4)
    for e in range(m):
        xp, yp, zp, tp = obs[e, 0], obs[e, 1], obs[e, 2], obs[e, 3]
        s[:] = 0.0
        c[:] = 0.0
        for k in range(pos.shape[0]):
            dx = xp - pos[k, 0]
            dy = yp - pos[k, 1]
            dz = zp - pos[k, 2]
            R = math.sqrt(dx * dx + dy * dy + dz * dz)
            t = tp - R
            if t < t_on:
                continue
            a = alpha[k] - nu * t
            ca, sa = math.cos(a), math.sin(a)
            ct, st = math.cos(om * t), math.sin(om * t)
            g = nu * sa * ct - om * ca * st
            wr = w[k] / R
            if polar_form:
                pn = (p[k, 0] * dx + p[k, 1] * dy + p[k, 2] * dz) / R
                _acc(s, c, 0, wr * pn * (ca * ct / R + g))
            else:
                _acc(s, c, 0, wr * (dc[k] * ca + ds[k] * sa) * ct)
            for i in range(3):
                _acc(s, c, i + 1, wr * p[k, i] * g)
        for i in range(4):
            out[e, i] = s[i] + c[i]
    return out


@njit(cache=True, nogil=True)
def curl_source(pos, w, alpha, cg, ch, nu, om, t_on, obs):
    """Sum of w [curl j]/R with curl j = cg*g + ch*h at retarded time."""
    m = obs.shape[0]
    out = np.zeros((m, 3))
    s = np.zeros(3)
    c = np.zeros(3)
    for e in range(m):
        xp, yp, zp, tp = obs[e, 0], obs[e, 1], obs[e, 2], obs[e, 3]
        s[:] = 0.0
        c[:] = 0.0
        for k in range(pos.shape[0]):
            dx = xp - pos[k, 0]
            dy = yp - pos[k, 1]
            dz = zp - pos[k, 2]
            R = math.sqrt(dx * dx + dy * dy + dz * dz)
            t = tp - R
            if t < t_on:
                continue
            a = alpha[k] - nu * t
            ca, sa = math.cos(a), math.sin(a)
            ct, st = math.cos(om * t), math.sin(om * t)
            g = nu * sa * ct - om * ca * st
            h = nu * ca * ct + om * sa * st
            wr = w[k] / R
            for i in range(3):
                _acc(s, c, i, wr * (cg[k, i] * g + ch[k, i] * h))
        for i in range(3):
            out[e, i] = s[i] + c[i]
    return out


@njit(cache=True, nogil=True, inline="always")
def _cross(a0, a1, a2, b0, b1, b2):
    return a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0


@njit(cache=True, nogil=True)
def provider(pos, w, p, alpha, nu, om, t_on, obs, dirs):
    """B, dB/dt and the directional derivative (d . grad) B per event.

    Returns an (m, 9) array laid out as [B, dB/dt, (d.grad)B]. The fields
    follow from differentiating the retarded vector potential analytically
    cell by cell, so they stay valid for sources with sharp edges.
    """
    m = obs.shape[0]
    out = np.zeros((m, 9))
    s = np.zeros(9)
    c = np.zeros(9)
    n2 = nu * nu
    o2 = om * om
    for e in range(m):
        xp, yp, zp, tp = obs[e, 0], obs[e, 1], obs[e, 2], obs[e, 3]
        d0, d1, d2 = dirs[e, 0], dirs[e, 1], dirs[e, 2]
        s[:] = 0.0
        c[:] = 0.0
        for k in range(pos.shape[0]):
            dx = xp - pos[k, 0]
            dy = yp - pos[k, 1]
            dz = zp - pos[k, 2]
            R = math.sqrt(dx * dx + dy * dy + dz * dz)
            t = tp - R
            if t < t_on:
                continue
            n0, n1, nz = dx / R, dy / R, dz / R
            a = alpha[k] - nu * t
            ca, sa = math.cos(a), math.sin(a)
            ct, st = math.cos(om * t), math.sin(om * t)
            f0 = nu * sa * ct - om * ca * st
            f1 = -(n2 + o2) * ca * ct - 2.0 * nu * om * sa * st
            f2 = -nu * (n2 + 3.0 * o2) * sa * ct + om * (3.0 * n2 + o2) * ca * st
            iR = 1.0 / R
            iR2 = iR * iR
            wk = w[k]
            # u = p f0, du = p f1, ddu = p f2; every term is p x (something)
            kb = wk * (f1 * iR + f0 * iR2)
            kt = wk * (f2 * iR + f1 * iR2)
            dn = d0 * n0 + d1 * n1 + d2 * nz
            kr = -wk * dn * (f2 * iR + 2.0 * f1 * iR2 + 2.0 * f0 * iR2 * iR)
            kd = kb * iR
            q0, q1, q2 = d0 - dn * n0, d1 - dn * n1, d2 - dn * nz
            px, py, pz = p[k, 0], p[k, 1], p[k, 2]
            b0, b1, b2 = _cross(px, py, pz, n0, n1, nz)
            e0, e1, e2 = _cross(px, py, pz, q0, q1, q2)
            _acc(s, c, 0, kb * b0)
            _acc(s, c, 1, kb * b1)
            _acc(s, c, 2, kb * b2)
            _acc(s, c, 3, kt * b0)
            _acc(s, c, 4, kt * b1)
            _acc(s, c, 5, kt * b2)
            _acc(s, c, 6, kr * b0 + kd * e0)
            _acc(s, c, 7, kr * b1 + kd * e1)
            _acc(s, c, 8, kr * b2 + kd * e2)
        for i in range(9):
            out[e, i] = s[i] + c[i]
    return out


@njit(cache=True, nogil=True)
def hertz_points(rad, phi0, zs, wts, omega, pvec, cap_om, t_on, obs, roots, nroots):
    """Retarded Hertz vector of co-rotating point dipoles.

    ``roots[e, k, :nroots[e, k]]`` are the emission times of dipole k heard
    at event e; each contributes p(t)/(R |1 + dR/dt|).
    """
    m = obs.shape[0]
    out = np.zeros((m, 3))
    s = np.zeros(3)
    c = np.zeros(3)
    for e in range(m):
        xp, yp, zp = obs[e, 0], obs[e, 1], obs[e, 2]
        s[:] = 0.0
        c[:] = 0.0
        for k in range(rad.shape[0]):
            for q in range(nroots[e, k]):
                t = roots[e, k, q]
                if t < t_on:
                    continue
                ang = omega * t + phi0[k]
                ca, sa = math.cos(ang), math.sin(ang)
                sx, sy = rad[k] * ca, rad[k] * sa
                vx, vy = -omega * sy, omega * sx
                dx, dy, dz = xp - sx, yp - sy, zp - zs[k]
                R = math.sqrt(dx * dx + dy * dy + dz * dz)
                rdot = -(dx * vx + dy * vy) / R
                amp = wts[k] * math.cos(cap_om * t) / (R * abs(1.0 + rdot))
                # co-rotating (r, phi, z) components to Cartesian
                px = pvec[0] * ca - pvec[1] * sa
                py = pvec[0] * sa + pvec[1] * ca
                _acc(s, c, 0, amp * px)
                _acc(s, c, 1, amp * py)
                _acc(s, c, 2, amp * pvec[2])
        for i in range(3):
            out[e, i] = s[i] + c[i]
    return out

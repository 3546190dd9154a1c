"""Compiled inner loops: the fixed-step integrator and the logistic map.

Parameter vector layout: (delta, kappa, kappa_ex, omega_m, gamma_m, g0, drive).
Force and drive-modulation grids are sampled on the half-step lattice
(``2 * n_steps + 1`` points); an empty array disables the term.  Noise is one
standard-normal draw per step, applied as an increment on ``v``.
"""

import numpy as np
from numba import njit

DIVERGENCE_LIMIT = 1e12


@njit(cache=True, inline="always")
def _rhs(ar, ai, x, v, delta, kappa, kex_drive, omega_m, gamma_m, g0, force):
    phase = delta + g0 * x
    dar = -phase * ai - 0.5 * kappa * ar + kex_drive
    dai = phase * ar - 0.5 * kappa * ai
    dx = omega_m * v
    dv = -omega_m * x - gamma_m * v + g0 * (ar * ar + ai * ai) / omega_m + force
    return dar, dai, dx, dv


@njit(cache=True, inline="always")
def _tangent(ar, ai, x, v, w0, w1, w2, w3, delta, kappa, omega_m, gamma_m, g0):
    phase = delta + g0 * x
    r0 = -0.5 * kappa * w0 - phase * w1 - g0 * ai * w2
    r1 = phase * w0 - 0.5 * kappa * w1 + g0 * ar * w2
    r2 = omega_m * w3
    r3 = 2.0 * g0 / omega_m * (ar * w0 + ai * w1) - omega_m * w2 - gamma_m * w3
    return r0, r1, r2, r3


@njit(cache=True)
def rk4_chunk(state, p, n_steps, dt, force, drive_mod, noise, noise_scale,
              step0, rec_start, dec, out, out_pos):
    """Advance ``state`` in place by ``n_steps``.

    Records the state (intensity, x, v) into ``out`` after every global step
    ``g >= rec_start`` with ``(g - rec_start) % dec == 0``.  Returns
    ``(out_pos, bad_step)``; ``bad_step`` is -1 unless the state diverged.
    """
    delta, kappa, kex, omega_m, gamma_m, g0, drive = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    base_drive = np.sqrt(kex) * drive
    has_force = force.shape[0] > 0
    has_mod = drive_mod.shape[0] > 0
    has_noise = noise.shape[0] > 0
    ar, ai, x, v = state[0], state[1], state[2], state[3]
    h = 0.5 * dt
    n_out = out.shape[0]
    for i in range(n_steps):
        f0 = f1 = f2 = 0.0
        if has_force:
            f0 = force[2 * i]
            f1 = force[2 * i + 1]
            f2 = force[2 * i + 2]
        e0 = e1 = e2 = base_drive
        if has_mod:
            e0 = base_drive * (1.0 + drive_mod[2 * i])
            e1 = base_drive * (1.0 + drive_mod[2 * i + 1])
            e2 = base_drive * (1.0 + drive_mod[2 * i + 2])
        k1 = _rhs(ar, ai, x, v, delta, kappa, e0, omega_m, gamma_m, g0, f0)
        k2 = _rhs(ar + h * k1[0], ai + h * k1[1], x + h * k1[2], v + h * k1[3],
                  delta, kappa, e1, omega_m, gamma_m, g0, f1)
        k3 = _rhs(ar + h * k2[0], ai + h * k2[1], x + h * k2[2], v + h * k2[3],
                  delta, kappa, e1, omega_m, gamma_m, g0, f1)
        k4 = _rhs(ar + dt * k3[0], ai + dt * k3[1], x + dt * k3[2], v + dt * k3[3],
                  delta, kappa, e2, omega_m, gamma_m, g0, f2)
        ar += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        ai += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        x += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        v += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        if has_noise:
            v += noise_scale * noise[i]
        if not (abs(ar) < DIVERGENCE_LIMIT and abs(ai) < DIVERGENCE_LIMIT
                and abs(x) < DIVERGENCE_LIMIT and abs(v) < DIVERGENCE_LIMIT):
            state[0], state[1], state[2], state[3] = ar, ai, x, v
            return out_pos, i
        g = step0 + i + 1
        if g >= rec_start and (g - rec_start) % dec == 0 and out_pos < n_out:
            out[out_pos, 0] = ar * ar + ai * ai
            out[out_pos, 1] = x
            out[out_pos, 2] = v
            out_pos += 1
    state[0], state[1], state[2], state[3] = ar, ai, x, v
    return out_pos, -1


@njit(cache=True)
def tangent_chunk(state, w, p, n_steps, dt, noise, noise_scale, renorm_every, step0, logs):
    """RK4 on the flow and its linearization; renormalizes ``w`` every
    ``renorm_every`` steps and appends ``log |w|`` to ``logs``.

    Returns ``(n_logs_written, bad_step)``.
    """
    delta, kappa, kex, omega_m, gamma_m, g0, drive = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    e = np.sqrt(kex) * drive
    has_noise = noise.shape[0] > 0
    ar, ai, x, v = state[0], state[1], state[2], state[3]
    w0, w1, w2, w3 = w[0], w[1], w[2], w[3]
    h = 0.5 * dt
    n_logs = 0
    for i in range(n_steps):
        k1 = _rhs(ar, ai, x, v, delta, kappa, e, omega_m, gamma_m, g0, 0.0)
        j1 = _tangent(ar, ai, x, v, w0, w1, w2, w3, delta, kappa, omega_m, gamma_m, g0)
        a2, b2, x2, v2 = ar + h * k1[0], ai + h * k1[1], x + h * k1[2], v + h * k1[3]
        k2 = _rhs(a2, b2, x2, v2, delta, kappa, e, omega_m, gamma_m, g0, 0.0)
        j2 = _tangent(a2, b2, x2, v2, w0 + h * j1[0], w1 + h * j1[1], w2 + h * j1[2], w3 + h * j1[3],
                      delta, kappa, omega_m, gamma_m, g0)
        a3, b3, x3, v3 = ar + h * k2[0], ai + h * k2[1], x + h * k2[2], v + h * k2[3]
        k3 = _rhs(a3, b3, x3, v3, delta, kappa, e, omega_m, gamma_m, g0, 0.0)
        j3 = _tangent(a3, b3, x3, v3, w0 + h * j2[0], w1 + h * j2[1], w2 + h * j2[2], w3 + h * j2[3],
                      delta, kappa, omega_m, gamma_m, g0)
        a4, b4, x4, v4 = ar + dt * k3[0], ai + dt * k3[1], x + dt * k3[2], v + dt * k3[3]
        k4 = _rhs(a4, b4, x4, v4, delta, kappa, e, omega_m, gamma_m, g0, 0.0)
        j4 = _tangent(a4, b4, x4, v4, w0 + dt * j3[0], w1 + dt * j3[1], w2 + dt * j3[2], w3 + dt * j3[3],
                      delta, kappa, omega_m, gamma_m, g0)
        ar += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        ai += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        x += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        v += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        w0 += dt / 6.0 * (j1[0] + 2.0 * j2[0] + 2.0 * j3[0] + j4[0])
        w1 += dt / 6.0 * (j1[1] + 2.0 * j2[1] + 2.0 * j3[1] + j4[1])
        w2 += dt / 6.0 * (j1[2] + 2.0 * j2[2] + 2.0 * j3[2] + j4[2])
        w3 += dt / 6.0 * (j1[3] + 2.0 * j2[3] + 2.0 * j3[3] + j4[3])
        if has_noise:
            v += noise_scale * noise[i]
        if not (abs(ar) < DIVERGENCE_LIMIT and abs(ai) < DIVERGENCE_LIMIT
                and abs(x) < DIVERGENCE_LIMIT and abs(v) < DIVERGENCE_LIMIT):
            state[0], state[1], state[2], state[3] = ar, ai, x, v
            return n_logs, i
        if (step0 + i + 1) % renorm_every == 0:
            nrm = np.sqrt(w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3)
            logs[n_logs] = np.log(nrm)
            n_logs += 1
            w0, w1, w2, w3 = w0 / nrm, w1 / nrm, w2 / nrm, w3 / nrm
    state[0], state[1], state[2], state[3] = ar, ai, x, v
    w[0], w[1], w[2], w[3] = w0, w1, w2, w3
    return n_logs, -1


@njit(cache=True)
def logistic_orbit(r, x0, out):
    x = x0
    for k in range(out.shape[0]):
        out[k] = x
        x = r * x * (1.0 - x)

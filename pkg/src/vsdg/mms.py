"""Manufactured solutions and their source terms.

Both cases have a distribution of the separable form

    f(t, x, y, v1, v2) = S(t, x, y) g(v1) g(v2),   g(v) = exp(-v^2) (1 - v^2) (1 + v),

so the sources follow from a handful of closed-form derivatives:

    F = (S_t + v1 S_x + v2 S_y - 2 S) g(v1) g(v2)
        + S ((u1 - v1) g'(v1) g(v2) + (u2 - v2) g(v1) g'(v2))
    G = u_t - lap u + rho u + grad p - rho V

with rho = S I0^2 and rho V = S I0 I1 (1, 1), where I_m = int_{-1}^{1} v^m g(v) dv.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from vsdg.grid import ConfigurationError

PI = np.pi
TWO_PI = 2.0 * np.pi

# I_m = int_{-1}^{1} v^m g(v) dv, from a 50-point Gauss-Legendre rule (agrees with
# 30-digit adaptive quadrature to 1e-16); tests recompute both.
I0 = 1.1147035739838693
I1 = 0.17840709535094997


def g_profile(v):
    return np.exp(-v * v) * (1.0 - v * v) * (1.0 + v)


def g_profile_prime(v):
    q = (1.0 - v * v) * (1.0 + v)
    dq = 1.0 - 2.0 * v - 3.0 * v * v
    return np.exp(-v * v) * (dq - 2.0 * v * q)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution pieces of one test case; all callables broadcast over array inputs.

    ``spatial`` returns ``(S, S_t, S_x, S_y)``; ``velocity`` returns
    ``(u, u_t, lap_u)`` as 2-tuples; ``pressure`` returns ``(p, grad_p)``.
    """

    name: str
    spatial: Callable
    velocity: Callable
    pressure: Callable
    periodic_in_x: bool

    def f(self, t, x, y, v1, v2):
        S = self.spatial(t, x, y)[0]
        return S * g_profile(v1) * g_profile(v2)

    def f_split_trace(self, t, dt, x, y, v1, v2):
        """Exact value of the intermediate state after an exact velocity sub-step.

        To first order this is ``f + dt (f_t + v . grad_x f)`` at time ``t``; it is
        the exterior datum consistent with the spatial sub-step of a Lie splitting.
        """
        S, S_t, S_x, S_y = self.spatial(t, x, y)
        return (S + dt * (S_t + v1 * S_x + v2 * S_y)) * g_profile(v1) * g_profile(v2)

    def u(self, t, x, y):
        u, _, _ = self.velocity(t, x, y)
        return np.stack(np.broadcast_arrays(*u))

    def p(self, t, x, y):
        return self.pressure(t, x, y)[0]

    def rho(self, t, x, y):
        return self.spatial(t, x, y)[0] * I0 * I0

    def momentum(self, t, x, y):
        m = self.spatial(t, x, y)[0] * I0 * I1
        return np.stack([m, m])

    def F(self, t, x, y, v1, v2):
        S, St, Sx, Sy = self.spatial(t, x, y)
        (u1, u2), _, _ = self.velocity(t, x, y)
        g1, g2 = g_profile(v1), g_profile(v2)
        d1, d2 = g_profile_prime(v1), g_profile_prime(v2)
        return (St + v1 * Sx + v2 * Sy - 2.0 * S) * (g1 * g2) + S * ((u1 - v1) * (d1 * g2) + (u2 - v2) * (g1 * d2))

    def G(self, t, x, y):
        S = self.spatial(t, x, y)[0]
        u, ut, lap = self.velocity(t, x, y)
        _, gp = self.pressure(t, x, y)
        rho = S * I0 * I0
        rv = S * I0 * I1
        comps = [ut[i] - lap[i] + rho * u[i] + gp[i] - rv for i in range(2)]
        return np.stack(np.broadcast_arrays(*comps))


def _example1_spatial(t, x, y):
    c, dc = np.cos(t), -np.sin(t)
    sx, sy = np.sin(TWO_PI * x), np.sin(TWO_PI * y)
    cx, cy = np.cos(TWO_PI * x), np.cos(TWO_PI * y)
    S = sx * sy
    return c * S, dc * S, c * TWO_PI * cx * sy, c * TWO_PI * sx * cy


def _example1_velocity(t, x, y):
    c, dc = np.cos(t), -np.sin(t)
    sx, sy = np.sin(TWO_PI * x), np.sin(TWO_PI * y)
    cx, cy = np.cos(TWO_PI * x), np.cos(TWO_PI * y)
    w1 = -cx * sy + sy
    w2 = sx * cy - sx
    k2 = 4.0 * PI * PI
    lap1 = 2.0 * k2 * cx * sy - k2 * sy
    lap2 = -2.0 * k2 * sx * cy + k2 * sx
    return (c * w1, c * w2), (dc * w1, dc * w2), (c * lap1, c * lap2)


def _example1_pressure(t, x, y):
    c = np.cos(t)
    p = TWO_PI * c * (np.cos(TWO_PI * y) - np.cos(TWO_PI * x))
    k2 = 4.0 * PI * PI
    return p, (k2 * c * np.sin(TWO_PI * x), -k2 * c * np.sin(TWO_PI * y))


def _example2_spatial(t, x, y):
    a, b = PI * (x - t), PI * (y - t)
    sa, sb, ca, cb = np.sin(a), np.sin(b), np.cos(a), np.cos(b)
    S = sa * sb
    return S, -PI * (ca * sb + sa * cb), PI * ca * sb, PI * sa * cb


def _example2_velocity(t, x, y):
    X, Y = TWO_PI * x - t, TWO_PI * y - t
    sX, sY, cX, cY = np.sin(X), np.sin(Y), np.cos(X), np.cos(Y)
    u1 = -cX * sY
    u2 = sX * cY
    ut1 = -sX * sY + cX * cY
    ut2 = -cX * cY + sX * sY
    k = 8.0 * PI * PI
    return (u1, u2), (ut1, ut2), (k * cX * sY, -k * sX * cY)


def _example2_pressure(t, x, y):
    X, Y = TWO_PI * x - t, TWO_PI * y - t
    p = TWO_PI * (np.cos(Y) - np.cos(X))
    k2 = 4.0 * PI * PI
    return p, (k2 * np.sin(X), -k2 * np.sin(Y))


CASES = {
    "example1": ManufacturedCase("example1", _example1_spatial, _example1_velocity, _example1_pressure, True),
    # sin(pi (x - t)) is anti-periodic on [0, 1]
    "example2": ManufacturedCase("example2", _example2_spatial, _example2_velocity, _example2_pressure, False),
}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]
    except KeyError:
        raise ConfigurationError(f"unknown case {name!r}; expected one of {sorted(CASES)}") from None


def eval_exact(case, t, x, y, v1, v2):
    """Exact ``(f, u, p)`` at a phase-space point; ``u`` is stacked on the first axis."""
    case = get_case(case) if isinstance(case, str) else case
    return case.f(t, x, y, v1, v2), case.u(t, x, y), case.p(t, x, y)


def eval_sources(case, t, x, y, v1, v2):
    """Kinetic source ``F`` and fluid source ``G`` (stacked 2-vector)."""
    case = get_case(case) if isinstance(case, str) else case
    return case.F(t, x, y, v1, v2), case.G(t, x, y)
